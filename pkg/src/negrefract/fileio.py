"""JSON / CSV / OBJ readers and writers, and run-configuration loading."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from .errors import ArtifactIOError, ConfigurationError
from .optics import MediumPair, Regime
from .refractor import CellAssignment, RefractorSolution, TargetMeasure
from .solver import SolverConfig
from .sphere_geom import QuadratureGrid, SphericalCap, orthonormal_frame
from .transport import SourceDensity


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ArtifactIOError(f"file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


# -- target measures and solutions -------------------------------------------


def targets_to_json(targets: TargetMeasure) -> list:
    return [
        {"direction": [float(c) for c in m], "energy": float(g)}
        for m, g in zip(targets.directions, targets.energies)
    ]


def targets_from_json(items) -> TargetMeasure:
    try:
        dirs = np.array([it["direction"] for it in items], dtype=float)
        energies = np.array([it["energy"] for it in items], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed target list: {exc}") from exc
    if dirs.ndim != 2 or dirs.shape[1] != 3:
        raise ConfigurationError("each target direction needs 3 components")
    # tolerate inputs rounded to a few digits
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return TargetMeasure(dirs, energies)


def medium_to_json(medium: MediumPair) -> dict:
    return {"n1": medium.n1, "n2": medium.n2, "z1": medium.z1, "z2": medium.z2, "alpha": medium.alpha}


def medium_from_json(block: dict) -> MediumPair:
    block = dict(block)
    alpha = float(block.get("alpha", 0.5))
    if "beta" in block and abs(alpha + float(block["beta"]) - 1.0) > 1e-12:
        raise ConfigurationError("alpha + beta must equal 1")
    z1 = float(block.get("z1", 1.0))
    if "sigma" in block:
        if "z2" in block:
            raise ConfigurationError("give either sigma or z2, not both")
        z2 = float(block["sigma"]) * z1
    else:
        z2 = float(block.get("z2", 1.0))
    if "n1" in block or "n2" in block:
        if not ("n1" in block and "n2" in block):
            raise ConfigurationError("both n1 and n2 are required when indices are given")
        n1, n2 = float(block["n1"]), float(block["n2"])
        if "kappa" in block and abs(float(block["kappa"]) - n2 / n1) > 1e-12:
            raise ConfigurationError(f"kappa {block['kappa']} is inconsistent with n2/n1 = {n2 / n1}")
    elif "kappa" in block:
        n1, n2 = 1.0, float(block["kappa"])
    else:
        raise ConfigurationError("medium block needs n1/n2 or kappa")
    return MediumPair(n1=n1, n2=n2, z1=z1, z2=z2, alpha=alpha)


def solution_to_json(sol: RefractorSolution) -> dict:
    return {
        "regime": sol.regime.value,
        "kappa": sol.medium.kappa,
        "medium": medium_to_json(sol.medium),
        "epsilon": sol.epsilon,
        "targets": targets_to_json(sol.targets),
        # repr round-trips doubles exactly
        "b": [float(v) for v in sol.b],
        "normalization": sol.normalization,
    }


def solution_from_json(data: dict) -> RefractorSolution:
    try:
        medium = medium_from_json(data["medium"])
        if abs(medium.kappa - float(data["kappa"])) > 1e-12:
            raise ConfigurationError("solution kappa does not match its medium block")
        return RefractorSolution(
            regime=Regime(data["regime"]),
            targets=targets_from_json(data["targets"]),
            b=np.array(data["b"], dtype=float),
            medium=medium,
            epsilon=float(data["epsilon"]),
            normalization=data.get("normalization", "GaugeB1"),
        )
    except KeyError as exc:
        raise ArtifactIOError(f"solution file is missing field {exc}") from exc


# -- tabulated densities -------------------------------------------------------


def read_density_csv(path, grid: QuadratureGrid) -> SourceDensity:
    """Rows ``node_index,value``; every grid node must appear exactly once."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]  # header
    values = np.full(len(grid), np.nan)
    try:
        for r in rows:
            values[int(r[0])] = float(r[1])
    except (ValueError, IndexError) as exc:
        raise ArtifactIOError(f"malformed density row in {path}: {exc}") from exc
    if np.isnan(values).any():
        raise ConfigurationError(f"density table {path} does not cover all {len(grid)} grid nodes")
    return SourceDensity.tabulated(values, grid)


def write_density_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_index", "value"])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])


# -- surface export ------------------------------------------------------------


def lattice_triangles(grid: QuadratureGrid) -> np.ndarray:
    """Triangulate grid nodes through their tangent-plane coordinates at the cap axis."""
    e1, e2, _ = orthonormal_frame(grid.cap.axis)
    uv = np.stack([grid.nodes @ e1, grid.nodes @ e2], axis=1)
    return Delaunay(uv).simplices


def write_obj(path, points, triangles=None) -> None:
    with open(path, "w") as fh:
        fh.write("# refractor surface rho(x) x\n")
        for p in points:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        if triangles is not None:
            for t in triangles:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def write_surface_csv(path, grid: QuadratureGrid, cells: CellAssignment) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "x3", "rho", "winner", "tie"])
        for x, r, k, t in zip(grid.nodes, cells.rho, cells.winner, cells.tie):
            w.writerow([repr(float(x[0])), repr(float(x[1])), repr(float(x[2])), repr(float(r)), int(k) + 1, int(t)])


# -- run configuration ---------------------------------------------------------


def cap_from_json(block: dict) -> SphericalCap:
    try:
        return SphericalCap(np.array(block["axis"], dtype=float), float(block["radius"]))
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"cap block needs axis and radius: {exc}") from exc


def density_from_json(block: dict | None, base: Path | None = None, grid: QuadratureGrid | None = None) -> SourceDensity:
    block = dict(block or {"kind": "Uniform"})
    kind = block.get("kind", "Uniform")
    if kind == "Uniform":
        return SourceDensity.uniform(float(block.get("value", 1.0)))
    if kind == "CosinePower":
        return SourceDensity.cosine_power(
            np.array(block.get("axis", [0.0, 0.0, 1.0]), dtype=float),
            float(block.get("exponent", 1.0)),
            float(block.get("value", 1.0)),
        )
    if kind == "Tabulated":
        if grid is None:
            raise ConfigurationError("a tabulated density needs the grid it is aligned to")
        path = Path(block["csv"])
        if base is not None and not path.is_absolute():
            path = base / path
        return read_density_csv(path, grid)
    raise ConfigurationError(f"unknown density kind {kind!r}")


@dataclass
class RunConfig:
    medium: MediumPair
    source_cap: SphericalCap
    source_density: dict
    grid_size: int
    target_cap: SphericalCap | None
    targets: TargetMeasure | None
    target_density: dict | None
    cell_count: int | None
    fine_nodes: int
    solver: SolverConfig
    lossless: bool = False
    epsilon: float | None = None
    base_dir: Path = field(default_factory=Path)


SOLVER_KEYS = {"rel_tol", "max_sweeps", "bisection_steps", "auto_refine", "max_refinements", "tie_tol"}


def load_config(path) -> RunConfig:
    path = Path(path)
    data = read_json(path)
    try:
        medium = medium_from_json(data["medium"])
        src = data["source"]
        tgt = data["target"]
    except KeyError as exc:
        raise ConfigurationError(f"config is missing block {exc}") from exc
    if "regime" in data and Regime(data["regime"]) is not medium.regime:
        raise ConfigurationError(
            f"config regime {data['regime']} contradicts kappa = {medium.kappa} "
            f"(which selects {medium.regime.value})"
        )
    explicit = "points" in tgt or "file" in tgt
    continuous = "density" in tgt or "cell_count" in tgt
    if explicit == continuous:
        raise ConfigurationError("target block needs exactly one of an explicit list or a density with cell_count")
    targets = None
    if explicit:
        items = tgt["points"] if "points" in tgt else read_json(path.parent / tgt["file"])
        targets = targets_from_json(items)
    elif "cell_count" not in tgt:
        raise ConfigurationError("continuous target needs cell_count")
    unknown = set(data.get("solver", {})) - SOLVER_KEYS
    if unknown:
        raise ConfigurationError(f"unknown solver settings: {sorted(unknown)}")
    target_cap = cap_from_json(tgt["cap"]) if "cap" in tgt else None
    if continuous and target_cap is None:
        raise ConfigurationError("continuous target needs a cap")
    eps = data.get("epsilon")
    return RunConfig(
        medium=medium,
        source_cap=cap_from_json(src["cap"]),
        source_density=src.get("density", {"kind": "Uniform"}),
        grid_size=int(src.get("grid_size", 20000)),
        target_cap=target_cap,
        targets=targets,
        target_density=tgt.get("density") if continuous else None,
        cell_count=int(tgt["cell_count"]) if continuous else None,
        fine_nodes=int(tgt.get("fine_nodes", 20000)),
        solver=SolverConfig(**data.get("solver", {})),
        lossless=bool(data.get("lossless", False)),
        epsilon=None if eps is None else float(eps),
        base_dir=path.parent,
    )
