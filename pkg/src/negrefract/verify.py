"""Forward ray tracing and energy audits of computed refractors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optics import fresnel_bound, snell_refract, transmission_from_dot
from .refractor import CellAssignment, RefractorSolution, TargetMeasure, quadric_normal, trace_cells
from .sphere_geom import QuadratureGrid, angle_between
from .transport import SourceDensity, refractor_measure

ANGLE_TOL = 1e-9


@dataclass
class TraceReport:
    max_angle_error: float
    fraction_within_tol: float
    checked_nodes: int
    tie_fraction: float
    energy_deltas: np.ndarray | None
    angle_errors: np.ndarray

    @property
    def passed(self) -> bool:
        return self.max_angle_error < ANGLE_TOL

    def as_dict(self) -> dict:
        return {
            "max_angle_error": float(self.max_angle_error),
            "fraction_within_tol": float(self.fraction_within_tol),
            "checked_nodes": int(self.checked_nodes),
            "tie_fraction": float(self.tie_fraction),
            "energy_deltas": None if self.energy_deltas is None else [float(v) for v in self.energy_deltas],
            "passed": self.passed,
        }


def raytrace_verify(
    sol: RefractorSolution,
    grid: QuadratureGrid,
    cells: CellAssignment,
    f: SourceDensity | None = None,
    lossless: bool = False,
) -> TraceReport:
    """Refract each grid ray off the surface defined by ``sol.b`` and compare with ``cells``.

    The supporting quadric at a node is recomputed from ``sol.b``; its normal
    drives the vector Snell law and the outgoing direction is compared with the
    target recorded in ``cells``. Nodes tied in either assignment are skipped.
    """
    live = trace_cells(sol, grid)
    keep = ~(cells.tie | live.tie)
    x = grid.nodes[keep]
    m_live = sol.targets.directions[live.winner[keep]]
    m_expected = sol.targets.directions[cells.winner[keep]]
    nu = quadric_normal(m_live, x, sol.medium.kappa)
    m_hat = snell_refract(x, nu, sol.medium)
    err = angle_between(m_hat, m_expected)
    deltas = None
    if f is not None:
        ev = refractor_measure(sol, f, grid, cells, lossless)
        deltas = ev.per_target - sol.targets.energies
    return TraceReport(
        max_angle_error=float(np.max(err)) if len(err) else 0.0,
        fraction_within_tol=float(np.mean(err < ANGLE_TOL)) if len(err) else 1.0,
        checked_nodes=int(len(err)),
        tie_fraction=cells.tie_fraction,
        energy_deltas=deltas,
        angle_errors=err,
    )


@dataclass
class EnergyAudit:
    per_target: np.ndarray
    residuals: np.ndarray
    total_emitted: float
    total_transmitted: float
    partition_error: float
    subsets_checked: int
    subset_failures: int
    worst_subset_ratio: float
    c_eps: float | None
    loss_bound_ok: bool | None
    rel_tol: float

    @property
    def residuals_ok(self) -> bool:
        return bool(
            np.all(np.abs(self.residuals[1:]) <= self.rel_tol) and self.residuals[0] >= -self.rel_tol
        )

    @property
    def passed(self) -> bool:
        return (
            self.partition_error <= 1e-10
            and self.subset_failures == 0
            and self.residuals_ok
            and self.loss_bound_ok is not False
        )

    def as_dict(self) -> dict:
        return {
            "per_target": [float(v) for v in self.per_target],
            "residuals": [float(v) for v in self.residuals],
            "total_emitted": self.total_emitted,
            "total_transmitted": self.total_transmitted,
            "partition_error": self.partition_error,
            "subsets_checked": self.subsets_checked,
            "subset_failures": self.subset_failures,
            "worst_subset_ratio": self.worst_subset_ratio,
            "c_eps": self.c_eps,
            "loss_bound_ok": self.loss_bound_ok,
            "residuals_ok": self.residuals_ok,
            "passed": self.passed,
        }


def random_subsets(l: int, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """``count`` random nonempty index subsets of ``range(l)``."""
    out = []
    while len(out) < count:
        mask = rng.random(l) < 0.5
        if mask.any():
            out.append(np.flatnonzero(mask))
    return out


def energy_audit(
    sol: RefractorSolution,
    f: SourceDensity,
    grid: QuadratureGrid,
    targets: TargetMeasure | None = None,
    rel_tol: float = 1e-2,
    lossless: bool = False,
    n_subsets: int = 100,
    seed: int = 0,
) -> EnergyAudit:
    """Recompute the transmitted-energy vector from scratch and check it against ``targets``."""
    targets = targets if targets is not None else sol.targets
    cells = trace_cells(sol, grid)
    ev = refractor_measure(sol, f, grid, cells, lossless)
    # ungrouped total over all nodes: same summands, different order
    dots = np.einsum("ij,ij->i", grid.nodes, sol.targets.directions[cells.winner])
    t = np.asarray(transmission_from_dot(dots, sol.medium, lossless), dtype=float)
    direct = float(np.sum(f.sample(grid) * grid.weights * t))
    partition_error = abs(float(np.sum(ev.per_target)) - direct) / direct
    g = targets.energies
    residuals = (ev.per_target - g) / g
    rng = np.random.default_rng(seed)
    failures, worst = 0, np.inf
    for s in random_subsets(len(g), n_subsets, rng):
        ratio = float(np.sum(ev.per_target[s]) / np.sum(g[s]))
        worst = min(worst, ratio)
        failures += ratio < 1.0 - rel_tol
    c_eps, loss_ok = None, None
    if not lossless:
        c_eps = fresnel_bound(sol.medium, sol.epsilon).c_eps
        loss_ok = ev.total_transmitted >= (1.0 - c_eps) * ev.total_emitted
    return EnergyAudit(
        per_target=ev.per_target,
        residuals=residuals,
        total_emitted=ev.total_emitted,
        total_transmitted=ev.total_transmitted,
        partition_error=partition_error,
        subsets_checked=n_subsets,
        subset_failures=int(failures),
        worst_subset_ratio=float(worst),
        c_eps=c_eps,
        loss_bound_ok=loss_ok,
        rel_tol=rel_tol,
    )
