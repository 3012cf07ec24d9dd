"""Command-line entry point: solve, verify, ma-residual, discretize-target, export-mesh.

Exit codes: 0 success, 1 not converged / check failed, 2 bad configuration,
3 admissibility violated, 4 energy budget violated, 5 target infeasible,
6 file I/O, 7 resolution, 8 diagnostic precondition refused, 9 domain error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .errors import (
    AdmissibilityError,
    ArtifactIOError,
    ConfigurationError,
    EnergyBudgetError,
    PreconditionError,
    RefractorError,
)
from .monge_ampere import PerturbedField, QuadricField, ma_jacobian_check
from .optics import AdmissibleSetup, admissibility_margin, check_admissible, fresnel_bound
from .refractor import surface_points, trace_cells
from .solver import enclosing_cap, solve_discrete
from .sphere_geom import build_grid, project_to_plane
from .transport import check_energy_budget, discretize_target
from .verify import energy_audit, raytrace_verify

log = logging.getLogger("negrefract")

MA_DISCREPANCY_TOL = 1e-4
MA_OPERATOR_TOL = 1e-6


def _setup(cfg: fileio.RunConfig, grid_size: int | None):
    grid = build_grid(cfg.source_cap, grid_size or cfg.grid_size)
    f = fileio.density_from_json(cfg.source_density, cfg.base_dir, grid)
    return grid, f


def _targets(cfg: fileio.RunConfig):
    if cfg.targets is not None:
        return cfg.targets, cfg.target_cap or enclosing_cap(cfg.targets.directions), None
    g = fileio.density_from_json(cfg.target_density, cfg.base_dir)
    disc = discretize_target(g, cfg.target_cap, cfg.cell_count, cfg.fine_nodes)
    return disc.targets, cfg.target_cap, disc


def _epsilon(cfg, medium, src_cap, tgt_cap) -> float:
    if cfg.epsilon is not None:
        return cfg.epsilon
    margin = admissibility_margin(medium, src_cap, tgt_cap)
    if margin <= 0.0:
        report = check_admissible(AdmissibleSetup(medium, src_cap, tgt_cap, 1.0), raise_on_fail=False)
        raise AdmissibilityError(
            f"admissibility hypothesis violated: no positive epsilon exists; worst x.m = "
            f"{report.worst_dot:.6g} against threshold {report.threshold:.6g} (margin {margin:.6g}), "
            f"extremal x = {np.round(report.extremal_source, 6).tolist()}, "
            f"m = {np.round(report.extremal_target, 6).tolist()}",
            report,
        )
    return margin


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _export_mesh(out: Path, sol, grid, cells) -> None:
    fileio.write_obj(out / "surface.obj", surface_points(sol, grid, cells), fileio.lattice_triangles(grid))
    fileio.write_surface_csv(out / "surface.csv", grid, cells)


def cmd_solve(args) -> int:
    cfg = fileio.load_config(args.config)
    lossless = cfg.lossless or args.lossless
    grid, f = _setup(cfg, args.grid_size)
    targets, tgt_cap, disc = _targets(cfg)
    eps = _epsilon(cfg, cfg.medium, cfg.source_cap, tgt_cap)
    try:
        adm = check_admissible(AdmissibleSetup(cfg.medium, cfg.source_cap, tgt_cap, eps))
    except AdmissibilityError as exc:
        raise AdmissibilityError(f"admissibility hypothesis violated: {exc}", exc.report) from exc
    bounds = fresnel_bound(cfg.medium, eps)
    budget = check_energy_budget(f, grid, targets.total, bounds)
    if not budget.passed:
        raise EnergyBudgetError(
            "energy budget hypothesis violated: source energy "
            f"{budget.available:.6g} < mu / (1 - C_eps) = {budget.required:.6g} (C_eps = {bounds.c_eps:.6g})",
            budget,
        )
    sol, report = solve_discrete(f, grid, targets, cfg.medium, cfg.solver, eps, lossless, target_cap=tgt_cap)
    if report.grid_size != len(grid):
        grid = build_grid(cfg.source_cap, report.grid_size)
    cells = trace_cells(sol, grid, cfg.solver.tie_tol)
    out = _out_dir(args.out)
    fileio.write_json(out / "solution.json", fileio.solution_to_json(sol))
    rep = report.as_dict()
    rep["admissibility"] = adm.as_dict()
    rep["c_eps"] = bounds.c_eps
    rep["budget_slack"] = budget.slack
    rep["lossless"] = lossless
    if disc is not None:
        rep["discretization"] = {"cells": len(targets), "diameter_bound": disc.diameter_bound, "iota": disc.iota}
    fileio.write_json(out / "report.json", rep)
    _export_mesh(out, sol, grid, cells)
    status = "converged" if report.converged else "NOT converged"
    print(f"{status}: {report.sweeps} sweeps, max residual {report.max_residual:.3e}, "
          f"surplus on m1 {report.surplus:.3e}, grid {report.grid_size}")
    return 0 if report.converged else 1


def cmd_verify(args) -> int:
    cfg = fileio.load_config(args.config)
    lossless = cfg.lossless or args.lossless
    sol = fileio.solution_from_json(fileio.read_json(args.solution))
    grid, f = _setup(cfg, args.grid_size)
    cells = trace_cells(sol, grid, cfg.solver.tie_tol)
    trace = raytrace_verify(sol, grid, cells, f, lossless)
    audit = energy_audit(sol, f, grid, rel_tol=cfg.solver.rel_tol, lossless=lossless, seed=args.seed)
    result = {"trace": trace.as_dict(), "energy": audit.as_dict(), "lossless": lossless}
    passed = trace.passed and audit.passed
    result["passed"] = passed
    if args.out:
        fileio.write_json(_out_dir(args.out) / "verify.json", result)
    print(f"ray trace max angle error {trace.max_angle_error:.3e} rad; "
          f"transmitted {audit.total_transmitted:.6g} of {audit.total_emitted:.6g}; "
          f"max residual {np.max(np.abs(audit.residuals[1:])):.3e}; "
          f"subset failures {audit.subset_failures}/{audit.subsets_checked}")
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def _field_from_json(data: dict, kappa: float):
    kind = data.get("type", "quadric")
    if kind != "quadric":
        raise ConfigurationError(f"unknown field type {kind!r}")
    m = np.array(data["m"], dtype=float)
    field = QuadricField(m / np.linalg.norm(m), float(data.get("b", 1.0)), kappa)
    pert = data.get("perturbation")
    if pert:
        field = PerturbedField(field, float(pert["amplitude"]), pert["center"], float(pert["width"]))
    return field, np.array(data["points"], dtype=float)


def _point_passes(p) -> bool:
    return p.relative_discrepancy < MA_DISCREPANCY_TOL or p.operator_residual < MA_OPERATOR_TOL


def cmd_ma_residual(args) -> int:
    cfg = fileio.load_config(args.config)
    kappa = cfg.medium.kappa
    if args.field:
        field, pts = _field_from_json(fileio.read_json(args.field), kappa)
        reports = [ma_jacobian_check(field, cfg.medium, pts, args.h_fd)]
    else:
        data = fileio.read_json(args.solution)
        if "b" not in data:
            raise ArtifactIOError("input is neither a field nor a solution file")
        if not args.per_cell:
            raise PreconditionError(
                "a piecewise-quadric refractor is only Lipschitz across cell boundaries; the "
                "Monge-Ampere diagnostics need a C^2 chart. Re-run with --per-cell to check cell interiors."
            )
        sol = fileio.solution_from_json(data)
        grid, _ = _setup(cfg, args.grid_size)
        cells = trace_cells(sol, grid)
        # interior nodes: clear winners well inside the upper hemisphere
        ok = (~cells.tie) & (cells.margin > 1e-3 * cells.rho) & (grid.nodes[:, 2] > 0.1)
        idx = np.flatnonzero(ok)
        rng = np.random.default_rng(args.seed)
        idx = np.sort(rng.choice(idx, size=min(args.points, len(idx)), replace=False))
        reports = []
        for j in idx:
            k = cells.winner[j]
            field = QuadricField(sol.targets.directions[k], sol.b[k], kappa)
            reports.append(ma_jacobian_check(field, cfg.medium, [project_to_plane(grid.nodes[j])], args.h_fd))
    points = [p for r in reports for p in r.points]
    merged = type(reports[0])(points=points, h_fd=args.h_fd)
    result = merged.as_dict()
    passed = all(_point_passes(p) for p in points)
    result["passed"] = passed
    if args.out:
        fileio.write_json(_out_dir(args.out) / "ma_residual.json", result)
    print(f"{len(points)} points: max Jacobian discrepancy {result['jacobian_discrepancy']['max']:.3e}, "
          f"max operator residual {result['operator_residual']['max']:.3e}")
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def cmd_discretize(args) -> int:
    cfg = fileio.load_config(args.config)
    if cfg.cell_count is None:
        raise ConfigurationError("discretize-target needs a continuous target block")
    _, _, disc = _targets(cfg)
    out = _out_dir(args.out)
    fileio.write_json(out / "targets.json", fileio.targets_to_json(disc.targets))
    print(f"{len(disc.targets)} cells, total energy {disc.targets.total:.12g}, "
          f"diameter bound {disc.diameter_bound:.4g} (iota {disc.iota:.4g})")
    return 0


def cmd_export_mesh(args) -> int:
    cfg = fileio.load_config(args.config)
    sol = fileio.solution_from_json(fileio.read_json(args.solution))
    grid, _ = _setup(cfg, args.grid_size)
    _export_mesh(_out_dir(args.out), sol, grid, trace_cells(sol, grid, cfg.solver.tie_tol))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="negrefract", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solution=False, out_required=False):
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--grid-size", type=int, default=None, help="override the source grid size")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        if solution:
            p.add_argument("--solution", required=True, help="solution.json from `solve`")

    p = sub.add_parser("solve", help="compute a refractor")
    common(p, out_required=True)
    p.add_argument("--lossless", action="store_true", help="ignore Fresnel reflection losses")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="ray trace and energy audit of a solution")
    common(p, solution=True)
    p.add_argument("--lossless", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ma-residual", help="Monge-Ampere / Jacobian diagnostics")
    common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--field", help="smooth field description (JSON)")
    src.add_argument("--solution", help="solution.json; requires --per-cell")
    p.add_argument("--per-cell", action="store_true", help="check cell interiors of a piecewise solution")
    p.add_argument("--h-fd", type=float, default=1e-4)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_ma_residual)

    p = sub.add_parser("discretize-target", help="split a continuous target into point masses")
    common(p, out_required=True)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("export-mesh", help="write surface.obj / surface.csv for a solution")
    common(p, solution=True, out_required=True)
    p.set_defaults(func=cmd_export_mesh)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except RefractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 6


if __name__ == "__main__":
    sys.exit(main())
