"""Monotone coordinate sweeps on the focal parameters ``b``.

With every other coordinate frozen, node ``x_j`` joins cell ``i`` exactly when
``b_i`` crosses the breakpoint ``thr_j = (1 - kappa x_j . m_i) * best_j``, where
``best_j`` is the envelope value of the other quadrics. Cell energy is therefore
a step function of ``b_i`` whose jumps are known, so each coordinate update
places ``b_i`` between two consecutive breakpoints: the largest cell whose
energy does not exceed ``g_i``. Iterates stay in the feasible set
(``G_i <= g_i`` for ``i >= 2``) and move monotonically.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigurationError, EnergyBudgetError, InfeasibleError
from .optics import AdmissibleSetup, MediumPair, admissibility_margin, Regime, check_admissible, fresnel_bound, transmission_from_dot
from .refractor import (
    DEFAULT_TIE_TOL,
    RefractorSolution,
    TargetMeasure,
    b_bracket,
    denominators,
    in_bracket,
    trace_cells,
)
from .sphere_geom import QuadratureGrid, SphericalCap, build_grid
from .transport import SourceDensity, check_energy_budget, refractor_measure

log = logging.getLogger(__name__)

# relative nudge past the last breakpoint when a cell takes every node
EDGE_NUDGE = 1e-6
# sweeps without a new best residual before a grid counts as exhausted
STALL_SWEEPS = 10


class Normalization(str, enum.Enum):
    MIN_RADIUS_ONE = "MinRadiusOne"
    GAUGE_B1 = "GaugeB1"


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-2
    max_sweeps: int = 200
    bisection_steps: int = 60
    auto_refine: bool = False
    max_refinements: int = 3
    tie_tol: float = DEFAULT_TIE_TOL

    def __post_init__(self):
        if not self.rel_tol > 0.0:
            raise ConfigurationError("rel_tol must be positive")
        if self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be >= 1")
        if self.bisection_steps < 1:
            raise ConfigurationError("bisection_steps must be >= 1")
        if self.max_refinements < 0:
            raise ConfigurationError("max_refinements must be >= 0")


@dataclass
class SolveReport:
    converged: bool
    residuals: np.ndarray
    surplus: float
    sweeps: int
    grid_size: int
    tie_fraction: float
    energies: np.ndarray
    max_residual: float
    refinements: int = 0
    elapsed: float = 0.0
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "residuals": [float(r) for r in self.residuals],
            "surplus_m1": float(self.surplus),
            "sweeps": int(self.sweeps),
            "grid_size": int(self.grid_size),
            "tie_fraction": float(self.tie_fraction),
            "energies": [float(e) for e in self.energies],
            "max_residual": float(self.max_residual),
            "refinements": int(self.refinements),
            "elapsed_seconds": float(self.elapsed),
        }


def initial_b(medium: MediumPair, epsilon: float, l: int) -> np.ndarray:
    """Feasible start: ``b_1 = 1`` and every other cell provably empty."""
    k = medium.kappa
    if medium.regime is Regime.HYPERBOLOID_MAX:
        start = 0.9 * (-k * epsilon) / (1.0 - k)
    else:
        start = 1.0 / (1.0 + k)
    b = np.full(l, start)
    b[0] = 1.0
    return b


def residuals_ok(G, g, rel_tol: float) -> bool:
    rel = (G - g) / g
    return bool(np.all(np.abs(rel[1:]) <= rel_tol) and G[0] >= g[0] * (1.0 - rel_tol))


def _largest_prefix(cum, budget: float, steps: int) -> int:
    """Largest ``k`` with ``cum[k - 1] <= budget`` (``cum`` nondecreasing), by bisection."""
    lo, hi = 0, len(cum)  # invariant: prefix lo fits, prefix hi + 1 does not
    for _ in range(steps):
        if lo >= hi:
            break
        mid = (lo + hi + 1) // 2
        if cum[mid - 1] <= budget:
            lo = mid
        else:
            hi = mid - 1
    return lo


def coordinate_update(
    i: int,
    b: np.ndarray,
    denom: np.ndarray,
    energy: np.ndarray,
    g_i: float,
    regime: Regime,
    bracket: tuple[float, float],
    bisection_steps: int,
    empty_value: float,
) -> float:
    """New ``b_i`` giving cell ``i`` the most energy not above ``g_i``, others frozen.

    ``energy[j]`` is the transmitted energy node ``j`` would deliver to target ``i``.
    """
    maximize = regime.maximize
    other = kernels.best_other(denom, b, i, maximize)
    thr = denom[:, i] * other
    # order nodes by the b_i at which they join cell i
    order = np.argsort(thr, kind="stable")
    if not maximize:
        order = order[::-1]
    s = thr[order]
    cum = np.cumsum(energy[order])
    k = _largest_prefix(cum, g_i, bisection_steps)
    n = len(s)
    if k == 0:
        new = empty_value
    elif k == n:
        new = s[-1] * (1.0 + EDGE_NUDGE) if maximize else s[-1] * (1.0 - EDGE_NUDGE)
    else:
        new = 0.5 * (s[k - 1] + s[k])
    lo, hi = bracket
    inside = (lo < new < hi) if maximize else (lo < new <= hi)
    if not inside:
        raise InfeasibleError(
            f"target {i + 1}: energy g = {g_i:.6g} needs b = {new:.6g}, outside the "
            f"admissible bracket ({lo:.6g}, {hi:.6g})",
            target=i,
        )
    return float(new)


def _grid_for(cap: SphericalCap, n: int) -> QuadratureGrid:
    return build_grid(cap, n)


def _measure(sol, f, grid, cfg, lossless):
    cells = trace_cells(sol, grid, cfg.tie_tol)
    return cells, refractor_measure(sol, f, grid, cells, lossless)


def solve_discrete(
    f: SourceDensity,
    grid: QuadratureGrid,
    targets: TargetMeasure,
    medium: MediumPair,
    config: SolverConfig | None = None,
    epsilon: float | None = None,
    lossless: bool = False,
    initial: np.ndarray | None = None,
    check: bool = True,
    target_cap: SphericalCap | None = None,
):
    """Run the coordinate sweep; returns ``(RefractorSolution, SolveReport)``.

    ``epsilon`` defaults to the actual admissibility margin between the grid cap
    and ``target_cap`` (by default a cap around the target directions).
    """
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    if target_cap is None:
        target_cap = enclosing_cap(targets.directions)
    elif not np.all(target_cap.contains(targets.directions, tol=1e-9)):
        raise ConfigurationError("some target directions lie outside the target cap")
    setup_eps = epsilon
    if setup_eps is None:
        setup_eps = admissibility_margin(medium, grid.cap, target_cap)
        if not setup_eps > 0.0:
            check_admissible(AdmissibleSetup(medium, grid.cap, target_cap, 1e-300))
    if check:
        check_admissible(AdmissibleSetup(medium, grid.cap, target_cap, setup_eps))
        bounds = fresnel_bound(medium, setup_eps)
        budget = check_energy_budget(f, grid, targets.total, bounds)
        if not budget.passed:
            raise EnergyBudgetError(
                f"source energy {budget.available:.6g} is below mu/(1 - C_eps) = "
                f"{budget.required:.6g} (C_eps = {bounds.c_eps:.6g})",
                report=budget,
            )
    regime = medium.regime
    l = len(targets)
    g = targets.energies
    bracket = b_bracket(medium, setup_eps)
    empty = initial_b(medium, setup_eps, l)[1]
    b = initial_b(medium, setup_eps, l) if initial is None else np.array(initial, dtype=float)
    if b[0] != 1.0 or not np.all(in_bracket(b, medium, setup_eps)):
        raise ConfigurationError("initial b must satisfy the gauge b_1 = 1 and the bracket")

    sweeps_total = 0
    refinements = 0
    history = []
    while True:
        denom = denominators(grid.nodes, targets.directions, medium.kappa)
        fw = f.sample(grid) * grid.weights
        dots = grid.nodes @ targets.directions.T
        trans = np.asarray(transmission_from_dot(dots, medium, lossless), dtype=float)
        node_energy = fw[:, None] * trans
        sol = RefractorSolution(regime, targets, b, medium, setup_eps)
        cells, ev = _measure(sol, f, grid, cfg, lossless)
        converged = residuals_ok(ev.per_target, g, cfg.rel_tol)
        best, since_best = np.inf, 0
        while not converged and sweeps_total < cfg.max_sweeps:
            before = b.copy()
            for i in range(1, l):
                b[i] = coordinate_update(
                    i, b, denom, node_energy[:, i], g[i], regime, bracket, cfg.bisection_steps, empty
                )
            sweeps_total += 1
            sol = RefractorSolution(regime, targets, b, medium, setup_eps)
            cells, ev = _measure(sol, f, grid, cfg, lossless)
            rel = (ev.per_target - g) / g
            history.append(float(np.max(np.abs(rel[1:]))))
            converged = residuals_ok(ev.per_target, g, cfg.rel_tol)
            if history[-1] < best:
                best, since_best = history[-1], 0
            else:
                since_best += 1
            if np.array_equal(b, before) or (cfg.auto_refine and since_best >= STALL_SWEEPS):
                # fixed point or plateau: this grid cannot resolve g any better
                break
        coarse = float(np.max(node_energy)) > cfg.rel_tol * float(np.min(g))
        if converged or not cfg.auto_refine or refinements >= cfg.max_refinements or not coarse:
            break
        if sweeps_total >= cfg.max_sweeps:
            break
        refinements += 1
        log.info("refining grid %d -> %d nodes", len(grid), 4 * len(grid))
        grid = _grid_for(grid.cap, 4 * len(grid))

    rel = (ev.per_target - g) / g
    report = SolveReport(
        converged=converged,
        residuals=rel,
        surplus=float(ev.per_target[0] - g[0]),
        sweeps=sweeps_total,
        grid_size=len(grid),
        tie_fraction=cells.tie_fraction,
        energies=ev.per_target,
        max_residual=float(np.max(np.abs(rel[1:]))),
        refinements=refinements,
        elapsed=time.perf_counter() - t0,
        history=history,
    )
    return sol, report


def enclosing_cap(directions) -> SphericalCap:
    """Small cap containing all directions: axis at their normalized mean."""
    d = np.asarray(directions, dtype=float)
    axis = d.sum(axis=0)
    axis = axis / np.linalg.norm(axis)
    radius = float(np.max(np.arccos(np.clip(d @ axis, -1.0, 1.0))))
    # caps need a positive radius; pad by a hair so boundary points stay inside
    return SphericalCap(axis, min(max(radius * (1.0 + 1e-12) + 1e-12, 1e-9), np.pi / 2 - 1e-9))


def normalize_solution(sol: RefractorSolution, grid: QuadratureGrid, mode: Normalization | str) -> RefractorSolution:
    """Rescale ``b`` so ``min rho = 1`` over the grid, or so ``b_1 = 1``."""
    mode = Normalization(mode)
    if mode is Normalization.GAUGE_B1:
        if sol.normalization == "GaugeB1":
            return sol
        b = sol.b / sol.b[0]
        b[0] = 1.0
        return replace(sol, b=b, normalization="GaugeB1")
    rho_min = float(np.min(trace_cells(sol, grid).rho))
    if rho_min == 1.0 and sol.normalization == "MinRadiusOne":
        return sol
    return replace(sol, b=sol.b / rho_min, normalization="MinRadiusOne")
