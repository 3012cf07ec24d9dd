"""Supporting quadrics, the envelope refractor and its trace map on a grid.

A target direction ``m`` with focal parameter ``b`` carries the quadric
``rho(x) = b / (1 - kappa m . x)``: a hyperboloid sheet when ``kappa < -1`` and an
ellipsoid when ``-1 < kappa < 0``. The refractor is their pointwise max (first
case) or min (second case).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ConfigurationError, GeometryError
from .optics import MediumPair, Regime
from .sphere_geom import QuadratureGrid, angle_between, normalize

DEFAULT_TIE_TOL = 1e-9
MIN_SEPARATION = 1e-9


@dataclass(frozen=True)
class TargetMeasure:
    directions: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        dirs = np.ascontiguousarray(self.directions, dtype=float)
        g = np.ascontiguousarray(self.energies, dtype=float)
        if dirs.ndim != 2 or dirs.shape[1] != 3 or len(dirs) != len(g):
            raise ConfigurationError("target directions/energies have inconsistent shapes")
        if len(g) < 2:
            raise ConfigurationError("at least two targets are required (l >= 2)")
        if np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > 1e-12):
            raise ConfigurationError("target directions must be unit vectors")
        if not np.all(g > 0.0):
            raise ConfigurationError("target energies must be positive")
        # pairwise separation; l is small so the dense check is fine
        sep = angle_between(dirs[:, None, :], dirs[None, :, :])
        np.fill_diagonal(sep, np.inf)
        if np.min(sep) <= MIN_SEPARATION:
            i, j = np.unravel_index(np.argmin(sep), sep.shape)
            raise ConfigurationError(f"target directions {i} and {j} coincide")
        dirs.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "energies", g)

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def total(self) -> float:
        return float(np.sum(self.energies))


def b_bracket(medium: MediumPair, epsilon: float) -> tuple[float, float]:
    """Interval that gauge-fixed focal parameters ``b_i`` must stay in.

    Hyperboloid case: open ``(0, (1 - kappa) / (-eps kappa))``.
    Ellipsoid case: half-open ``(1 + kappa, 1 / (1 + kappa)]``.
    """
    k = medium.kappa
    if medium.regime is Regime.HYPERBOLOID_MAX:
        return 0.0, (1.0 - k) / (-epsilon * k)
    return 1.0 + k, 1.0 / (1.0 + k)


def in_bracket(b, medium: MediumPair, epsilon: float) -> np.ndarray:
    lo, hi = b_bracket(medium, epsilon)
    b = np.asarray(b, dtype=float)
    if medium.regime is Regime.HYPERBOLOID_MAX:
        return (b > lo) & (b < hi)
    return (b > lo) & (b <= hi)


@dataclass(frozen=True)
class RefractorSolution:
    regime: Regime
    targets: TargetMeasure
    b: np.ndarray
    medium: MediumPair
    epsilon: float
    normalization: str = "GaugeB1"

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.shape != (len(self.targets),):
            raise ConfigurationError("b must have one entry per target")
        if not np.all(b > 0.0) or not np.all(np.isfinite(b)):
            raise ConfigurationError("focal parameters must be positive and finite")
        if Regime(self.regime) is not self.medium.regime:
            raise ConfigurationError(
                f"regime {Regime(self.regime).value} does not match kappa={self.medium.kappa}"
            )
        if self.normalization == "GaugeB1":
            if b[0] != 1.0:
                raise ConfigurationError(f"gauge requires b_1 = 1, got {b[0]}")
            bad = np.flatnonzero(~in_bracket(b, self.medium, self.epsilon))
            if len(bad):
                lo, hi = b_bracket(self.medium, self.epsilon)
                raise ConfigurationError(
                    f"b[{bad[0]}] = {b[bad[0]]} outside the admissible bracket ({lo}, {hi})"
                )
        b.setflags(write=False)
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "b", b)

    def scaled(self, c: float) -> "RefractorSolution":
        """Same refractor up to the homothety ``rho -> c rho``."""
        if not c > 0.0:
            raise ConfigurationError("scale factor must be positive")
        if c == 1.0:
            return self
        return replace(self, b=self.b * c, normalization="Scaled")


def quadric_radius(m, b, x, kappa: float):
    """``b / (1 - kappa m . x)``; the denominator must be positive."""
    d = 1.0 - kappa * np.sum(np.asarray(m, dtype=float) * np.asarray(x, dtype=float), axis=-1)
    if np.any(d <= 0.0):
        raise GeometryError("inadmissible pair: 1 - kappa m.x <= 0")
    out = np.asarray(b, dtype=float) / d
    return float(out) if np.ndim(out) == 0 else out


def quadric_normal(m, x, kappa: float) -> np.ndarray:
    """Unit normal ``(x - kappa m) / |x - kappa m|`` of any quadric focusing into ``m``."""
    return normalize(np.asarray(x, dtype=float) - kappa * np.asarray(m, dtype=float))


def denominators(nodes, directions, kappa: float) -> np.ndarray:
    """Matrix ``1 - kappa x_j . m_i`` over nodes ``j`` and targets ``i``."""
    d = 1.0 - kappa * (np.asarray(nodes, dtype=float) @ np.asarray(directions, dtype=float).T)
    if np.any(d <= 0.0):
        raise GeometryError("inadmissible pair: 1 - kappa m.x <= 0 at some node")
    return np.ascontiguousarray(d)


@dataclass(frozen=True)
class CellAssignment:
    winner: np.ndarray
    rho: np.ndarray
    tie: np.ndarray
    margin: np.ndarray

    @property
    def tie_fraction(self) -> float:
        return float(np.mean(self.tie)) if len(self.tie) else 0.0

    def counts(self, l: int) -> np.ndarray:
        return np.bincount(self.winner, minlength=l)


def envelope_from_denominators(denom, b, regime: Regime, tie_tol: float = DEFAULT_TIE_TOL) -> CellAssignment:
    rho, winner, tie, margin = kernels.envelope(denom, b, Regime(regime).maximize, float(tie_tol))
    return CellAssignment(winner=winner, rho=rho, tie=tie, margin=margin)


def envelope_radius(sol: RefractorSolution, x, tie_tol: float = DEFAULT_TIE_TOL):
    """Envelope value, winning index, tie flag and margin at direction(s) ``x``.

    Scalar outputs for a single direction, arrays for a stack.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    denom = denominators(np.atleast_2d(x), sol.targets.directions, sol.medium.kappa)
    cells = envelope_from_denominators(denom, sol.b, sol.regime, tie_tol)
    if single:
        return float(cells.rho[0]), int(cells.winner[0]), bool(cells.tie[0]), float(cells.margin[0])
    return cells.rho, cells.winner, cells.tie, cells.margin


def trace_cells(sol: RefractorSolution, grid: QuadratureGrid, tie_tol: float = DEFAULT_TIE_TOL) -> CellAssignment:
    """Assign every grid node to the target its supporting quadric refracts it into."""
    denom = denominators(grid.nodes, sol.targets.directions, sol.medium.kappa)
    return envelope_from_denominators(denom, sol.b, sol.regime, tie_tol)


def surface_points(sol: RefractorSolution, grid: QuadratureGrid, cells: CellAssignment | None = None) -> np.ndarray:
    """Points ``rho(x) x`` of the refractor over the grid."""
    if cells is None:
        cells = trace_cells(sol, grid)
    return cells.rho[:, None] * grid.nodes


def lipschitz_constant(rho_max: float, medium: MediumPair, epsilon: float) -> float:
    """Bound on ``|rho(x) - rho(y)| / |x - y|`` for an envelope with ``max rho = rho_max``."""
    k = medium.kappa
    if medium.regime is Regime.HYPERBOLOID_MAX:
        return rho_max / (epsilon * epsilon * abs(k))
    return rho_max * abs(k) / (1.0 - k * k)


def height_bound(medium: MediumPair, epsilon: float) -> float:
    """Upper bound on ``max rho`` once the envelope is scaled to ``min rho = 1``."""
    k = medium.kappa
    if medium.regime is Regime.HYPERBOLOID_MAX:
        return (1.0 - k) / (-epsilon * k)
    return 1.0 / (1.0 + k)
