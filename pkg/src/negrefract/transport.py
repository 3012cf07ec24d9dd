"""Source densities, transmitted-energy measures and target discretization."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DomainError, ResolutionError
from .optics import FresnelBounds, transmission_from_dot
from .refractor import CellAssignment, RefractorSolution, TargetMeasure
from .sphere_geom import QuadratureGrid, SphericalCap, build_grid, fibonacci_cap_points, normalize

DEFAULT_FINE_NODES = 20000
LLOYD_ITERATIONS = 20


class DensityKind(str, enum.Enum):
    UNIFORM = "Uniform"
    COSINE_POWER = "CosinePower"
    TABULATED = "Tabulated"


@dataclass(frozen=True)
class SourceDensity:
    """Intensity on a cap.

    ``Uniform``: constant ``value``. ``CosinePower``: ``value * (axis . x) ** exponent``.
    ``Tabulated``: one value per node of a specific grid (``grid_meta`` records which).
    """

    kind: DensityKind
    value: float = 1.0
    axis: np.ndarray | None = None
    exponent: float = 1.0
    table: np.ndarray | None = None
    grid_meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        kind = DensityKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is DensityKind.TABULATED:
            if self.table is None:
                raise ConfigurationError("tabulated density needs a value table")
            table = np.ascontiguousarray(self.table, dtype=float)
            if table.ndim != 1 or not np.all(table > 0.0):
                raise DomainError("tabulated density values must all be positive")
            table.setflags(write=False)
            object.__setattr__(self, "table", table)
        elif not self.value > 0.0:
            raise DomainError(f"density scale must be positive, got {self.value}")
        if kind is DensityKind.COSINE_POWER:
            if self.axis is None:
                raise ConfigurationError("cosine-power density needs an axis")
            object.__setattr__(self, "axis", normalize(self.axis))

    @classmethod
    def uniform(cls, value: float = 1.0) -> "SourceDensity":
        return cls(DensityKind.UNIFORM, value=value)

    @classmethod
    def cosine_power(cls, axis, exponent: float = 1.0, value: float = 1.0) -> "SourceDensity":
        return cls(DensityKind.COSINE_POWER, value=value, axis=np.asarray(axis, dtype=float), exponent=exponent)

    @classmethod
    def tabulated(cls, values, grid: QuadratureGrid | None = None) -> "SourceDensity":
        meta = dict(grid.meta) if grid is not None else {}
        if grid is not None and len(values) != len(grid):
            raise ConfigurationError("tabulated density length does not match the grid")
        return cls(DensityKind.TABULATED, table=np.asarray(values, dtype=float), grid_meta=meta)

    def sample(self, grid: QuadratureGrid) -> np.ndarray:
        """Density values at the grid nodes, checked strictly positive."""
        if self.kind is DensityKind.UNIFORM:
            vals = np.full(len(grid), float(self.value))
        elif self.kind is DensityKind.COSINE_POWER:
            c = grid.nodes @ self.axis
            if np.any(c <= 0.0):
                raise DomainError("cosine-power density vanishes on the grid")
            vals = self.value * c**self.exponent
        else:
            if len(self.table) != len(grid):
                raise ConfigurationError(
                    f"tabulated density has {len(self.table)} values for a {len(grid)}-node grid"
                )
            if self.grid_meta and grid.meta and self.grid_meta != dict(grid.meta):
                raise ConfigurationError("tabulated density was built for a different grid")
            vals = np.array(self.table)
        if not np.all(vals > 0.0):
            raise DomainError("density must be strictly positive on the grid")
        return vals


def total_energy(f: SourceDensity, grid: QuadratureGrid) -> float:
    return float(np.sum(f.sample(grid) * grid.weights))


@dataclass(frozen=True)
class EnergyVector:
    per_target: np.ndarray
    total_emitted: float
    total_transmitted: float


def node_transmission(sol: RefractorSolution, grid: QuadratureGrid, cells: CellAssignment, lossless: bool = False) -> np.ndarray:
    """Transmission ``t`` at each node, evaluated against its winning target."""
    m = sol.targets.directions[cells.winner]
    dots = np.einsum("ij,ij->i", grid.nodes, m)
    return np.asarray(transmission_from_dot(dots, sol.medium, lossless), dtype=float)


def _grouped_sums(values, labels, l: int) -> np.ndarray:
    # stable sort by label, then numpy's pairwise summation per contiguous block
    order = np.argsort(labels, kind="stable")
    sorted_vals = values[order]
    bounds = np.searchsorted(labels[order], np.arange(l + 1))
    return np.array([np.sum(sorted_vals[bounds[i]:bounds[i + 1]]) for i in range(l)])


def refractor_measure(
    sol: RefractorSolution,
    f: SourceDensity,
    grid: QuadratureGrid,
    cells: CellAssignment,
    lossless: bool = False,
) -> EnergyVector:
    """Transmitted energy landing on each target; tie nodes count for their lowest-index winner."""
    fw = f.sample(grid) * grid.weights
    transmitted = fw * node_transmission(sol, grid, cells, lossless)
    per = _grouped_sums(transmitted, cells.winner, len(sol.targets))
    return EnergyVector(
        per_target=per,
        total_emitted=float(np.sum(fw)),
        total_transmitted=float(np.sum(per)),
    )


@dataclass(frozen=True)
class BudgetCheck:
    passed: bool
    slack: float
    required: float
    available: float


def check_energy_budget(f: SourceDensity, grid: QuadratureGrid, mu_total: float, bounds: FresnelBounds) -> BudgetCheck:
    """Source energy must cover ``mu_total / (1 - C_eps)``; slack is available minus required."""
    available = total_energy(f, grid)
    required = mu_total / (1.0 - bounds.c_eps)
    return BudgetCheck(passed=available >= required, slack=available - required, required=required, available=available)


@dataclass(frozen=True)
class Discretization:
    targets: TargetMeasure
    labels: np.ndarray
    fine_grid: QuadratureGrid
    diameter_bound: float
    iota: float


def discretize_target(
    g: SourceDensity,
    cap: SphericalCap,
    l: int,
    fine_nodes: int = DEFAULT_FINE_NODES,
    lloyd_iterations: int = LLOYD_ITERATIONS,
) -> Discretization:
    """Split a continuous target density into ``l`` point masses.

    A fine grid is partitioned by nearest seed. Seeds start on a Fibonacci
    lattice and take a few Lloyd steps (area centroids) so cells come out
    compact and of similar area. Each cell gets its total energy, placed at the
    cell's energy centroid projected to the sphere. ``diameter_bound`` is twice
    the largest node-to-centroid distance and ``iota`` its reciprocal.
    """
    if int(l) != l or l < 2:
        raise ConfigurationError(f"cell count must be an integer >= 2, got {l}")
    l = int(l)
    if l > fine_nodes:
        raise ResolutionError(f"{l} cells requested from a {fine_nodes}-node grid")
    fine = build_grid(cap, fine_nodes)
    if l == fine_nodes:
        labels = np.arange(l, dtype=np.intp)
    else:
        seeds = fibonacci_cap_points(cap, l)
        for _ in range(lloyd_iterations):
            _, labels = cKDTree(seeds).query(fine.nodes)
            sums = np.stack([np.bincount(labels, fine.nodes[:, k], minlength=l) for k in range(3)], 1)
            occupied = np.linalg.norm(sums, axis=1) > 0
            seeds[occupied] = normalize(sums[occupied])
        _, labels = cKDTree(seeds).query(fine.nodes)
        labels = np.asarray(labels, dtype=np.intp)
    counts = np.bincount(labels, minlength=l)
    if np.any(counts == 0):
        raise ResolutionError(
            f"{int(np.sum(counts == 0))} of {l} cells are empty; increase fine_nodes"
        )
    mass = g.sample(fine) * fine.weights
    energies = _grouped_sums(mass, labels, l)
    moments = np.stack([_grouped_sums(mass * fine.nodes[:, k], labels, l) for k in range(3)], axis=1)
    reps = normalize(moments)
    if l == fine_nodes:
        reps = fine.nodes.copy()
    spread = np.linalg.norm(fine.nodes - reps[labels], axis=1)
    diameter = 2.0 * float(np.max(spread))
    return Discretization(
        targets=TargetMeasure(reps, energies),
        labels=labels,
        fine_grid=fine,
        diameter_bound=diameter,
        iota=1.0 / diameter if diameter > 0 else np.inf,
    )
