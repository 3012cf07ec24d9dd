"""Far-field refractor design between positive- and negative-index media.

The public surface re-exported here covers the usual pipeline: build a source
grid, describe the media and target, solve for the focal parameters, verify.
"""
from .errors import (
    AdmissibilityError,
    ConfigurationError,
    DomainError,
    EnergyBudgetError,
    InfeasibleError,
    RefractorError,
)
from .kernels import BACKEND
from .optics import (
    AdmissibleSetup,
    FresnelBounds,
    MediumPair,
    Regime,
    check_admissible,
    fresnel_bound,
    fresnel_psi,
    fresnel_transmission,
    phi,
    snell_refract,
)
from .refractor import (
    CellAssignment,
    RefractorSolution,
    TargetMeasure,
    envelope_radius,
    quadric_normal,
    quadric_radius,
    trace_cells,
)
from .solver import Normalization, SolveReport, SolverConfig, normalize_solution, solve_discrete
from .sphere_geom import QuadratureGrid, SphericalCap, build_grid, lift_from_plane, project_to_plane
from .transport import (
    EnergyVector,
    SourceDensity,
    check_energy_budget,
    discretize_target,
    refractor_measure,
    total_energy,
)
from .verify import energy_audit, raytrace_verify

__version__ = "0.1.0"
