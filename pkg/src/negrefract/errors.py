"""Exception hierarchy. Each class maps to a distinct CLI exit code."""


class RefractorError(Exception):
    exit_code = 1


class ConfigurationError(RefractorError, ValueError):
    exit_code = 2


class DomainError(RefractorError, ValueError):
    """Argument outside the domain of a formula (e.g. total internal reflection)."""

    exit_code = 9


class GeometryError(DomainError):
    """Ray hits the interface from behind, or a point leaves the chart."""


class SingularConfigurationError(DomainError):
    """A denominator in a closed-form expression vanishes."""


class AdmissibilityError(RefractorError):
    exit_code = 3

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EnergyBudgetError(RefractorError):
    exit_code = 4

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InfeasibleError(RefractorError):
    exit_code = 5

    def __init__(self, message, target=None):
        super().__init__(message)
        self.target = target


class ResolutionError(RefractorError):
    exit_code = 7


class PreconditionError(RefractorError):
    """A diagnostic was asked to run on input it is not defined for."""

    exit_code = 8


class DegenerateError(DomainError):
    """Near-singular matrix in the Monge-Ampere diagnostics."""


class ArtifactIOError(RefractorError):
    """Missing, unreadable or malformed input/output file."""

    exit_code = 6
