"""Refraction into a negative-index medium and the associated Fresnel energy split.

Conventions: ``kappa = n2 / n1 < 0`` is the relative index, ``sigma = z2 / z1``
the impedance ratio, ``alpha`` / ``beta`` the parallel / perpendicular energy
fractions of the incident light. Functions broadcast over leading axes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    AdmissibilityError,
    ConfigurationError,
    DomainError,
    GeometryError,
    SingularConfigurationError,
)
from .sphere_geom import SphericalCap, angle_between, normalize, orthonormal_frame

PSI_SCAN_POINTS = 1024


class Regime(str, enum.Enum):
    """Which supporting quadrics build the refractor."""

    HYPERBOLOID_MAX = "HyperboloidMax"  # kappa < -1
    ELLIPSOID_MIN = "EllipsoidMin"  # -1 < kappa < 0

    @classmethod
    def from_kappa(cls, kappa: float) -> "Regime":
        if kappa < -1.0:
            return cls.HYPERBOLOID_MAX
        if -1.0 < kappa < 0.0:
            return cls.ELLIPSOID_MIN
        raise ConfigurationError(f"kappa must be negative and != -1, got {kappa}")

    @property
    def maximize(self) -> bool:
        return self is Regime.HYPERBOLOID_MAX


@dataclass(frozen=True)
class MediumPair:
    n1: float
    n2: float
    z1: float = 1.0
    z2: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if not self.n1 > 0.0:
            raise ConfigurationError(f"n1 must be positive, got {self.n1}")
        if not self.n2 < 0.0:
            raise ConfigurationError(f"n2 must be negative, got {self.n2}")
        if self.n2 == -self.n1:
            raise ConfigurationError("kappa = -1 is excluded (both regimes degenerate)")
        if not (self.z1 > 0.0 and self.z2 > 0.0):
            raise ConfigurationError("wave impedances must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def from_kappa(cls, kappa: float, sigma: float = 1.0, alpha: float = 0.5) -> "MediumPair":
        return cls(n1=1.0, n2=float(kappa), z1=1.0, z2=float(sigma), alpha=float(alpha))

    @property
    def kappa(self) -> float:
        return self.n2 / self.n1

    @property
    def sigma(self) -> float:
        return self.z2 / self.z1

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    @property
    def regime(self) -> Regime:
        return Regime.from_kappa(self.kappa)

    @property
    def threshold(self) -> float:
        """Smallest ``x . m`` that some interface can realise without total reflection."""
        k = self.kappa
        return 1.0 / k if k < -1.0 else k

    def admissible_interval(self, epsilon: float) -> tuple[float, float]:
        return self.threshold + epsilon, 1.0


def phi(t, kappa: float):
    """Multiplier ``lambda`` in ``x - kappa m = lambda nu`` as a function of ``t = x . nu``."""
    t = np.asarray(t, dtype=float)
    rad = 1.0 - (1.0 - t * t) / (kappa * kappa)
    if np.any(rad < 0.0):
        raise DomainError(
            "total internal reflection: incidence beyond the critical angle "
            f"(kappa={kappa}, min radicand={np.min(rad):.3g})"
        )
    out = t + abs(kappa) * np.sqrt(rad)
    return float(out) if out.ndim == 0 else out


def snell_refract(x, nu, medium: MediumPair | float) -> np.ndarray:
    """Refracted direction ``m = (x - phi(x.nu) nu) / kappa`` for unit ``x`` and normal ``nu``."""
    kappa = medium.kappa if isinstance(medium, MediumPair) else float(medium)
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    t = np.sum(x * nu, axis=-1)
    if np.any(t <= 0.0):
        raise GeometryError("ray strikes the interface from behind (x . nu <= 0)")
    lam = np.asarray(phi(t, kappa))
    return (x - lam[..., None] * nu) / kappa


def _p_q(t, kappa: float, sigma: float):
    t = np.asarray(t, dtype=float)
    p_den = sigma - kappa + (1.0 - kappa * sigma) * t
    q_den = 1.0 - kappa * sigma + (sigma - kappa) * t
    if np.any(p_den == 0.0) or np.any(q_den == 0.0):
        raise SingularConfigurationError("vanishing Fresnel denominator")
    p = (sigma + kappa - (1.0 + kappa * sigma) * t) / p_den
    q = (1.0 + kappa * sigma - (sigma + kappa) * t) / q_den
    return p, q


def fresnel_pq(t, medium: MediumPair):
    """Parallel and perpendicular reflection amplitudes ``p(t)``, ``q(t)``."""
    return _p_q(t, medium.kappa, medium.sigma)


def reflectance(t, kappa, sigma, alpha):
    """``alpha p^2 + (1 - alpha) q^2``; every argument may be an array (broadcast)."""
    p, q = _p_q(t, kappa, sigma)
    alpha = np.asarray(alpha, dtype=float)
    return alpha * p * p + (1.0 - alpha) * q * q


def fresnel_psi(t, medium: MediumPair):
    """Reflected energy fraction as a function of ``t = x . m``."""
    out = reflectance(t, medium.kappa, medium.sigma, medium.alpha)
    return float(out) if np.ndim(out) == 0 else out


def transmission_from_dot(t, medium: MediumPair, lossless: bool = False):
    if lossless:
        out = np.ones_like(np.asarray(t, dtype=float))
        return float(out) if out.ndim == 0 else out
    return 1.0 - fresnel_psi(t, medium)


def fresnel_transmission(x, m, medium: MediumPair, lossless: bool = False):
    """Transmitted energy fraction ``1 - psi(x . m)``; identically 1 when ``lossless``."""
    t = np.sum(np.asarray(x, dtype=float) * np.asarray(m, dtype=float), axis=-1)
    return transmission_from_dot(t, medium, lossless)


@dataclass(frozen=True)
class FresnelBounds:
    c_eps: float
    left_endpoint: float
    endpoint_max: float
    scan_max: float

    def __post_init__(self):
        if not 0.0 <= self.c_eps < 1.0:
            raise ConfigurationError(f"C_eps must lie in [0, 1), got {self.c_eps}")


def fresnel_bound(medium: MediumPair, epsilon: float) -> FresnelBounds:
    """Uniform upper bound on the reflected fraction over ``[threshold + eps, 1]``.

    ``p`` and ``q`` are monotone on the interval, so the maximum of ``psi`` sits
    at an endpoint. A dense scan backs this up for large ``epsilon``.
    """
    if epsilon <= 0.0:
        raise ConfigurationError("epsilon must be positive")
    lo, hi = medium.admissible_interval(epsilon)
    if lo > hi:
        raise ConfigurationError(
            f"admissible interval [{lo:.6g}, 1] is empty for epsilon={epsilon}"
        )
    endpoint_max = max(fresnel_psi(lo, medium), fresnel_psi(hi, medium))
    scan_max = float(np.max(fresnel_psi(np.linspace(lo, hi, PSI_SCAN_POINTS), medium)))
    c_eps = max(endpoint_max, scan_max)
    if c_eps >= 1.0:
        raise ConfigurationError(f"C_eps = {c_eps} >= 1: setup admits total reflection")
    return FresnelBounds(c_eps=c_eps, left_endpoint=lo, endpoint_max=endpoint_max, scan_max=scan_max)


def min_dot_over_caps(cap1: SphericalCap, cap2: SphericalCap) -> float:
    """Closed-form ``min x . m`` over ``x in cap1``, ``m in cap2``."""
    axis_angle = float(angle_between(cap1.axis, cap2.axis))
    return float(np.cos(min(np.pi, axis_angle + cap1.angular_radius + cap2.angular_radius)))


def _extremal_pair(cap1: SphericalCap, cap2: SphericalCap):
    """Directions in each cap realising the worst ``x . m``: pushed apart along the axes' great circle."""
    a1, a2 = cap1.axis, cap2.axis
    # cross products keep the in-plane direction accurate for nearly parallel axes
    n = np.cross(a1, a2)
    if np.linalg.norm(n) < 1e-15:
        u = orthonormal_frame(a1)[0]
    else:
        u = normalize(np.cross(n, a1))
    theta = float(angle_between(a1, a2))
    # a2 ~ cos(theta) a1 + sin(theta) u; t2 is the tangent at a2 pointing away from a1
    t2 = np.cos(theta) * u - np.sin(theta) * a1
    x = np.cos(cap1.angular_radius) * a1 - np.sin(cap1.angular_radius) * u
    m = np.cos(cap2.angular_radius) * a2 + np.sin(cap2.angular_radius) * t2
    return normalize(x), normalize(m)


@dataclass(frozen=True)
class AdmissibleSetup:
    medium: MediumPair
    source_cap: SphericalCap
    target_cap: SphericalCap
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ConfigurationError("epsilon must be positive")


@dataclass(frozen=True)
class AdmissibilityReport:
    worst_dot: float
    threshold: float
    margin: float
    epsilon: float
    passed: bool
    extremal_source: np.ndarray
    extremal_target: np.ndarray

    def as_dict(self) -> dict:
        return {
            "worst_dot": self.worst_dot,
            "threshold": self.threshold,
            "margin": self.margin,
            "epsilon": self.epsilon,
            "passed": self.passed,
            "extremal_source": self.extremal_source.tolist(),
            "extremal_target": self.extremal_target.tolist(),
        }


def admissibility_margin(medium: MediumPair, source_cap: SphericalCap, target_cap: SphericalCap) -> float:
    """Largest epsilon the two caps admit: ``min x . m - threshold``."""
    return min_dot_over_caps(source_cap, target_cap) - medium.threshold


def check_admissible(setup: AdmissibleSetup, raise_on_fail: bool = True) -> AdmissibilityReport:
    worst = min_dot_over_caps(setup.source_cap, setup.target_cap)
    thr = setup.medium.threshold
    margin = worst - thr
    x, m = _extremal_pair(setup.source_cap, setup.target_cap)
    report = AdmissibilityReport(
        worst_dot=worst,
        threshold=thr,
        margin=margin,
        epsilon=setup.epsilon,
        passed=margin >= setup.epsilon,
        extremal_source=x,
        extremal_target=m,
    )
    if raise_on_fail and not report.passed:
        label = "x.m >= 1/kappa + eps" if setup.medium.kappa < -1 else "x.m >= kappa + eps"
        raise AdmissibilityError(
            f"caps violate {label}: worst x.m = {worst:.6g}, threshold = {thr:.6g}, "
            f"margin {margin:.6g} < eps {setup.epsilon:.6g} "
            f"(extremal x = {np.round(x, 6).tolist()}, m = {np.round(m, 6).tolist()})",
            report=report,
        )
    return report
