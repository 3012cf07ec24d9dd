"""Unit-sphere geometry: directions, spherical caps, quadrature grids.

Everything here works on plain ``numpy`` arrays of shape ``(..., DIM)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GeometryError

DIM = 3
MIN_NODES = 16
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def as_direction(v, tol: float = 1e-12) -> np.ndarray:
    """Return ``v`` as a float array, checking that its last axis has unit norm."""
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1] != DIM:
        raise GeometryError(f"direction must have {DIM} components, got shape {arr.shape}")
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise GeometryError(f"direction is not unit length (|v| = {norms})")
    return arr


def normalize(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    n = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise GeometryError("cannot normalize the zero vector")
    return arr / n


def angle_between(a, b) -> np.ndarray:
    """Angle between unit vectors, accurate for small and near-pi angles."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def orthonormal_frame(axis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed frame ``(e1, e2, axis)``; deterministic in ``axis``."""
    a = normalize(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = normalize(helper - np.dot(helper, a) * a)
    e2 = np.cross(a, e1)
    # axis == +z gives the identity frame so lattices on polar caps stay readable
    if np.allclose(a, [0.0, 0.0, 1.0], atol=0.0, rtol=0.0):
        e1, e2 = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    return e1, e2, a


@dataclass(frozen=True)
class SphericalCap:
    axis: np.ndarray
    angular_radius: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (DIM,) or not np.isfinite(axis).all():
            raise ConfigurationError(f"cap axis must be a finite {DIM}-vector")
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise ConfigurationError("cap axis must be nonzero")
        object.__setattr__(self, "axis", axis / norm)
        r = float(self.angular_radius)
        if not (0.0 < r < np.pi / 2):
            raise ConfigurationError(
                f"cap angular radius must lie in (0, pi/2), got {self.angular_radius}"
            )
        object.__setattr__(self, "angular_radius", r)

    @property
    def area(self) -> float:
        return 2.0 * np.pi * (1.0 - np.cos(self.angular_radius))

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        return np.asarray(x) @ self.axis >= np.cos(self.angular_radius) - tol


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    cap: SphericalCap
    # construction parameters; lets tabulated data be checked against the grid it came from
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != DIM or len(nodes) != len(weights):
            raise ConfigurationError("grid nodes/weights have inconsistent shapes")
        if np.any(weights <= 0.0):
            raise ConfigurationError("grid weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> float:
        return float(np.sum(np.asarray(values, dtype=float) * self.weights))


def fibonacci_cap_points(cap: SphericalCap, count: int) -> np.ndarray:
    """Fibonacci-lattice points equidistributed in area over ``cap``.

    Heights are uniform in ``axis . x`` (equal-area bands on the sphere) and
    azimuths advance by the golden angle.
    """
    k = np.arange(count, dtype=float)
    one_minus_cos = 1.0 - np.cos(cap.angular_radius)
    z = 1.0 - one_minus_cos * (k + 0.5) / count
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = GOLDEN_ANGLE * k
    e1, e2, a = orthonormal_frame(cap.axis)
    pts = (s * np.cos(phi))[:, None] * e1 + (s * np.sin(phi))[:, None] * e2 + z[:, None] * a
    return normalize(pts)


def build_grid(cap: SphericalCap, node_count: int) -> QuadratureGrid:
    """Near-equal-area quadrature on a cap with uniform weights ``area / N``."""
    if int(node_count) != node_count or node_count < MIN_NODES:
        raise ConfigurationError(f"node_count must be an integer >= {MIN_NODES}, got {node_count}")
    n = int(node_count)
    nodes = fibonacci_cap_points(cap, n)
    weights = np.full(n, cap.area / n)
    meta = {
        "kind": "fibonacci",
        "node_count": n,
        "axis": [float(v) for v in cap.axis],
        "radius": cap.angular_radius,
    }
    return QuadratureGrid(nodes, weights, cap, meta=meta)


def project_to_plane(x) -> np.ndarray:
    """Orthogonal projection of upper-hemisphere directions onto the first two coordinates."""
    x = np.asarray(x, dtype=float)
    if np.any(x[..., 2] <= 0.0):
        raise GeometryError("point outside the open upper hemisphere")
    return x[..., :2].copy()


def lift_from_plane(x2) -> np.ndarray:
    """Inverse of :func:`project_to_plane`: ``x -> (x, sqrt(1 - |x|^2))``."""
    x2 = np.asarray(x2, dtype=float)
    r2 = np.sum(x2 * x2, axis=-1)
    if np.any(r2 >= 1.0):
        raise GeometryError("planar point outside the open unit disk")
    return np.concatenate([x2, np.sqrt(1.0 - r2)[..., None]], axis=-1)
