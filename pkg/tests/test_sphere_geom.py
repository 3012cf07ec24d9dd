import numpy as np
import pytest
from hypothesis import given, strategies as st

from negrefract.errors import ConfigurationError, GeometryError
from negrefract.sphere_geom import (
    SphericalCap,
    angle_between,
    build_grid,
    lift_from_plane,
    orthonormal_frame,
    project_to_plane,
)

# 2*pi*(1 - cos 0.4), evaluated at 30 digits
CAP_AREA_04 = 0.495988402644433710129824347687


def test_cap_area_pi_over_3():
    grid = build_grid(SphericalCap([0, 0, 1], np.pi / 3), 10000)
    assert np.isclose(grid.weights.sum(), np.pi, rtol=1e-12)


def test_small_grid_membership():
    cap = SphericalCap([0, 0, 1], 0.4)
    grid = build_grid(cap, 16)
    assert len(grid) == 16
    assert np.all(grid.nodes[:, 2] >= np.cos(0.4))


def test_large_grid_area_oracle():
    grid = build_grid(SphericalCap([0, 0, 1], 0.4), 20000)
    assert abs(grid.weights.sum() - CAP_AREA_04) / CAP_AREA_04 < 5e-3


def test_min_nodes_rejected():
    with pytest.raises(ConfigurationError):
        build_grid(SphericalCap([0, 0, 1], 0.4), 15)


@pytest.mark.parametrize("radius", [0.0, -0.1, np.pi / 2, 2.0])
def test_cap_radius_validated(radius):
    with pytest.raises(ConfigurationError):
        SphericalCap([0, 0, 1], radius)


def test_grid_is_deterministic_and_readonly():
    cap = SphericalCap([0.2, -0.3, 0.9], 0.5)
    a, b = build_grid(cap, 500), build_grid(cap, 500)
    assert np.array_equal(a.nodes, b.nodes)
    with pytest.raises(ValueError):
        a.nodes[0, 0] = 1.0


@given(
    ax=st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 0.1),
    r=st.floats(0.01, 1.5),
    n=st.integers(16, 400),
)
def test_grid_invariants(ax, r, n):
    cap = SphericalCap(ax, r)
    grid = build_grid(cap, n)
    assert np.allclose(np.linalg.norm(grid.nodes, axis=1), 1.0, atol=1e-12)
    assert np.all(grid.nodes @ cap.axis >= np.cos(r) - 1e-12)
    assert np.all(grid.weights > 0)
    assert np.isclose(grid.weights.sum(), cap.area, rtol=5e-3)


def test_lattice_equidistribution():
    # node fraction in any polar band or half-plane tracks its area fraction
    cap = SphericalCap([0, 0, 1], 1.0)
    for n in (101, 400, 1601, 6400):
        grid = build_grid(cap, n)
        for frac in (0.25, 0.5, 0.8):
            z = 1.0 - frac * (1.0 - np.cos(1.0))
            assert abs(np.mean(grid.nodes[:, 2] >= z) - frac) <= 1.0 / n
        assert abs(np.mean(grid.nodes[:, 0] > 0) - 0.5) < 4.0 / np.sqrt(n)


def test_frame_is_orthonormal():
    for axis in ([0, 0, 1], [1, 0, 0], [0.3, 0.4, -0.5]):
        e1, e2, a = orthonormal_frame(axis)
        M = np.stack([e1, e2, a])
        assert np.allclose(M @ M.T, np.eye(3), atol=1e-14)
        assert np.allclose(np.cross(e1, e2), a, atol=1e-14)


def test_projection_examples():
    assert np.array_equal(project_to_plane([0.0, 0.0, 1.0]), [0.0, 0.0])
    assert np.array_equal(project_to_plane([0.6, 0.0, 0.8]), [0.6, 0.0])


def test_projection_round_trip(rng):
    v = rng.normal(size=(1000, 3))
    v[:, 2] = np.abs(v[:, 2]) + 1e-3
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    back = lift_from_plane(project_to_plane(v))
    assert np.max(np.abs(back - v)) < 1e-12


@pytest.mark.parametrize("x", [[0, 0, -1], [1, 0, 0], [0.6, 0, -0.8]])
def test_projection_rejects_lower_hemisphere(x):
    with pytest.raises(GeometryError):
        project_to_plane(x)


def test_angle_between_small_and_large():
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([np.cos(1e-10), np.sin(1e-10), 0.0])
    assert np.isclose(angle_between(a, b), 1e-10, rtol=1e-6)
    assert np.isclose(angle_between(a, -a), np.pi)
