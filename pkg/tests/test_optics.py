import numpy as np
import pytest
from hypothesis import given, strategies as st

from negrefract.errors import AdmissibilityError, ConfigurationError, DomainError, GeometryError
from negrefract.optics import (
    AdmissibleSetup,
    MediumPair,
    Regime,
    admissibility_margin,
    check_admissible,
    fresnel_bound,
    fresnel_pq,
    fresnel_psi,
    fresnel_transmission,
    min_dot_over_caps,
    phi,
    snell_refract,
)
from negrefract.sphere_geom import SphericalCap, angle_between

kappas = st.one_of(st.floats(-6.0, -1.05), st.floats(-0.95, -0.05))


def admissible_t(medium, eps, u):
    lo = medium.threshold + eps
    return lo + (1.0 - lo) * u


# -- medium ---------------------------------------------------------------


def test_medium_fields():
    m = MediumPair(n1=1.5, n2=-3.0, z1=2.0, z2=3.0, alpha=0.3)
    assert m.kappa == -2.0
    assert m.sigma == 1.5
    assert abs(m.alpha + m.beta - 1.0) < 1e-12
    assert m.regime is Regime.HYPERBOLOID_MAX
    assert MediumPair.from_kappa(-0.5).regime is Regime.ELLIPSOID_MIN


@pytest.mark.parametrize(
    "kw",
    [
        dict(n1=1.0, n2=1.0),
        dict(n1=1.0, n2=-1.0),
        dict(n1=-1.0, n2=-2.0),
        dict(n1=1.0, n2=-2.0, z2=0.0),
        dict(n1=1.0, n2=-2.0, alpha=1.5),
    ],
)
def test_medium_rejects(kw):
    with pytest.raises(ConfigurationError):
        MediumPair(**kw)


# -- phi ------------------------------------------------------------------


def test_phi_examples():
    assert phi(1.0, -2.0) == 3.0
    assert phi(1.0, -0.5) == 1.5
    # 0.9 + 2 sqrt(0.9525), 30-digit evaluation
    assert abs(phi(0.9, -2.0) - 2.85192212959431350364253989647) < 1e-14


def test_phi_total_internal_reflection():
    # -1 < kappa < 0 needs t^2 >= 1 - kappa^2
    with pytest.raises(DomainError):
        phi(0.5, -0.5)
    # just inside the critical cone
    assert phi(0.9, -0.5) == pytest.approx(0.9 + 0.5 * np.sqrt(1 - 0.19 / 0.25), abs=1e-15)


# -- Snell ----------------------------------------------------------------


@pytest.mark.parametrize("kappa", [-2.0, -0.5])
def test_normal_incidence_passes_straight(kappa):
    z = np.array([0.0, 0.0, 1.0])
    assert np.allclose(snell_refract(z, z, kappa), z, atol=1e-15)


def test_snell_scalar_oracle():
    x = np.array([np.sin(0.2), 0.0, np.cos(0.2)])
    m = snell_refract(x, np.array([0.0, 0.0, 1.0]), MediumPair.from_kappa(-2.0))
    # sin(theta2) = sin(theta1) n1 / n2, refracted to the same side as x
    assert abs(m[0] - -0.0993346653975306077297063135592) < 1e-15
    assert abs(m[2] - 0.995054081068140052352176009402) < 1e-15
    assert m[1] == 0.0
    assert abs(np.linalg.norm(m) - 1.0) < 1e-12


def test_snell_rejects_backside():
    with pytest.raises(GeometryError):
        snell_refract([0, 0, 1.0], [0, 0, -1.0], -2.0)


def random_incidence(rng, kappa, n):
    nu = rng.normal(size=(n, 3))
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    # critical angle only exists for -1 < kappa < 0
    theta_max = np.pi / 2 if kappa < -1 else np.arccos(np.sqrt(1 - kappa * kappa))
    theta = rng.uniform(0, theta_max * 0.999, n)
    tmp = rng.normal(size=(n, 3))
    tan = tmp - np.sum(tmp * nu, axis=1, keepdims=True) * nu
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    x = np.cos(theta)[:, None] * nu + np.sin(theta)[:, None] * tan
    return x, nu


@pytest.mark.parametrize("kappa", [-3.0, -1.2, -0.8, -0.3])
def test_snell_invariants(rng, kappa):
    x, nu = random_incidence(rng, kappa, 5000)
    m = snell_refract(x, nu, kappa)
    assert np.max(np.abs(np.linalg.norm(m, axis=1) - 1)) < 1e-12
    assert np.max(np.abs(np.cross(x - kappa * m, nu))) < 1e-12

    def tan(v):
        return v - np.sum(v * nu, axis=1, keepdims=True) * nu

    assert np.max(np.abs(tan(x) - kappa * tan(m))) < 1e-12
    # negative index: refracted ray is on the same side of the normal as the incident one
    assert np.all(np.sum(tan(x) * tan(m), axis=1) <= 1e-15)


# -- Fresnel --------------------------------------------------------------


def test_psi_examples():
    assert fresnel_psi(1.0, MediumPair.from_kappa(-2.0, sigma=1.0)) == 0.0
    assert fresnel_psi(1.0, MediumPair.from_kappa(-0.7, sigma=1.0)) == 0.0
    assert fresnel_psi(1.0, MediumPair.from_kappa(-2.0, sigma=2.0)) == pytest.approx(1 / 9, abs=1e-15)
    assert fresnel_psi(-0.4, MediumPair.from_kappa(-2.0, sigma=1.0)) == pytest.approx(49 / 81, abs=1e-15)


def test_pq_values_at_normal_incidence():
    for kappa in (-2.0, -0.5):
        p, q = fresnel_pq(1.0, MediumPair.from_kappa(kappa, sigma=2.0))
        # p(1) = (sigma - 1)/(sigma + 1), q(1) = -p(1)
        assert p == pytest.approx(1 / 3, abs=1e-15) and q == pytest.approx(-1 / 3, abs=1e-15)


def test_transmission_examples():
    m = MediumPair.from_kappa(-2.0, sigma=2.0)
    z = np.array([0.0, 0.0, 1.0])
    assert fresnel_transmission(z, z, MediumPair.from_kappa(-2.0)) == 1.0
    assert fresnel_transmission(z, z, m) == pytest.approx(8 / 9, abs=1e-15)
    assert fresnel_transmission(z, [0.6, 0.0, 0.8], m, lossless=True) == 1.0


@given(
    kappa=kappas,
    sigma=st.floats(0.1, 10.0),
    alpha=st.floats(0.0, 1.0),
    eps=st.floats(1e-3, 0.5),
    u=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=50),
)
def test_conservation_bound_and_range(kappa, sigma, alpha, eps, u):
    medium = MediumPair.from_kappa(kappa, sigma, alpha)
    lo = medium.threshold + eps
    if lo >= 1.0:
        return
    try:
        bounds = fresnel_bound(medium, eps)
    except ConfigurationError:
        return  # C_eps >= 1 only on degenerate setups
    t = admissible_t(medium, eps, np.array(u))
    r = fresnel_psi(t, medium)
    tr = 1.0 - fresnel_psi(t, medium)
    assert np.all(np.abs(r + tr - 1.0) < 1e-12)
    assert np.all(r <= bounds.c_eps + 1e-12)
    assert np.all((r >= 0.0) & (r <= 1.0))


@given(kappa=kappas, sigma=st.floats(0.1, 10.0), eps=st.floats(1e-3, 0.3))
def test_pq_monotone(kappa, sigma, eps):
    medium = MediumPair.from_kappa(kappa, sigma)
    lo = medium.threshold + eps
    if lo >= 1.0:
        return
    t = np.linspace(lo, 1.0, 400)
    p, q = fresnel_pq(t, medium)
    sign = 1.0 if kappa < -1 else -1.0
    assert np.all(sign * np.diff(p) >= -1e-13)
    assert np.all(sign * np.diff(q) >= -1e-13)


def test_bound_examples():
    b = fresnel_bound(MediumPair.from_kappa(-2.0), 0.1)
    assert b.c_eps == pytest.approx(49 / 81, abs=1e-14)
    med = MediumPair.from_kappa(-0.5)
    assert fresnel_bound(med, 0.1).c_eps == pytest.approx(fresnel_psi(-0.4, med), abs=1e-14)
    # interval collapses to {1}: matched impedance reflects nothing
    assert fresnel_bound(med, 1.5).c_eps == 0.0


def test_bound_rejects_empty_interval():
    with pytest.raises(ConfigurationError):
        fresnel_bound(MediumPair.from_kappa(-0.5), 1.6)


def test_bound_uses_scan_when_interior_max():
    # large epsilon is fine either way; bound must dominate the dense scan
    med = MediumPair.from_kappa(-3.0, sigma=0.2, alpha=0.9)
    b = fresnel_bound(med, 0.05)
    t = np.linspace(b.left_endpoint, 1.0, 5000)
    assert np.max(fresnel_psi(t, med)) <= b.c_eps + 1e-6


# -- admissibility --------------------------------------------------------


def test_coincident_caps():
    cap = SphericalCap([0, 0, 1], 0.4)
    rep = check_admissible(AdmissibleSetup(MediumPair.from_kappa(-2.0), cap, cap, 0.1))
    assert rep.worst_dot == pytest.approx(0.696706709347165420920749981642, abs=1e-15)
    assert rep.margin == pytest.approx(1.19670670934716542092074998164, abs=1e-15)
    assert rep.passed
    assert angle_between(rep.extremal_source, rep.extremal_target) == pytest.approx(0.8)


def test_antipodal_caps_fail():
    a, b = SphericalCap([0, 0, 1], 0.1), SphericalCap([0, 0, -1], 0.1)
    with pytest.raises(AdmissibilityError) as err:
        check_admissible(AdmissibleSetup(MediumPair.from_kappa(-2.0), a, b, 0.01))
    assert err.value.report.worst_dot == -1.0
    assert not err.value.report.passed


def test_identical_tiny_caps_margin():
    cap = SphericalCap([0, 0, 1], 1e-9)
    med = MediumPair.from_kappa(-2.0)
    assert admissibility_margin(med, cap, cap) == pytest.approx(1.5)
    assert admissibility_margin(MediumPair.from_kappa(-0.5), cap, cap) == pytest.approx(1.5)


@given(
    a1=st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 0.2),
    a2=st.tuples(*[st.floats(-1, 1) for _ in range(3)]).filter(lambda v: np.linalg.norm(v) > 0.2),
    r1=st.floats(0.05, 1.2),
    r2=st.floats(0.05, 1.2),
)
def test_closed_form_min_dot_vs_sampling(a1, a2, r1, r2):
    from negrefract.sphere_geom import build_grid

    c1, c2 = SphericalCap(a1, r1), SphericalCap(a2, r2)
    closed = min_dot_over_caps(c1, c2)
    g1, g2 = build_grid(c1, 300), build_grid(c2, 300)
    sampled = np.min(g1.nodes @ g2.nodes.T)
    assert sampled >= closed - 1e-12
    rep = check_admissible(AdmissibleSetup(MediumPair.from_kappa(-2.0), c1, c2, 1e-3), raise_on_fail=False)
    # extremal pair lies in the caps and attains the closed form
    assert c1.contains(rep.extremal_source, tol=1e-9)
    assert c2.contains(rep.extremal_target, tol=1e-9)
    if closed > -1.0 + 1e-9:
        assert rep.extremal_source @ rep.extremal_target == pytest.approx(closed, abs=1e-9)
