"""Jacobian and Monge-Ampere diagnostics for smooth refractor charts.

Work in projected coordinates: a source direction is ``X = (x, sqrt(1 - |x|^2))``
with ``x`` in the unit disk, and the refractor is ``rho(x) X``. With ``z = rho``,
``p = D rho`` and ``q = p . x``:

    S = sqrt(z^2 + |p|^2 - q^2),   h = Phi(z / S) / S,   omega = 1 - h (z + q)

and the refracted direction is ``y = (omega x + h p, omega x_n) / kappa``.
Differentiating gives ``kappa Dy = B + C D^2 rho`` with

    B = omega I - 2h x (x) p + u (x) D_x h + h_z u (x) p
    C = u (x) D_p h - h (x (x) x - I),          u = p - (z + q) x

so ``det Dy = det C det(C^-1 B + D^2 rho) / kappa^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, GeometryError, SingularConfigurationError
from .optics import MediumPair, phi, transmission_from_dot
from .sphere_geom import lift_from_plane

N_DIM = 3
DEFAULT_H_FD = 1e-4
DET_C_MIN = 1e-12
CROSSCHECK_TOL = 1e-8


# -- radial fields over the projected disk ---------------------------------


class RadialField:
    """Smooth radial function ``rho(x)`` on the projected disk.

    Subclasses implement ``value``; ``grad`` / ``hess`` fall back to central
    differences when no closed form is available.
    """

    fd_step = 1e-5

    def value(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return fd_gradient(self.value, x, self.fd_step)

    def hess(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return fd_hessian(self.value, x, self.fd_step)

    analytic = False


class CallableField(RadialField):
    def __init__(self, fn, fd_step: float = 1e-5):
        self._fn = fn
        self.fd_step = fd_step

    def value(self, x) -> float:
        return float(self._fn(np.asarray(x, dtype=float)))


class QuadricField(RadialField):
    """``b / (1 - kappa m . X(x))`` with closed-form derivatives."""

    analytic = True

    def __init__(self, m, b: float, kappa: float):
        self.m = np.asarray(m, dtype=float)
        self.b = float(b)
        self.kappa = float(kappa)

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        X = lift_from_plane(x)
        xn = X[-1]
        d = 1.0 - self.kappa * float(self.m @ X)
        a = self.m[:-1] - self.m[-1] * x / xn
        return x, xn, d, a

    def value(self, x) -> float:
        _, _, d, _ = self._parts(x)
        if d <= 0.0:
            raise GeometryError("inadmissible pair: 1 - kappa m.x <= 0")
        return self.b / d

    def grad(self, x) -> np.ndarray:
        _, _, d, a = self._parts(x)
        return self.b * self.kappa * a / d**2

    def hess(self, x) -> np.ndarray:
        x, xn, d, a = self._parts(x)
        da = -self.m[-1] * (np.eye(len(x)) / xn + np.outer(x, x) / xn**3)
        k = self.kappa
        return self.b * k * (da / d**2 + 2.0 * k * np.outer(a, a) / d**3)


class PerturbedField(RadialField):
    """``base(x) * (1 + amplitude * exp(-|x - center|^2 / (2 width^2)))``."""

    analytic = True

    def __init__(self, base: RadialField, amplitude: float, center, width: float):
        self.base = base
        self.amplitude = float(amplitude)
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)

    def _bump(self, x):
        d = np.asarray(x, dtype=float) - self.center
        w2 = self.width**2
        e = np.exp(-float(d @ d) / (2.0 * w2))
        grad = -e * d / w2
        hess = e * (np.outer(d, d) / w2**2 - np.eye(len(d)) / w2)
        return e, grad, hess

    def value(self, x) -> float:
        e, _, _ = self._bump(x)
        return self.base.value(x) * (1.0 + self.amplitude * e)

    def grad(self, x) -> np.ndarray:
        e, ge, _ = self._bump(x)
        a = self.amplitude
        return self.base.grad(x) * (1.0 + a * e) + self.base.value(x) * a * ge

    def hess(self, x) -> np.ndarray:
        e, ge, he = self._bump(x)
        a = self.amplitude
        r, g, H = self.base.value(x), self.base.grad(x), self.base.hess(x)
        return H * (1.0 + a * e) + a * (np.outer(g, ge) + np.outer(ge, g)) + r * a * he


def fd_gradient(fn, x, step: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty(len(x))
    for k in range(len(x)):
        e = np.zeros(len(x))
        e[k] = step
        out[k] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return out


def fd_hessian(fn, x, step: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    H = np.empty((n, n))
    f0 = fn(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        H[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / step**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            H[i, j] = H[j, i] = (
                fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)
            ) / (4.0 * step * step)
    return H


# -- pointwise formulas ----------------------------------------------------


def _s_value(x, z, p):
    q = float(p @ x)
    rad = z * z + float(p @ p) - q * q
    if rad <= 0.0:
        raise SingularConfigurationError("graph chart is singular: z^2 + |p|^2 - (p.x)^2 <= 0")
    return np.sqrt(rad), q


def h_func(x, z: float, p, kappa: float) -> float:
    """``Phi(z / S) / S``: the Snell multiplier rescaled to the unnormalized normal."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    S, _ = _s_value(x, z, p)
    return phi(z / S, kappa) / S


def omega_func(x, z: float, p, kappa: float) -> float:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    return 1.0 - h_func(x, z, p, kappa) * (z + float(p @ x))


def normal_from_graph(x, rho: float, Drho) -> np.ndarray:
    """Unit normal to ``rho(X) X`` from the chart, oriented so ``X . nu > 0``."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(Drho, dtype=float)
    q = float(p @ x)
    if rho + q == 0.0:
        raise SingularConfigurationError("graph chart is singular: rho + Drho.x = 0")
    S, _ = _s_value(x, rho, p)
    xn = np.sqrt(1.0 - float(x @ x))
    nu = np.concatenate([(rho + q) * x - p, [xn * (rho + q)]]) / S
    X = np.concatenate([x, [xn]])
    return nu if nu @ X > 0.0 else -nu


def refracted_direction(x, z: float, p, kappa: float) -> np.ndarray:
    """Full refracted direction ``Y`` for chart data ``(x, rho, D rho)``."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    h = h_func(x, z, p, kappa)
    om = 1.0 - h * (z + float(p @ x))
    xn = np.sqrt(1.0 - float(x @ x))
    return np.concatenate([(om * x + h * p) / kappa, [om * xn / kappa]])


def refracted_map(field: RadialField, x, kappa: float) -> np.ndarray:
    """Projected refracted direction ``y(x)`` (first ``n - 1`` components)."""
    x = np.asarray(x, dtype=float)
    return refracted_direction(x, field.value(x), field.grad(x), kappa)[:-1]


def _partial_step(v: float) -> float:
    return 1e-6 * (1.0 + abs(v))


def h_partials(x, z: float, p, kappa: float):
    """Central-difference partials ``(D_x h, h_z, D_p h)``."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    n = len(x)
    Dx = np.empty(n)
    Dp = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        s = _partial_step(x[k])
        e[k] = s
        Dx[k] = (h_func(x + e, z, p, kappa) - h_func(x - e, z, p, kappa)) / (2.0 * s)
        s = _partial_step(p[k])
        e[k] = s
        Dp[k] = (h_func(x, z, p + e, kappa) - h_func(x, z, p - e, kappa)) / (2.0 * s)
    s = _partial_step(z)
    hz = (h_func(x, z + s, p, kappa) - h_func(x, z - s, p, kappa)) / (2.0 * s)
    return Dx, hz, Dp


@dataclass(frozen=True)
class MAWorkspace:
    x: np.ndarray
    rho: float
    Drho: np.ndarray
    D2rho: np.ndarray
    h: float
    omega: float
    Dx_h: np.ndarray
    h_z: float
    Dp_h: np.ndarray
    B: np.ndarray
    C: np.ndarray
    C_inv: np.ndarray
    det_C: float
    det_C_direct: float
    kappa: float

    @property
    def operator(self) -> np.ndarray:
        """``C^-1 B + D^2 rho``."""
        return self.C_inv @ self.B + self.D2rho

    @property
    def det_Dy(self) -> float:
        n1 = len(self.x)
        return self.det_C * float(np.linalg.det(self.operator)) / self.kappa**n1


def assemble_B_C(x, z, p, h, Dx_h, h_z, Dp_h):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    n = len(x)
    q = float(p @ x)
    om = 1.0 - h * (z + q)
    u = p - (z + q) * x
    B = om * np.eye(n) - 2.0 * h * np.outer(x, p) + np.outer(u, Dx_h) + h_z * np.outer(u, p)
    C = np.outer(u, Dp_h) - h * (np.outer(x, x) - np.eye(n))
    return B, C


def det_C_closed(x, z, p, h, Dp_h) -> float:
    """``h^(n-1) (1 - |x|^2) (1 - v . D_p h)`` with ``v = (z x / (1 - |x|^2) - p) / h``."""
    x = np.asarray(x, dtype=float)
    r = 1.0 - float(x @ x)
    v = (z * x / r - np.asarray(p, dtype=float)) / h
    return h ** len(x) * r * (1.0 - float(v @ Dp_h))


def C_inverse(x, z, p, h, Dp_h) -> np.ndarray:
    """Sherman-Morrison inverse of ``C``: ``(I + v (x) w / (1 - v . w)) (I + x (x) x / (1 - |x|^2)) / h``."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    r = 1.0 - float(x @ x)
    v = (z * x / r - np.asarray(p, dtype=float)) / h
    w = np.asarray(Dp_h, dtype=float)
    N = np.eye(n) + np.outer(v, w) / (1.0 - float(v @ w))
    return N @ (np.eye(n) + np.outer(x, x) / r) / h


def _check_margin(x, h_fd: float, domain_radius: float):
    if np.linalg.norm(x) + 2.0 * h_fd >= domain_radius:
        raise GeometryError(
            f"point {np.asarray(x).tolist()} is within 2*h_fd of the projected domain boundary"
        )


def build_ma_workspace(
    x,
    field: RadialField,
    medium: MediumPair | float,
    h_fd: float = DEFAULT_H_FD,
    derivatives: str = "fd",
    domain_radius: float = 1.0,
) -> MAWorkspace:
    """Assemble ``h, omega, B, C, C^-1`` and both forms of ``det C`` at ``x``.

    ``derivatives="fd"`` differentiates ``rho`` with central differences of
    step ``h_fd``; ``"analytic"`` uses the field's own ``grad`` / ``hess``.
    """
    kappa = medium.kappa if isinstance(medium, MediumPair) else float(medium)
    x = np.asarray(x, dtype=float)
    _check_margin(x, h_fd, domain_radius)
    z = field.value(x)
    if derivatives == "fd":
        p = fd_gradient(field.value, x, h_fd)
        H = fd_hessian(field.value, x, h_fd)
    elif derivatives == "analytic":
        p, H = field.grad(x), field.hess(x)
    else:
        raise ValueError(f"unknown derivative mode {derivatives!r}")
    h = h_func(x, z, p, kappa)
    om = 1.0 - h * (z + float(p @ x))
    if not (np.isfinite(h) and np.isfinite(om)):
        raise DegenerateError("h or omega is not finite")
    Dx_h, h_z, Dp_h = h_partials(x, z, p, kappa)
    B, C = assemble_B_C(x, z, p, h, Dx_h, h_z, Dp_h)
    det_closed = det_C_closed(x, z, p, h, Dp_h)
    det_direct = float(np.linalg.det(C))
    if abs(det_closed) < DET_C_MIN:
        raise DegenerateError(f"det C = {det_closed:.3g} is degenerate")
    if abs(det_closed - det_direct) > CROSSCHECK_TOL * abs(det_closed):
        raise DegenerateError(
            f"closed-form det C {det_closed:.12g} disagrees with direct {det_direct:.12g}"
        )
    return MAWorkspace(
        x=x, rho=z, Drho=p, D2rho=H, h=h, omega=om, Dx_h=Dx_h, h_z=h_z, Dp_h=Dp_h,
        B=B, C=C, C_inv=C_inverse(x, z, p, h, Dp_h), det_C=det_closed,
        det_C_direct=det_direct, kappa=kappa,
    )


def fd_map_jacobian(field: RadialField, x, kappa: float, h_fd: float) -> np.ndarray:
    """``Dy`` by central differences of the explicit refracted map."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    J = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h_fd
        J[:, k] = (refracted_map(field, x + e, kappa) - refracted_map(field, x - e, kappa)) / (2.0 * h_fd)
    return J


@dataclass
class MAPointResult:
    x: np.ndarray
    det_Dy_fd: float
    det_Dy_closed: float
    relative_discrepancy: float
    operator_det: float
    operator_scale: float
    operator_residual: float
    inequality_lhs: float | None = None
    inequality_rhs: float | None = None


@dataclass
class MAReport:
    points: list
    h_fd: float

    def _arr(self, name):
        return np.array([getattr(p, name) for p in self.points], dtype=float)

    @property
    def max_relative_discrepancy(self) -> float:
        return float(np.max(self._arr("relative_discrepancy")))

    @property
    def max_operator_residual(self) -> float:
        return float(np.max(self._arr("operator_residual")))

    def inequality_ratios(self) -> np.ndarray | None:
        if self.points[0].inequality_rhs is None:
            return None
        return self._arr("inequality_lhs") / self._arr("inequality_rhs")

    def as_dict(self) -> dict:
        rel = self._arr("relative_discrepancy")
        op = self._arr("operator_residual")
        out = {
            "h_fd": self.h_fd,
            "points": len(self.points),
            "jacobian_discrepancy": {
                "max": float(rel.max()),
                "mean": float(rel.mean()),
                "q95": float(np.quantile(rel, 0.95)),
            },
            "operator_residual": {
                "max": float(op.max()),
                "mean": float(op.mean()),
                "q95": float(np.quantile(op, 0.95)),
            },
        }
        ratios = self.inequality_ratios()
        if ratios is not None:
            out["inequality_ratio"] = {"min": float(ratios.min()), "max": float(ratios.max())}
        return out


def inequality_bound(ws: MAWorkspace, f_val: float, g_val: float, t_val: float) -> float:
    """Largest ``|det(C^-1 B + D^2 rho)|`` allowed by energy conservation at the point."""
    n = len(ws.x) + 1
    return f_val * t_val * abs(ws.kappa) ** (n - 2) * abs(ws.omega) / (g_val * abs(ws.det_C))


def ma_jacobian_check(
    field: RadialField,
    medium: MediumPair,
    points,
    h_fd: float = DEFAULT_H_FD,
    f=None,
    g=None,
    lossless: bool = False,
    derivatives: str = "fd",
    domain_radius: float = 1.0,
    g_at_source=None,
) -> MAReport:
    """Compare ``det Dy`` from finite differences of ``y(x)`` with the closed form.

    ``f(X)`` and ``g(Y)`` are optional callables on unit directions; when both
    are given, each point also reports the energy inequality's two sides.
    ``g_at_source(x)`` may replace ``g`` when the target density is known as a
    function of the projected source point (see :func:`pushforward_density`).
    """
    kappa = medium.kappa
    results = []
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        ws = build_ma_workspace(x, field, medium, h_fd, derivatives, domain_radius)
        lhs = float(np.linalg.det(fd_map_jacobian(field, x, kappa, h_fd)))
        op = ws.operator
        rhs = ws.det_Dy
        scale = max(np.linalg.norm(ws.C_inv @ ws.B), np.linalg.norm(ws.D2rho))
        op_det = float(np.linalg.det(op))
        denom = max(abs(lhs), abs(rhs))
        rel = abs(lhs - rhs) / denom if denom > 0.0 else 0.0
        res = MAPointResult(
            x=x, det_Dy_fd=lhs, det_Dy_closed=rhs, relative_discrepancy=rel,
            operator_det=op_det, operator_scale=scale,
            operator_residual=abs(op_det) / scale**2 if scale > 0.0 else 0.0,
        )
        if f is not None and (g is not None or g_at_source is not None):
            X = lift_from_plane(x)
            Y = refracted_direction(x, ws.rho, ws.Drho, kappa)
            t = float(transmission_from_dot(float(X @ Y), medium, lossless))
            g_val = float(g(Y)) if g is not None else float(g_at_source(x))
            res.inequality_lhs = abs(op_det)
            res.inequality_rhs = inequality_bound(ws, float(f(X)), g_val, t)
        results.append(res)
    return MAReport(points=results, h_fd=h_fd)


def pushforward_density(field: RadialField, medium: MediumPair, f, lossless: bool = False, h_fd: float = 1e-5):
    """Target density ``g`` at ``T(x)`` that makes energy balance exact at ``x``.

    Returns a callable of ``x`` (projected source point); from
    ``f t dS(X) = g dS(Y)`` with ``dS(X) = dx / x_n`` and ``dS(Y) = dy / |y_n|``.
    """
    kappa = medium.kappa

    def g_at(x):
        x = np.asarray(x, dtype=float)
        X = lift_from_plane(x)
        Y = refracted_direction(x, field.value(x), field.grad(x), kappa)
        t = float(transmission_from_dot(float(X @ Y), medium, lossless))
        det = float(np.linalg.det(fd_map_jacobian(field, x, kappa, h_fd)))
        return float(f(X)) * t * abs(Y[-1]) / (abs(det) * X[-1])

    return g_at
