"""Catalog of statistical families, their Fisher metrics and closed forms.

Each family is a :class:`FamilyDescriptor` working on flat chart
coordinates ``theta`` (a 1-D float array). Closed-form operations live in
the descriptor's ``ops`` table; the keys present there are the family's
capabilities, and asking for a missing one raises :class:`CapabilityError`.

Charts used by the registry:

==================  ==============================================
family              theta
==================  ==============================================
exponential         (rate,)
rayleigh            (sigma^2,)
categorical(d)      (p_1, ..., p_{d-1}); p_d = 1 - sum
normal1d            (mu, sigma)
cauchy, student(k)  (location, scale)
mvn(d)              (mu, vech(Sigma))
mggd(k,d), mtd(k,d) (m, vech(V))
centered-mvn(d)     vech(Sigma)
spd(d), wishart(n)  vech(P)
==================  ==============================================

``vech`` lists the upper triangle row by row (see :func:`fisherrao.spd.vech`).
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from . import spd as S
from .errors import CapabilityError, DomainError, InvalidInput, NumericalFailure
from .manifold import MetricField

CAPABILITY_OF_OP = {
    "distance": "closed_distance",
    "geodesic": "closed_geodesic",
    "pregeodesic": "closed_pregeodesic",
    "jeffreys": "jeffreys_divergence",
    "kl": "kl_divergence",
    "potential": "hessian_potential",
    "axis_distance": "per_axis_1d_distance",
}
OP_OF_CAPABILITY = {v: k for k, v in CAPABILITY_OF_OP.items()}

SIMPLEX_TOL = 1e-12
LOAD_SYM_TOL = 1e-9


# ---------------------------------------------------------------------------
# descriptors and constants


@dataclass(frozen=True)
class LocationScaleConstants:
    """Fisher constants of an even location-scale family: ``G = diag(4a, 4b-1)/s^2``."""

    a_tab: float
    b_tab: float
    c_tab: float = 0.0

    def __post_init__(self):
        if not (4 * self.a_tab > 0 and 4 * self.b_tab - 1 > 0):
            raise InvalidInput("location-scale constants need 4a > 0 and 4b - 1 > 0")

    @property
    def A(self) -> float:
        return 2.0 * math.sqrt(self.a_tab)

    @property
    def B(self) -> float:
        return math.sqrt(4.0 * self.b_tab - 1.0)


NORMAL_CONSTANTS = LocationScaleConstants(0.25, 0.75)
CAUCHY_CONSTANTS = LocationScaleConstants(0.125, 0.375)


def student_constants(k: float) -> LocationScaleConstants:
    if not k > 0:
        raise InvalidInput("degrees of freedom must be positive")
    return LocationScaleConstants((k + 1) / (4 * (k + 3)), 3 * (k + 1) / (4 * (k + 3)))


@dataclass(frozen=True)
class EllipticalConstants:
    """Constants ``(a, b)`` of the elliptical length element in dimension ``d``.

    ``ds^2 = 4a dm^T V^-1 dm + 2b tr((V^-1 dV)^2) + (4b-1)/4 tr^2(V^-1 dV)``.
    The quadratic form is positive definite iff ``a > 0``, ``b > 0`` and
    ``2b + d(4b-1)/4 > 0`` (the last one is the pure-dilation direction).
    """

    d: int
    a: float
    b: float

    def __post_init__(self):
        if self.d < 1:
            raise InvalidInput("dimension must be >= 1")
        if not (4 * self.a > 0 and 2 * self.b > 0 and 2 * self.b + self.d * (4 * self.b - 1) / 4 > 0):
            raise InvalidInput("elliptical constants do not give a positive-definite metric")


def mvn_constants(d: int) -> EllipticalConstants:
    return EllipticalConstants(int(d), 0.25, 0.25)


def _check_kd(k, d):
    if not (isinstance(d, (int, np.integer)) or float(d).is_integer()) or d < 1:
        raise InvalidInput("d must be a positive integer")
    if not (math.isfinite(k) and k >= 1):
        raise InvalidInput("shape parameter k must be >= 1")
    return float(k), int(d)


def mggd_constants(k, d) -> EllipticalConstants:
    """Generalized Gaussian constants; ``a`` is evaluated through log-gamma."""
    k, d = _check_kd(k, d)
    log_a = 2 * math.log(k) + gammaln(2 + d / (2 * k) - 1 / k) - gammaln(d / (2 * k)) \
        - math.log(2) / k - math.log(d)
    return EllipticalConstants(d, math.exp(log_a), (d + 2 * k) / (4 * d + 8))


def mtd_constants(k, d) -> EllipticalConstants:
    """Multivariate t constants ``a = b = (k+d)/(4(k+d+2))``."""
    k, d = _check_kd(k, d)
    c = (k + d) / (4 * (k + d + 2))
    return EllipticalConstants(d, c, c)


@dataclass(frozen=True)
class BregmanGenerator:
    """Convex potential ``F`` on a chart ``xi`` with its gradient and Hessian.

    ``to_xi`` maps family coordinates into the potential's chart.
    """

    F: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    contains: Optional[Callable[[np.ndarray], bool]] = None
    to_xi: Callable[[np.ndarray], np.ndarray] = lambda th: np.asarray(th, dtype=float)

    def check(self, xi) -> np.ndarray:
        x = np.atleast_1d(np.asarray(xi, dtype=float))
        if not np.all(np.isfinite(x)) or (self.contains is not None and not self.contains(x)):
            raise DomainError("point lies outside the potential's chart")
        return x

    def bregman(self, x1, x2) -> float:
        x1, x2 = self.check(x1), self.check(x2)
        return float(self.F(x1) - self.F(x2) - (x1 - x2) @ self.grad(x2))

    def jeffreys_bregman(self, x1, x2) -> float:
        x1, x2 = self.check(x1), self.check(x2)
        return float((x2 - x1) @ (self.grad(x2) - self.grad(x1)))


@dataclass(frozen=True)
class FamilyDescriptor:
    """A statistical family in a fixed chart together with its closed forms."""

    name: str
    dim: int
    metric: MetricField
    ops: dict
    constants: object = None
    parse: Callable = None
    format: Callable = None
    box_domain: bool = False
    notes: dict = field(default_factory=dict, compare=False)
    raw_ops: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def capabilities(self) -> frozenset:
        return frozenset(CAPABILITY_OF_OP[k] for k in self.ops if k in CAPABILITY_OF_OP)

    def has(self, name: str) -> bool:
        return OP_OF_CAPABILITY.get(name, name) in self.ops

    def op(self, name: str):
        key = OP_OF_CAPABILITY.get(name, name)
        try:
            return self.ops[key]
        except KeyError:
            raise CapabilityError(f"family {self.name!r} does not provide {name!r}") from None

    require = op

    def contains(self, theta) -> bool:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        if th.shape != (self.dim,) or not np.all(np.isfinite(th)):
            return False
        return self.metric.contains is None or bool(self.metric.contains(th))

    def check(self, theta) -> np.ndarray:
        return self.metric.check(theta)

    def distance(self, theta0, theta1) -> float:
        return self.op("distance")(self.check(theta0), self.check(theta1))

    def geodesic(self, theta0, theta1, t) -> np.ndarray:
        return self.op("geodesic")(self.check(theta0), self.check(theta1), t)

    def load(self, record) -> np.ndarray:
        if self.parse is None:
            return self.check(record)
        return self.check(self.parse(record))

    def dump(self, theta):
        th = self.check(theta)
        return th.tolist() if self.format is None else self.format(th)


def _make(name, dim, metric, ops, **kw) -> FamilyDescriptor:
    checked = {}
    for key, fn in ops.items():
        if key in ("distance", "jeffreys", "kl", "bhattacharyya", "geodesic", "pregeodesic"):
            checked[key] = _checked_pair(fn, metric.check)
        elif key == "axis_distance":
            checked[key] = _checked_axis(fn, metric.check)
        else:
            checked[key] = fn
    # raw_ops skip input validation; for callers that already validated the points
    return FamilyDescriptor(name, dim, metric, checked, raw_ops=dict(ops), **kw)


def _checked_pair(fn, check):
    def f(theta0, theta1, *rest):
        return fn(check(theta0), check(theta1), *rest)

    f.__doc__ = fn.__doc__
    return f


def _checked_axis(fn, check):
    def f(theta, i, lo, hi):
        th = check(theta)
        if not 0 <= i < th.shape[0]:
            raise InvalidInput(f"axis {i} out of range")
        return fn(th, int(i), float(lo), float(hi))

    f.__doc__ = fn.__doc__
    return f


# ---------------------------------------------------------------------------
# generic 1-D and product machinery


def distance_1d(h_antideriv: Callable[[float], float], theta0: float, theta1: float) -> float:
    """Fisher-Rao distance of a 1-D model from an antiderivative of ``sqrt(g_11)``."""
    return abs(float(h_antideriv(theta1)) - float(h_antideriv(theta0)))


def quadrature_antiderivative(sqrt_g: Callable[[float], float], base: float,
                              tol: float = 1e-12) -> Callable[[float], float]:
    """Antiderivative ``h(x) = int_base^x sqrt_g`` evaluated by adaptive quadrature."""

    def h(x):
        val, _ = integrate.quad(sqrt_g, base, x, epsabs=tol, epsrel=tol, limit=200)
        return val

    return h


def product_distance(per_factor: Sequence[float]) -> float:
    """``sqrt(sum rho_i^2)``: distance on a product of independent models."""
    vals = np.asarray(list(per_factor), dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise InvalidInput("need at least one factor distance")
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InvalidInput("factor distances must be finite and nonnegative")
    return float(np.sqrt(np.sum(vals ** 2)))


def separable_bregman_distance(h_list, theta, theta_p) -> float:
    """Distance of a separable Hessian metric: ``sqrt(sum (h_i(theta_i) - h_i(theta'_i))^2)``."""
    a, b = np.atleast_1d(np.asarray(theta, float)), np.atleast_1d(np.asarray(theta_p, float))
    if not (len(h_list) == a.size == b.size):
        raise InvalidInput("need one antiderivative per coordinate")
    return math.sqrt(sum((float(h(x)) - float(h(y))) ** 2 for h, x, y in zip(h_list, a, b)))


def _invert_monotone(h, target, lo, hi):
    """Solve ``h(x) = target`` on a bracket grown outward from ``[lo, hi]``."""
    if lo == hi:
        return lo
    lo, hi = min(lo, hi), max(lo, hi)
    g = lambda x: float(h(x)) - target
    glo, ghi = g(lo), g(hi)
    width = hi - lo
    for _ in range(60):
        if glo == 0:
            return lo
        if ghi == 0:
            return hi
        if glo * ghi < 0:
            return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        width *= 2
        if abs(glo) < abs(ghi):
            lo -= width
            glo = g(lo)
        else:
            hi += width
            ghi = g(hi)
        if not (math.isfinite(glo) and math.isfinite(ghi)):
            break
    raise NumericalFailure("antiderivative is not invertible on the requested range")


def quasi_arithmetic_geodesic(h_list, theta, theta_p, t: float) -> np.ndarray:
    """Coordinate-wise quasi-arithmetic mean ``h_i^-1((1-t) h_i(theta_i) + t h_i(theta'_i))``."""
    a, b = np.atleast_1d(np.asarray(theta, float)), np.atleast_1d(np.asarray(theta_p, float))
    if not (len(h_list) == a.size == b.size):
        raise InvalidInput("need one antiderivative per coordinate")
    out = np.empty_like(a)
    for i, (h, x, y) in enumerate(zip(h_list, a, b)):
        hx, hy = float(h(x)), float(h(y))
        if x == y:
            out[i] = x
            continue
        if hx == hy:
            raise NumericalFailure("antiderivative is not strictly monotone")
        out[i] = _invert_monotone(h, (1 - t) * hx + t * hy, x, y)
    return out


def scale_family_distance(s0: float, s1: float) -> float:
    """``|log(s1/s0)|``, the distance of the exponential and Rayleigh scale families."""
    s0, s1 = float(s0), float(s1)
    if not (s0 > 0 and s1 > 0):
        raise DomainError("scale parameters must be positive")
    return abs(math.log(s1 / s0))


# ---------------------------------------------------------------------------
# hyperbolic plane


def _half_plane(z) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("point is not in the upper half plane")
    return z


def poincare_distance(z0, z1) -> float:
    """Distance in the upper half plane with metric ``(dx^2 + dy^2)/y^2``.

    ``arccosh(1 + chi)`` is evaluated as ``2 asinh(sqrt(chi/2))`` for accuracy
    at short range.
    """
    z0, z1 = _half_plane(z0), _half_plane(z1)
    chi = abs(z1 - z0) ** 2 / (2 * z0.imag * z1.imag)
    return 2.0 * math.asinh(math.sqrt(chi / 2.0))


def hyperbolic_geodesic(z0, z1, t: float) -> complex:
    """Arclength-parameterized geodesic of the upper half plane.

    The Cayley map ``w = (z - z0)/(z - conj(z0))`` sends ``z0`` to the centre
    of the unit disk, where geodesics through the centre are radii.
    """
    z0, z1 = _half_plane(z0), _half_plane(z1)
    if z0 == z1 or t == 0:
        return z0
    w1 = (z1 - z0) / (z1 - z0.conjugate())
    r = abs(w1)
    w = math.tanh(t * math.atanh(r)) * (w1 / r)
    return (z0 - w * z0.conjugate()) / (1 - w)


def location_scale_distance(k: LocationScaleConstants, p0, p1) -> float:
    """Fisher-Rao distance of an even location-scale family.

    With ``A = 2 sqrt(a_tab)`` and ``B = sqrt(4 b_tab - 1)`` the metric
    ``diag(A^2, B^2)/s^2`` is ``B^2`` times the Poincare metric in the chart
    ``((A/B) l, s)``.
    """
    if k.c_tab != 0:
        raise CapabilityError("closed form needs an even standard density (c_tab = 0)")
    (l0, s0), (l1, s1) = p0, p1
    if not (s0 > 0 and s1 > 0):
        raise DomainError("scale parameters must be positive")
    r = k.A / k.B
    return k.B * poincare_distance(complex(r * l0, s0), complex(r * l1, s1))


def location_scale_geodesic(k: LocationScaleConstants, p0, p1, t: float) -> np.ndarray:
    if k.c_tab != 0:
        raise CapabilityError("closed form needs an even standard density (c_tab = 0)")
    r = k.A / k.B
    z = hyperbolic_geodesic(complex(r * p0[0], p0[1]), complex(r * p1[0], p1[1]), t)
    return np.array([z.real / r, z.imag])


# ---------------------------------------------------------------------------
# simplex


def as_simplex(p, tol: float = SIMPLEX_TOL) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if q.ndim != 1 or q.size < 2:
        raise InvalidInput("a categorical distribution needs at least two probabilities")
    if not np.all(np.isfinite(q)) or np.any(q <= 0):
        raise InvalidInput("probabilities must be strictly positive")
    if abs(float(q.sum()) - 1.0) > tol:
        raise InvalidInput("probabilities must sum to 1")
    return q


def bhattacharyya_coefficient(p, q) -> float:
    p, q = as_simplex(p), as_simplex(q)
    if p.shape != q.shape:
        raise InvalidInput("simplex points have different sizes")
    return float(min(1.0, max(-1.0, np.sum(np.sqrt(p * q)))))


def categorical_fisher_rao(p, q) -> float:
    """``2 arccos(sum sqrt(p_i q_i))`` via the square-root embedding on a sphere."""
    return 2.0 * math.acos(bhattacharyya_coefficient(p, q))


def categorical_hellinger(p, q) -> float:
    """``sqrt(1 - sum sqrt(p_i q_i))``."""
    return math.sqrt(max(0.0, 1.0 - bhattacharyya_coefficient(p, q)))


def categorical_geodesic(p, q, t: float) -> np.ndarray:
    """Great-circle interpolation of ``sqrt(p)`` and ``sqrt(q)``, squared back."""
    p, q = as_simplex(p), as_simplex(q)
    u, v = np.sqrt(p), np.sqrt(q)
    c = bhattacharyya_coefficient(p, q)
    w = math.acos(c)
    if w < 1e-8:
        x = (1 - t) * u + t * v
    else:
        x = (math.sin((1 - t) * w) * u + math.sin(t * w) * v) / math.sin(w)
    x = x * x
    return x / x.sum()


# ---------------------------------------------------------------------------
# SPD and elliptical helpers


def split_mean_scale(theta, d: int) -> tuple[np.ndarray, np.ndarray]:
    th = np.asarray(theta, dtype=float)
    return th[:d].copy(), S.unvech(th[d:], d)


def join_mean_scale(m, V) -> np.ndarray:
    return np.concatenate([np.atleast_1d(np.asarray(m, float)), S.vech(V)])


def _spd_ok(V) -> bool:
    try:
        np.linalg.cholesky(V)
        return True
    except np.linalg.LinAlgError:
        return False


def _trace_metric(V, E, scale=1.0, extra=0.0):
    """``scale * 1/2 tr(V^-1 E_a V^-1 E_b) + extra * tr(V^-1 E_a) tr(V^-1 E_b)``."""
    Vi = np.linalg.inv(V)
    W = np.einsum("ij,ajk->aik", Vi, E)
    G = 0.5 * scale * np.einsum("aij,bji->ab", W, W)
    if extra:
        tr = np.einsum("aii->a", W)
        G = G + extra * np.outer(tr, tr)
    return G


def mahalanobis(m0, m1, V) -> float:
    """``sqrt((m0 - m1)^T V^-1 (m0 - m1))``."""
    V = S.as_spd(V)
    dm = np.atleast_1d(np.asarray(m0, float)) - np.atleast_1d(np.asarray(m1, float))
    if dm.shape != (V.shape[0],):
        raise InvalidInput("mean and scale dimensions differ")
    L = np.linalg.cholesky(V)
    y = np.linalg.solve(L, dm)
    return float(np.linalg.norm(y))


def elliptical_length_element(k: EllipticalConstants, at, dm, dV) -> float:
    """Length element of an elliptical family at ``at = (m, V)``."""
    m, V = at
    V = S.as_spd(V)
    d = V.shape[0]
    dm = np.atleast_1d(np.asarray(dm, float))
    dV = S.as_sym(dV)
    if d != k.d or dm.shape != (d,) or dV.shape != (d, d) or np.size(m) != d:
        raise InvalidInput("dimension mismatch in elliptical length element")
    Vi = np.linalg.inv(V)
    X = Vi @ dV
    q = 4 * k.a * float(dm @ Vi @ dm) + 2 * k.b * float(np.trace(X @ X)) \
        + (4 * k.b - 1) / 4 * float(np.trace(X)) ** 2
    return math.sqrt(max(q, 0.0))


def elliptical_length_elements(k: EllipticalConstants, ms, Vs, dms, dVs) -> np.ndarray:
    """Batched :func:`elliptical_length_element` over stacks of points and displacements."""
    V = np.asarray(Vs, float)
    dm, dV = np.asarray(dms, float), np.asarray(dVs, float)
    W = np.linalg.solve(V, np.concatenate([dm[..., None], dV], axis=2))
    y, X = W[:, :, 0], W[:, :, 1:]
    tr = np.einsum("nii->n", X)
    q = 4 * k.a * np.einsum("ni,ni->n", dm, y) + 2 * k.b * np.einsum("nij,nji->n", X, X) \
        + (4 * k.b - 1) / 4 * tr * tr
    return np.sqrt(np.maximum(q, 0.0))


def elliptical_chord_lengths(k: EllipticalConstants, ms, Vs) -> np.ndarray:
    """Left-point length elements of consecutive samples ``(m_i, V_i)``, batched.

    Entry ``i`` is ``elliptical_length_element(k, (m_i, V_i), m_{i+1} - m_i, V_{i+1} - V_i)``.
    """
    ms, Vs = np.asarray(ms, float), np.asarray(Vs, float)
    return elliptical_length_elements(k, ms[:-1], Vs[:-1], np.diff(ms, axis=0), np.diff(Vs, axis=0))


def elliptical_fixed_location_geodesic(V0, V1, t: float) -> np.ndarray:
    """Scale geodesic of any elliptical family with the location held fixed.

    It solves ``V'' - V' V^-1 V' = 0`` with the boundary values, which is the
    same curve as the affine-invariant SPD geodesic for every generator.
    """
    return S.spd_geodesic(V0, V1, t)


def mvn_kl(p0, p1) -> float:
    (m0, V0), (m1, V1) = p0, p1
    d = V0.shape[0]
    L1 = np.linalg.cholesky(V1)
    A = np.linalg.solve(L1, V0)
    A = np.linalg.solve(L1, A.T)
    y = np.linalg.solve(L1, m1 - m0)
    logdet = 2 * np.sum(np.log(np.diag(L1))) - 2 * np.sum(np.log(np.diag(np.linalg.cholesky(V0))))
    return 0.5 * float(np.trace(A) + y @ y - d + logdet)


def mvn_jeffreys(p0, p1) -> float:
    """Jeffreys divergence ``KL(p0:p1) + KL(p1:p0)`` of two normal distributions.

    ``1/2 tr(S1^-1 S0 + S0^-1 S1) - d + 1/2 dm^T (S0^-1 + S1^-1) dm``.
    """
    (m0, V0), (m1, V1) = p0, p1
    V0, V1 = S.as_spd(V0), S.as_spd(V1)
    m0, m1 = np.atleast_1d(np.asarray(m0, float)), np.atleast_1d(np.asarray(m1, float))
    d = V0.shape[0]
    if V1.shape != V0.shape or m0.shape != (d,) or m1.shape != (d,):
        raise InvalidInput("dimension mismatch")
    dm = m1 - m0
    t = np.trace(np.linalg.solve(V1, V0)) + np.trace(np.linalg.solve(V0, V1))
    q = dm @ np.linalg.solve(V0, dm) + dm @ np.linalg.solve(V1, dm)
    return max(0.0, float(0.5 * t - d + 0.5 * q))


def mvn_bhattacharyya(p0, p1) -> float:
    """Bhattacharyya coefficient ``int sqrt(p0 p1)`` of two normal distributions."""
    (m0, V0), (m1, V1) = p0, p1
    Vb = 0.5 * (V0 + V1)
    dm = m1 - m0
    ld = lambda M: 2 * np.sum(np.log(np.diag(np.linalg.cholesky(M))))
    log_bc = 0.25 * ld(V0) + 0.25 * ld(V1) - 0.5 * ld(Vb) - 0.125 * float(dm @ np.linalg.solve(Vb, dm))
    return min(1.0, math.exp(log_bc))


def wishart_distance(V0, V1, d) -> float:
    """``sqrt(d) * spd_distance(V0, V1)`` for Wishart models with ``d`` degrees of freedom."""
    if not d >= 1:
        raise InvalidInput("degrees of freedom must be >= 1")
    return math.sqrt(d) * S.spd_distance(V0, V1)


# ---------------------------------------------------------------------------
# record parsing


def _matrix(x, what="matrix") -> np.ndarray:
    M = np.asarray(x, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInput(f"{what} must be a square row-major array")
    if not np.all(np.isfinite(M)):
        raise InvalidInput(f"{what} has non-finite entries")
    asym = float(np.max(np.abs(M - M.T)))
    if asym > LOAD_SYM_TOL * (1 + float(np.max(np.abs(M)))):
        raise InvalidInput(f"{what} is not symmetric")
    if asym > 0:
        warnings.warn(f"{what} symmetrized on load (asymmetry {asym:.3g})", stacklevel=3)
    return 0.5 * (M + M.T)


def _pick(rec, *names):
    for n in names:
        if n in rec:
            return rec[n]
    raise InvalidInput(f"record needs one of the keys {names}")


def _parse_scalar(rec):
    if isinstance(rec, dict):
        rec = next(iter(rec.values())) if len(rec) == 1 else _pick(rec, "value", "theta")
    v = np.atleast_1d(np.asarray(rec, dtype=float))
    if v.shape != (1,):
        raise InvalidInput("expected a single number")
    return v


def _parse_loc_scale(rec):
    if isinstance(rec, dict):
        return np.array([float(_pick(rec, "mu", "l", "loc", "location", "mean")),
                         float(_pick(rec, "sigma", "s", "scale"))])
    v = np.asarray(rec, dtype=float)
    if v.shape != (2,):
        raise InvalidInput("expected (location, scale)")
    return v


def _parse_mean_scale(d):
    def parse(rec):
        if isinstance(rec, dict):
            m = _pick(rec, "mean", "mu", "m")
            V = _pick(rec, "cov", "sigma", "V", "scale")
        else:
            if len(rec) != 2:
                raise InvalidInput("expected [mean, matrix]")
            m, V = rec
        m = np.atleast_1d(np.asarray(m, float))
        V = _matrix(V)
        if m.shape != (d,) or V.shape != (d, d):
            raise InvalidInput(f"expected a mean of length {d} and a {d}x{d} matrix")
        return join_mean_scale(m, V)

    return parse


def _format_mean_scale(d):
    def fmt(theta):
        m, V = split_mean_scale(theta, d)
        return {"mean": m.tolist(), "cov": V.tolist()}

    return fmt


def _parse_spd(d):
    def parse(rec):
        if isinstance(rec, dict):
            rec = _pick(rec, "cov", "sigma", "V", "P", "matrix")
        M = _matrix(rec)
        if M.shape != (d, d):
            raise InvalidInput(f"expected a {d}x{d} matrix")
        return S.vech(M)

    return parse


def _format_spd(d):
    return lambda theta: S.unvech(theta, d).tolist()


# ---------------------------------------------------------------------------
# family constructors


def _scale_family(name: str, kl: Callable[[float, float], float], bc) -> FamilyDescriptor:
    """A 1-D family with metric ``1/s^2`` (exponential in the rate, Rayleigh in sigma^2)."""
    contains = lambda th: th[0] > 0
    metric = MetricField(1, lambda th: np.array([[1.0 / th[0] ** 2]]), contains,
                         christoffel=lambda th: np.array([[[-1.0 / th[0]]]]),
                         spray=lambda x, v: v * v / x)
    gen = BregmanGenerator(F=lambda x: -math.log(x[0]), grad=lambda x: np.array([-1.0 / x[0]]),
                           hess=lambda x: np.array([[1.0 / x[0] ** 2]]), contains=contains)
    ops = {
        "distance": lambda a, b: scale_family_distance(a[0], b[0]),
        "geodesic": lambda a, b, t: a ** (1 - t) * b ** t,
        "pregeodesic": lambda a, b, u: (1 - u) * a + u * b,
        "kl": lambda a, b: kl(a[0], b[0]),
        "jeffreys": lambda a, b: kl(a[0], b[0]) + kl(b[0], a[0]),
        "bhattacharyya": lambda a, b: bc(a[0], b[0]),
        "potential": gen,
        "axis_distance": lambda th, i, lo, hi: scale_family_distance(lo, hi),
        "antiderivative": lambda x: math.log(x),
    }
    return _make(name, 1, metric, ops, parse=_parse_scalar, format=lambda th: float(th[0]),
                 box_domain=True)


def exponential() -> FamilyDescriptor:
    """Exponential densities ``lambda exp(-lambda x)`` in the rate ``lambda``."""
    kl = lambda a, b: math.log(a / b) + b / a - 1.0
    bc = lambda a, b: 2 * math.sqrt(a * b) / (a + b)
    return _scale_family("exponential", kl, bc)


def rayleigh() -> FamilyDescriptor:
    """Rayleigh densities ``(x/s) exp(-x^2/(2s))`` in ``s = sigma^2``."""
    kl = lambda a, b: math.log(b / a) + a / b - 1.0
    bc = lambda a, b: 2 * math.sqrt(a * b) / (a + b)
    return _scale_family("rayleigh", kl, bc)


def _location_scale_metric(k: LocationScaleConstants, contains) -> MetricField:
    A2, B2 = k.A ** 2, k.B ** 2

    def fn(th):
        return np.diag([A2, B2]) / th[1] ** 2

    def christoffel(th):
        s = th[1]
        g = np.zeros((2, 2, 2))
        g[0, 0, 1] = g[0, 1, 0] = -1.0 / s
        g[1, 0, 0] = A2 / (B2 * s)
        g[1, 1, 1] = -1.0 / s
        return g

    def spray(x, v):
        s = x[:, 1]
        out = np.empty_like(v)
        out[:, 0] = 2 * v[:, 0] * v[:, 1] / s
        out[:, 1] = (v[:, 1] ** 2 - (A2 / B2) * v[:, 0] ** 2) / s
        return out

    return MetricField(2, fn, contains, christoffel, spray)


def location_scale_family(name: str, k: LocationScaleConstants, extra_ops=None) -> FamilyDescriptor:
    """Even location-scale family in the chart ``(l, s)``."""
    contains = lambda th: th[1] > 0
    metric = _location_scale_metric(k, contains)
    A, B = k.A, k.B

    def axis(th, i, lo, hi):
        if i == 0:
            return A * abs(hi - lo) / th[1]
        return B * scale_family_distance(lo, hi)

    ops = {
        "distance": lambda a, b: location_scale_distance(k, a, b),
        "geodesic": lambda a, b, t: location_scale_geodesic(k, a, b, t),
        "pregeodesic": lambda a, b, u: location_scale_geodesic(k, a, b, u),
        "axis_distance": axis,
    }
    ops.update(extra_ops or {})
    return _make(name, 2, metric, ops, constants=k, parse=_parse_loc_scale,
                 format=lambda th: {"l": float(th[0]), "s": float(th[1])}, box_domain=True)


def _normal_potential() -> BregmanGenerator:
    """Log-normalizer of the normal family in natural parameters ``(mu/sigma^2, -1/(2 sigma^2))``."""

    def F(x):
        return -x[0] ** 2 / (4 * x[1]) + 0.5 * math.log(-math.pi / x[1])

    def grad(x):
        mu, var = -x[0] / (2 * x[1]), -1 / (2 * x[1])
        return np.array([mu, mu * mu + var])

    def hess(x):
        a, b = x
        return np.array([[-1 / (2 * b), a / (2 * b * b)],
                         [a / (2 * b * b), -a * a / (2 * b ** 3) + 1 / (2 * b * b)]])

    to_xi = lambda th: np.array([th[0] / th[1] ** 2, -0.5 / th[1] ** 2])
    return BregmanGenerator(F, grad, hess, contains=lambda x: x[1] < 0, to_xi=to_xi)


def normal_kl(a, b) -> float:
    (m0, s0), (m1, s1) = a, b
    return math.log(s1 / s0) + (s0 * s0 + (m0 - m1) ** 2) / (2 * s1 * s1) - 0.5


def normal_bhattacharyya(a, b) -> float:
    (m0, s0), (m1, s1) = a, b
    v = s0 * s0 + s1 * s1
    return math.sqrt(2 * s0 * s1 / v) * math.exp(-(m0 - m1) ** 2 / (4 * v))


def normal1d() -> FamilyDescriptor:
    """Univariate normal distributions in the chart ``(mu, sigma)``."""
    extra = {
        "kl": normal_kl,
        "jeffreys": lambda a, b: normal_kl(a, b) + normal_kl(b, a),
        "bhattacharyya": normal_bhattacharyya,
        "potential": _normal_potential(),
    }
    return location_scale_family("normal1d", NORMAL_CONSTANTS, extra)


def cauchy_kl(a, b) -> float:
    (l0, s0), (l1, s1) = a, b
    return math.log(((s0 + s1) ** 2 + (l0 - l1) ** 2) / (4 * s0 * s1))


def cauchy() -> FamilyDescriptor:
    """Cauchy distributions in ``(l, s)``; the KL divergence is symmetric."""
    extra = {"kl": cauchy_kl, "jeffreys": lambda a, b: 2 * cauchy_kl(a, b)}
    return location_scale_family("cauchy", CAUCHY_CONSTANTS, extra)


def student(k: float) -> FamilyDescriptor:
    fam = location_scale_family(f"student({_num(k)})", student_constants(k))
    return fam


def categorical(d: int) -> FamilyDescriptor:
    """Categorical distributions on ``d`` outcomes, chart ``(p_1, ..., p_{d-1})``."""
    d = int(d)
    if d < 2:
        raise InvalidInput("categorical needs d >= 2")
    m = d - 1
    full = lambda th: np.append(th, 1.0 - th.sum())
    contains = lambda th: bool(np.all(th > 0) and th.sum() < 1)

    def fn(th):
        return np.diag(1.0 / th) + 1.0 / (1.0 - th.sum())

    def kl(a, b):
        p, q = full(a), full(b)
        return float(np.sum(p * np.log(p / q)))

    gen = BregmanGenerator(
        F=lambda x: float(np.sum(full(x) * np.log(full(x)))),
        grad=lambda x: np.log(x) - math.log(1.0 - x.sum()),
        hess=fn, contains=contains)

    def parse(rec):
        p = as_simplex(rec)
        if p.size != d:
            raise InvalidInput(f"expected {d} probabilities")
        return p[:-1].copy()

    ops = {
        "distance": lambda a, b: categorical_fisher_rao(full(a), full(b)),
        "geodesic": lambda a, b, t: categorical_geodesic(full(a), full(b), t)[:-1],
        "pregeodesic": lambda a, b, u: categorical_geodesic(full(a), full(b), u)[:-1],
        "kl": kl,
        "jeffreys": lambda a, b: kl(a, b) + kl(b, a),
        "bhattacharyya": lambda a, b: bhattacharyya_coefficient(full(a), full(b)),
        "hellinger": lambda a, b: categorical_hellinger(full(a), full(b)),
        "potential": gen,
    }
    return _make(f"categorical({d})", m, MetricField(m, fn, contains), ops,
                 parse=parse, format=lambda th: full(th).tolist())


def _sym_index(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Index maps between vech coordinates and row-major full matrices.

    ``x[..., full].reshape(d, d)`` rebuilds the symmetric matrix and
    ``M.reshape(d * d)[flat]`` extracts its vech.
    """
    pos = np.zeros((d, d), dtype=int)
    iu = np.triu_indices(d)
    pos[iu] = np.arange(iu[0].size)
    pos = pos + np.triu(pos, 1).T
    return pos.ravel(), iu[0] * d + iu[1]


def _spd_chart_metric(d: int, scale: float = 1.0) -> MetricField:
    E = S.vech_basis(d)
    contains = lambda th: _spd_ok(S.unvech(th, d))
    iu = np.triu_indices(d)

    def fn(th):
        return _trace_metric(S.unvech(th, d), E, scale)

    def christoffel(th):
        Vi = np.linalg.inv(S.unvech(th, d))
        B = np.einsum("aij,jk,bkl->abil", E, Vi, E)
        B = 0.5 * (B + np.transpose(B, (1, 0, 2, 3)))
        return -np.transpose(B[:, :, iu[0], iu[1]], (2, 0, 1))

    full, flat = _sym_index(d)

    def spray(x, v):
        P = x[:, full].reshape(-1, d, d)
        D = v[:, full].reshape(-1, d, d)
        acc = D @ np.linalg.solve(P, D)
        return acc.reshape(-1, d * d)[:, flat]

    return MetricField(d * (d + 1) // 2, fn, contains, christoffel, spray)


def _centered_potential(d: int, scale: float = 1.0) -> BregmanGenerator:
    """``F(Xi) = -1/2 log det(-Xi)`` on ``Xi = -1/2 Sigma^-1`` in vech coordinates.

    Gradients are taken with respect to the vech coordinates, so off-diagonal
    entries are counted twice and the plain dot product is the trace pairing.
    """
    off = np.where(np.equal(*np.triu_indices(d)), 1.0, 2.0)

    def F(x):
        M = -S.unvech(x, d)
        return -0.5 * scale * 2 * float(np.sum(np.log(np.diag(np.linalg.cholesky(M)))))

    def grad(x):
        Xi = S.unvech(x, d)
        return scale * off * S.vech(-0.5 * np.linalg.inv(Xi))

    def contains(x):
        return _spd_ok(-S.unvech(x, d))

    to_xi = lambda th: S.vech(-0.5 * np.linalg.inv(S.unvech(th, d)))
    return BregmanGenerator(F, grad, None, contains, to_xi)


def _spd_like(name: str, d: int, scale: float = 1.0, extra_notes=None) -> FamilyDescriptor:
    d = int(d)
    if d < 1:
        raise InvalidInput("matrix dimension must be >= 1")
    metric = _spd_chart_metric(d, scale)
    U = lambda th: S.unvech(th, d)
    rs = math.sqrt(scale)

    def kl(a, b):
        z = np.zeros(d)
        return scale * mvn_kl((z, U(a)), (z, U(b)))

    def jeff(a, b):
        z = np.zeros(d)
        return scale * mvn_jeffreys((z, U(a)), (z, U(b)))

    def bc(a, b):
        z = np.zeros(d)
        return mvn_bhattacharyya((z, U(a)), (z, U(b))) ** scale

    ops = {
        "distance": lambda a, b: rs * S.spd_distance(U(a), U(b)),
        "geodesic": lambda a, b, t: S.vech(S.spd_geodesic(U(a), U(b), t)),
        "pregeodesic": lambda a, b, u: S.vech(S.spd_geodesic(U(a), U(b), u)),
        "kl": kl,
        "jeffreys": jeff,
        "potential": _centered_potential(d, scale),
    }
    # Wishart with n degrees of freedom: the coefficient is the centered-normal one to the n
    ops["bhattacharyya"] = bc
    full, _ = _sym_index(d)

    def lengths(thetas, dthetas):
        P = thetas[:, full].reshape(-1, d, d)
        X = np.linalg.solve(P, dthetas[:, full].reshape(-1, d, d))
        return np.sqrt(np.maximum(0.5 * scale * np.einsum("nij,nji->n", X, X), 0.0))

    ops["lengths"] = lengths
    return _make(name, metric.dim, metric, ops, constants=scale, parse=_parse_spd(d),
                 format=_format_spd(d), notes=extra_notes or {})


def spd(d: int) -> FamilyDescriptor:
    """SPD cone with the affine-invariant metric ``1/2 tr((P^-1 dP)^2)``."""
    return _spd_like(f"spd({int(d)})", d)


def centered_mvn(d: int) -> FamilyDescriptor:
    """Zero-mean normal distributions, chart ``vech(Sigma)``."""
    return _spd_like(f"centered-mvn({int(d)})", d)


def wishart(n: float, p: int) -> FamilyDescriptor:
    """Wishart scale family with ``n`` degrees of freedom on ``p x p`` matrices.

    The metric is ``n`` times the trace metric, so distances scale by ``sqrt(n)``.
    """
    if not n >= 1:
        raise InvalidInput("degrees of freedom must be >= 1")
    fam = _spd_like(f"wishart({_num(n)})", p, float(n), {"matrix_dim": int(p)})
    return fam


def _elliptical_metric(k: EllipticalConstants) -> MetricField:
    d = k.d
    E = S.vech_basis(d)
    contains = lambda th: _spd_ok(S.unvech(th[d:], d))
    # 2b tr(XY) = (4b) * 1/2 tr(XY)
    fn_V = lambda V: _trace_metric(V, E, 4 * k.b, (4 * k.b - 1) / 4)

    def fn(th):
        V = S.unvech(th[d:], d)
        nV = d * (d + 1) // 2
        G = np.zeros((d + nV, d + nV))
        G[:d, :d] = 4 * k.a * np.linalg.inv(V)
        G[d:, d:] = fn_V(V)
        return G

    # geodesic equations of the elliptical metric:
    #   m'' = V' V^-1 m',  V'' = V' V^-1 V' - alpha m' m'^T + beta (m'^T V^-1 m') V
    # with alpha = a/b and beta = a(4b-1)/((8+4d) b^2 - d b)
    alpha = k.a / k.b
    beta = k.a * (4 * k.b - 1) / ((8 + 4 * d) * k.b ** 2 - d * k.b)
    full, flat = _sym_index(d)

    def spray(x, v):
        P = x[:, d:][:, full].reshape(-1, d, d)
        D = v[:, d:][:, full].reshape(-1, d, d)
        mdot = v[:, :d, None]
        W = np.linalg.solve(P, np.concatenate([mdot, D], axis=2))
        acc_m = (D @ W[:, :, :1])[:, :, 0]
        acc_V = D @ W[:, :, 1:] - alpha * (mdot @ mdot.transpose(0, 2, 1))
        if beta:
            q = (mdot[:, :, 0] * W[:, :, 0]).sum(axis=1)
            acc_V = acc_V + beta * q[:, None, None] * P
        return np.concatenate([acc_m, acc_V.reshape(-1, d * d)[:, flat]], axis=1)

    return MetricField(d + d * (d + 1) // 2, fn, contains, None, spray)


def _mvn_potential(d: int) -> BregmanGenerator:
    """Normal log-normalizer on ``xi = (Sigma^-1 mu, vech(-1/2 Sigma^-1))``.

    ``grad F = (mu, Sigma + mu mu^T)`` with off-diagonal vech entries doubled.
    """
    off = np.where(np.equal(*np.triu_indices(d)), 1.0, 2.0)

    def unpack(x):
        return x[:d], S.unvech(x[d:], d)

    def F(x):
        x1, X2 = unpack(x)
        L = np.linalg.cholesky(-X2)
        y = np.linalg.solve(L, x1)
        return 0.25 * float(y @ y) - float(np.sum(np.log(np.diag(L)))) + 0.5 * d * math.log(math.pi)

    def grad(x):
        x1, X2 = unpack(x)
        Sig = -0.5 * np.linalg.inv(X2)
        mu = Sig @ x1
        return np.concatenate([mu, off * S.vech(Sig + np.outer(mu, mu))])

    def to_xi(th):
        mu, Sig = split_mean_scale(th, d)
        P = np.linalg.inv(Sig)
        return np.concatenate([P @ mu, S.vech(-0.5 * P)])

    return BregmanGenerator(F, grad, None, lambda x: _spd_ok(-S.unvech(x[d:], d)), to_xi)


def elliptical_family(name: str, k: EllipticalConstants, ops=None) -> FamilyDescriptor:
    """Elliptical family with constants ``k`` in the chart ``(m, vech(V))``."""
    d = k.d
    metric = _elliptical_metric(k)
    full, _ = _sym_index(d)
    ops = dict(ops or {})
    ops["lengths"] = lambda th, dth: elliptical_length_elements(
        k, th[:, :d], th[:, d:][:, full].reshape(-1, d, d),
        dth[:, :d], dth[:, d:][:, full].reshape(-1, d, d))
    return _make(name, metric.dim, metric, ops, constants=k,
                 parse=_parse_mean_scale(d), format=_format_mean_scale(d))


def mvn(d: int) -> FamilyDescriptor:
    """Multivariate normal distributions, chart ``(mu, vech(Sigma))``."""
    d = int(d)
    if d < 1:
        raise InvalidInput("dimension must be >= 1")
    split = lambda th: split_mean_scale(th, d)
    ops = {
        "kl": lambda a, b: mvn_kl(split(a), split(b)),
        "jeffreys": lambda a, b: mvn_jeffreys(split(a), split(b)),
        "bhattacharyya": lambda a, b: mvn_bhattacharyya(split(a), split(b)),
        "potential": _mvn_potential(d),
    }
    return elliptical_family(f"mvn({d})", mvn_constants(d), ops)


def mggd(k, d) -> FamilyDescriptor:
    return elliptical_family(f"mggd({_num(k)},{int(d)})", mggd_constants(k, d))


def mtd(k, d) -> FamilyDescriptor:
    return elliptical_family(f"mtd({_num(k)},{int(d)})", mtd_constants(k, d))


def product_family(factors: Sequence[FamilyDescriptor], name: Optional[str] = None) -> FamilyDescriptor:
    """Family of independent products; coordinates are concatenated.

    The distance is the l2 combination of the factor distances and the
    geodesic is the concatenation of the factor geodesics (all of them are
    arclength-parameterized, so the product one is too). Operations are
    declared only when every factor declares them.
    """
    factors = list(factors)
    if not factors:
        raise InvalidInput("need at least one factor")
    dims = [f.dim for f in factors]
    cuts = np.cumsum([0] + dims)
    m = int(cuts[-1])
    parts = lambda th: [th[cuts[i]:cuts[i + 1]] for i in range(len(factors))]

    def fn(th):
        G = np.zeros((m, m))
        for i, (f, p) in enumerate(zip(factors, parts(th))):
            G[cuts[i]:cuts[i + 1], cuts[i]:cuts[i + 1]] = f.metric(p)
        return G

    contains = lambda th: all(f.contains(p) for f, p in zip(factors, parts(th)))
    has = lambda key: all(key in f.ops for f in factors)
    ops = {}
    if has("distance"):
        ops["distance"] = lambda a, b: product_distance(
            [f.ops["distance"](x, y) for f, x, y in zip(factors, parts(a), parts(b))])
    for key in ("geodesic", "pregeodesic"):
        if has(key):
            ops[key] = (lambda key: lambda a, b, t: np.concatenate(
                [f.ops[key](x, y, t) for f, x, y in zip(factors, parts(a), parts(b))]))(key)
    for key in ("kl", "jeffreys"):
        if has(key):
            ops[key] = (lambda key: lambda a, b: float(sum(
                f.ops[key](x, y) for f, x, y in zip(factors, parts(a), parts(b)))))(key)
    if has("bhattacharyya"):
        ops["bhattacharyya"] = lambda a, b: float(np.prod(
            [f.ops["bhattacharyya"](x, y) for f, x, y in zip(factors, parts(a), parts(b))]))
    if has("axis_distance"):
        def axis(th, i, lo, hi):
            j = int(np.searchsorted(cuts, i, side="right") - 1)
            return factors[j].raw_ops["axis_distance"](th[cuts[j]:cuts[j + 1]], i - cuts[j], lo, hi)

        ops["axis_distance"] = axis
    if has("potential"):
        gens = [f.ops["potential"] for f in factors]
        ops["potential"] = BregmanGenerator(
            F=lambda x: float(sum(g.F(p) for g, p in zip(gens, parts(x)))),
            grad=lambda x: np.concatenate([g.grad(p) for g, p in zip(gens, parts(x))]),
            contains=lambda x: all(g.contains is None or g.contains(p) for g, p in zip(gens, parts(x))),
            to_xi=lambda th: np.concatenate([g.to_xi(p) for g, p in zip(gens, parts(th))]))

    def parse(rec):
        if len(rec) != len(factors):
            raise InvalidInput(f"expected {len(factors)} factor records")
        return np.concatenate([f.load(r) for f, r in zip(factors, rec)])

    fmt = lambda th: [f.dump(p) for f, p in zip(factors, parts(th))]
    return _make(name or "product(" + ",".join(f.name for f in factors) + ")", m,
                 MetricField(m, fn, contains), ops, constants=tuple(factors),
                 parse=parse, format=fmt, box_domain=all(f.box_domain for f in factors))


def reparameterize(model: FamilyDescriptor, to_theta: Callable, from_theta: Callable,
                   jacobian: Callable, name: str, contains: Optional[Callable] = None,
                   parse: Optional[Callable] = None) -> FamilyDescriptor:
    """The same family in a new chart ``lam`` with ``theta = to_theta(lam)``.

    ``jacobian(lam)`` is ``d theta / d lam``; the metric becomes
    ``J^T G(theta) J``. Closed-form distances and divergences are composed
    with the chart change and geodesics are mapped back with
    ``from_theta``, so every value is chart-independent by construction.
    Per-axis distances are dropped since the axes change.
    """
    inner = model.raw_ops
    own = contains or (lambda lam: model.contains(to_theta(lam)))

    def fn(lam):
        J = np.atleast_2d(np.asarray(jacobian(lam), dtype=float))
        return J.T @ model.metric.fn(to_theta(lam)) @ J

    ops = {}
    for key in ("distance", "kl", "jeffreys", "bhattacharyya"):
        if key in inner:
            ops[key] = (lambda op: lambda a, b: op(to_theta(a), to_theta(b)))(inner[key])
    for key in ("geodesic", "pregeodesic"):
        if key in inner:
            ops[key] = (lambda op: lambda a, b, t: np.asarray(
                from_theta(op(to_theta(a), to_theta(b), t)), dtype=float))(inner[key])
    if "potential" in inner:
        g = inner["potential"]
        to_xi = (lambda lam: g.to_xi(to_theta(lam))) if g.to_xi is not None else to_theta
        ops["potential"] = BregmanGenerator(g.F, g.grad, g.hess, g.contains, to_xi)
    wrap = lambda lam: np.asarray(to_theta(np.asarray(lam, dtype=float)), dtype=float)
    return _make(name, model.dim, MetricField(model.dim, fn, own), ops, constants=model.constants,
                 parse=(lambda rec: np.asarray(from_theta(model.parse(rec)), dtype=float))
                 if parse is None and model.parse is not None else parse,
                 format=(lambda lam: model.format(wrap(lam))) if model.format else None)


NORMAL_CHARTS = ("sigma", "variance", "log-sigma")


def normal1d_chart(chart: str = "sigma") -> FamilyDescriptor:
    """Univariate normals in the chart ``(mu, sigma)``, ``(mu, sigma^2)`` or ``(mu, log sigma)``."""
    base = normal1d()
    if chart == "sigma":
        return base
    if chart == "variance":
        return reparameterize(
            base, lambda lam: np.array([lam[0], math.sqrt(lam[1])]),
            lambda th: np.array([th[0], th[1] ** 2]),
            lambda lam: np.diag([1.0, 0.5 / math.sqrt(lam[1])]),
            "normal1d[variance]", contains=lambda lam: lam[1] > 0)
    if chart == "log-sigma":
        return reparameterize(
            base, lambda lam: np.array([lam[0], math.exp(lam[1])]),
            lambda th: np.array([th[0], math.log(th[1])]),
            lambda lam: np.diag([1.0, math.exp(lam[1])]),
            "normal1d[log-sigma]", contains=lambda lam: True)
    raise InvalidInput(f"unknown normal chart {chart!r}; expected one of {NORMAL_CHARTS}")


def axis_distance_by_quadrature(metric: MetricField, theta, i: int, lo: float, hi: float,
                                tol: float = 1e-10) -> tuple[float, float]:
    """1-D Fisher-Rao distance along coordinate ``i`` by quadrature of ``sqrt(g_ii)``.

    Returns ``(value, error_estimate)``.
    """
    th = np.array(theta, dtype=float)

    def integrand(x):
        p = th.copy()
        p[i] = x
        return math.sqrt(max(0.0, metric(p)[i, i]))

    if lo == hi:
        return 0.0, 0.0
    val, err = integrate.quad(integrand, min(lo, hi), max(lo, hi), epsabs=tol, epsrel=tol, limit=200)
    return float(val), float(err)


# ---------------------------------------------------------------------------
# registry


def _num(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


_NAME = re.compile(r"^\s*([a-z][a-z0-9-]*)\s*(?:\(\s*([^)]*)\s*\))?\s*$")

FAMILY_NAMES = ("exponential", "rayleigh", "categorical", "normal1d", "cauchy", "student",
                "mvn", "centered-mvn", "mggd", "mtd", "wishart", "spd")


def _args(raw: Optional[str], n: int, name: str):
    if raw is None or raw == "":
        return []
    try:
        vals = [float(v) for v in raw.split(",")]
    except ValueError:
        raise InvalidInput(f"bad arguments for family {name!r}: {raw!r}") from None
    if len(vals) > n:
        raise InvalidInput(f"family {name!r} takes at most {n} arguments")
    return vals


def _int(x, what):
    if not float(x).is_integer() or x < 1:
        raise InvalidInput(f"{what} must be a positive integer")
    return int(x)


def _matrix_dim_hint(points) -> Optional[int]:
    if not points:
        return None
    rec = points[0]
    if isinstance(rec, dict):
        rec = _pick(rec, "cov", "sigma", "V", "P", "matrix")
    M = np.asarray(rec, dtype=float)
    return M.shape[0] if M.ndim == 2 else (1 if M.ndim == 0 else None)


def get_family(name: str, points=None) -> FamilyDescriptor:
    """Look a family up by registry name such as ``"student(3)"`` or ``"mggd(2,3)"``.

    ``points`` (raw records) lets ``"categorical"`` and ``"wishart(n)"`` infer
    their dimension from the data.
    """
    mt = _NAME.match(str(name))
    if not mt or mt.group(1) not in FAMILY_NAMES:
        raise InvalidInput(f"unknown family {name!r}; known: {', '.join(FAMILY_NAMES)}")
    base, raw = mt.group(1), mt.group(2)
    if base in ("exponential", "rayleigh", "normal1d", "cauchy"):
        if _args(raw, 0, base):
            raise InvalidInput(f"family {base!r} takes no arguments")
        return {"exponential": exponential, "rayleigh": rayleigh,
                "normal1d": normal1d, "cauchy": cauchy}[base]()
    args = _args(raw, 2, base)
    if base == "categorical":
        if args:
            return categorical(_int(args[0], "d"))
        if points:
            return categorical(len(points[0]))
        raise InvalidInput("categorical needs d, given or inferred from the points")
    if base == "student":
        if len(args) != 1:
            raise InvalidInput("student(k) needs one argument")
        return student(args[0])
    if base in ("mvn", "centered-mvn", "spd"):
        if len(args) != 1:
            raise InvalidInput(f"{base}(d) needs one argument")
        d = _int(args[0], "d")
        return {"mvn": mvn, "centered-mvn": centered_mvn, "spd": spd}[base](d)
    if base in ("mggd", "mtd"):
        if len(args) != 2:
            raise InvalidInput(f"{base}(k,d) needs two arguments")
        return (mggd if base == "mggd" else mtd)(args[0], _int(args[1], "d"))
    # wishart(n): matrix size from the points
    if len(args) != 1:
        raise InvalidInput("wishart(d) needs one argument")
    p = _matrix_dim_hint(points)
    if p is None:
        raise InvalidInput("wishart needs points to infer the matrix dimension")
    return wishart(args[0], p)
