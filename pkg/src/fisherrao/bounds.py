"""Certified lower and upper bounds on Fisher-Rao distances.

Upper bounds are lengths of realizable curves (hypercube paths, straight
segments of a Hessian chart, pulled-back Birkhoff segments). Lower bounds
come from isometric embeddings into spaces with closed-form distances: the
Calvo-Oller embedding into a larger SPD cone and the square-root embedding
of densities into a sphere (Hellinger / Bhattacharyya arc).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from . import families as F
from . import spd as S
from .errors import CapabilityError, DomainError, InvalidInput, NumericalFailure
from .manifold import Curve, curve_length

MAX_HYPERCUBE_DIM = 20


@dataclass(frozen=True)
class BoundsPair:
    """A certified bracket ``lower <= rho <= upper`` with the methods used."""

    lower: float
    upper: float
    lower_method: str = ""
    upper_method: str = ""

    def __post_init__(self):
        if not (self.lower >= 0 and self.upper >= 0):
            raise NumericalFailure(f"bounds must be nonnegative, got [{self.lower}, {self.upper}]")
        slack = 1e-12 * max(1.0, abs(self.upper))
        if self.lower > self.upper + slack:
            raise NumericalFailure(
                f"lower bound {self.lower!r} ({self.lower_method}) exceeds upper bound "
                f"{self.upper!r} ({self.upper_method})")

    @property
    def ratio(self) -> float:
        if self.lower == 0:
            return math.inf if self.upper > 0 else 1.0
        return self.upper / self.lower

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper,
                "lower_method": self.lower_method, "upper_method": self.upper_method}


@dataclass(frozen=True)
class CalvoOllerEmbedding:
    """Parameters of ``(m, V) -> det(V)^alpha [[V + beta m m^T, beta m], [beta m^T, 1]]``."""

    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta) and self.beta > 0):
            raise InvalidInput("Calvo-Oller embedding needs a finite alpha and beta > 0")


DEFAULT_EMBEDDING = CalvoOllerEmbedding()


# ---------------------------------------------------------------------------
# Fisher-Manhattan


def _axis_weight(model):
    """``(theta, i, lo, hi) -> (value, error)`` for edges of the hypercube."""
    if model.has("per_axis_1d_distance"):
        # corners of a box domain are valid once the endpoints are: skip re-validation
        axis = model.raw_ops["axis_distance"] if model.box_domain else model.op("per_axis_1d_distance")
        return lambda th, i, lo, hi: (axis(th, i, lo, hi), 0.0)
    return lambda th, i, lo, hi: F.axis_distance_by_quadrature(model.metric, th, i, lo, hi)


def fisher_manhattan_ub(model, theta0, theta1) -> float:
    """Shortest hypercube path between the corners ``theta0`` and ``theta1``.

    Edge weights use the family's closed-form per-axis distances when it
    declares them and quadrature of ``sqrt(g_ii)`` otherwise. Edges with an
    end outside the domain are dropped.

    Corner ``bits`` has coordinate ``i`` equal to ``theta1[i]`` when bit ``i``
    is set and ``theta0[i]`` otherwise. Each edge changes one coordinate and
    is weighted by the 1-D Fisher-Rao distance of that axis-restricted
    submodel, so every path is a realizable curve and the shortest one is an
    upper bound. Edges are evaluated lazily with Dijkstra's algorithm; when
    the weights come from quadrature, their error estimates along the
    optimal path are added to the result.
    """
    a, b = model.check(theta0), model.check(theta1)
    m = a.shape[0]
    if m > MAX_HYPERCUBE_DIM:
        raise InvalidInput(f"hypercube bound limited to m <= {MAX_HYPERCUBE_DIM}")
    weight = _axis_weight(model)
    diff = [i for i in range(m) if a[i] != b[i]]
    if not diff:
        return 0.0
    target = sum(1 << i for i in diff)
    memo: dict = {}

    shifts = np.arange(m)

    def corner(bits):
        return np.where((bits >> shifts) & 1, b, a)

    def edge(u, i):
        key = (u & ~(1 << i), i)
        if key not in memo:
            th = corner(key[0])
            # every corner of a box lies in the domain; elsewhere both ends must
            if not model.box_domain and not (model.contains(th) and model.contains(corner(key[0] | 1 << i))):
                memo[key] = (math.inf, 0.0)
            else:
                try:
                    memo[key] = weight(th, i, a[i], b[i])
                except DomainError:
                    # the axis segment leaves a non-convex domain
                    memo[key] = (math.inf, 0.0)
        return memo[key]

    dist = {0: (0.0, 0.0)}
    done = set()
    heap = [(0.0, 0.0, 0)]
    while heap:
        du, eu, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == target:
            return du + eu
        for i in diff:
            v = u ^ (1 << i)
            if v in done:
                continue
            w, e = edge(u, i)
            if not math.isfinite(w):
                continue
            nd = du + w
            if v not in dist or nd < dist[v][0]:
                dist[v] = (nd, eu + e)
                heapq.heappush(heap, (nd, eu + e, v))
    raise DomainError("no hypercube path stays inside the domain")


# ---------------------------------------------------------------------------
# Jeffreys-Bregman


def jeffreys_bregman_ub(gen: F.BregmanGenerator, xi0, xi1) -> float:
    """``sqrt((xi1 - xi0) . (grad F(xi1) - grad F(xi0)))``.

    The squared value is the energy of the straight segment of the Hessian
    chart, so its square root bounds that segment's length and hence the
    distance.
    """
    return math.sqrt(max(0.0, gen.jeffreys_bregman(xi0, xi1)))


def family_jeffreys_bregman_ub(model, theta0, theta1) -> float:
    gen = model.op("hessian_potential")
    return jeffreys_bregman_ub(gen, gen.to_xi(model.check(theta0)), gen.to_xi(model.check(theta1)))


# ---------------------------------------------------------------------------
# Calvo-Oller embedding and Birkhoff distance


def _params(p):
    m, V = p
    V = S.as_spd(V)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if m.shape != (V.shape[0],):
        raise InvalidInput("mean and scale dimensions differ")
    return m, V


def calvo_oller_embed(p, e: CalvoOllerEmbedding = DEFAULT_EMBEDDING) -> np.ndarray:
    """Embed elliptical parameters ``(m, V)`` into the SPD cone of size ``d + 1``."""
    m, V = _params(p)
    d = V.shape[0]
    P = np.empty((d + 1, d + 1))
    P[:d, :d] = V + e.beta * np.outer(m, m)
    P[:d, d] = P[d, :d] = e.beta * m
    P[d, d] = 1.0
    if e.alpha:
        P *= np.linalg.det(V) ** e.alpha
    try:
        return S.as_spd(P)
    except DomainError:
        raise DomainError("embedded matrix is not positive definite for this (alpha, beta)") from None


def calvo_oller_retract(P, e: CalvoOllerEmbedding = DEFAULT_EMBEDDING):
    """Left inverse of :func:`calvo_oller_embed` on matrices ``[[A, b], [b^T, c]]``.

    The matrix is first scaled so the corner is 1, which also removes the
    ``det(V)^alpha`` factor; then ``m = b / beta`` and ``V = A - beta m m^T``.
    """
    P = S.as_sym(P)
    c = P[-1, -1]
    if not c > 0:
        raise NumericalFailure("corner entry must be positive")
    Q = P / c
    m = Q[:-1, -1] / e.beta
    V = Q[:-1, :-1] - e.beta * np.outer(m, m)
    V = 0.5 * (V + V.T)
    try:
        np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        raise NumericalFailure("retracted scale matrix is not positive definite") from None
    return m, V


def calvo_oller_lb(p0, p1, e: CalvoOllerEmbedding = DEFAULT_EMBEDDING) -> float:
    """Affine-invariant distance between the Calvo-Oller embeddings.

    With ``(alpha, beta) = (0, 1)`` the embedding is an isometry of the
    normal model onto a submanifold of ``SPD(d+1)``, so this is a lower bound
    on the multivariate normal Fisher-Rao distance, equal to it for
    centered pairs.
    """
    return S.spd_distance(calvo_oller_embed(p0, e), calvo_oller_embed(p1, e))


def bco_distance(p0, p1, e: CalvoOllerEmbedding = DEFAULT_EMBEDDING) -> float:
    """Birkhoff distance between Calvo-Oller embeddings (a metric on parameters)."""
    return S.birkhoff_distance(calvo_oller_embed(p0, e), calvo_oller_embed(p1, e))


def _retract_stack(P, dP, e: CalvoOllerEmbedding):
    """Batched retraction of ``P[n]`` and its derivative along the curve."""
    c = P[:, -1, -1]
    dc = dP[:, -1, -1]
    if np.any(c <= 0):
        raise NumericalFailure("corner entry must be positive")
    Q = P / c[:, None, None]
    dQ = (dP * c[:, None, None] - P * dc[:, None, None]) / (c * c)[:, None, None]
    m, dm = Q[:, :-1, -1] / e.beta, dQ[:, :-1, -1] / e.beta
    mm = np.einsum("ni,nj->nij", m, m)
    dmm = np.einsum("ni,nj->nij", dm, m)
    V = Q[:, :-1, :-1] - e.beta * mm
    dV = dQ[:, :-1, :-1] - e.beta * (dmm + dmm.transpose(0, 2, 1))
    V = 0.5 * (V + V.transpose(0, 2, 1))
    try:
        np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        raise NumericalFailure("retracted scale matrix is not positive definite") from None
    return m, V, dm, 0.5 * (dV + dV.transpose(0, 2, 1))


def pullback_birkhoff_curve(p0, p1, e: CalvoOllerEmbedding = DEFAULT_EMBEDDING, T: int = 257,
                            constants: Optional[F.EllipticalConstants] = None):
    """Pull a Birkhoff geodesic between embeddings back to parameter space.

    The straight Birkhoff segment between the two embedded matrices is
    retracted point by point (:func:`calvo_oller_retract`). The resulting
    parameter curve is measured with the elliptical length element (normal
    constants by default): its speed is evaluated at ``T`` uniform times,
    with the exact velocity of the retracted segment, and integrated by
    Simpson's rule. Returns ``(curve, length)``; the curve has
    ``kind == "pullback"``.
    """
    if int(T) != T or T < 2:
        raise InvalidInput("T must be an integer >= 2")
    (m0, V0), (m1, V1) = _params(p0), _params(p1)
    d = V0.shape[0]
    if V1.shape != V0.shape:
        raise InvalidInput("dimension mismatch")
    k = constants or F.mvn_constants(d)
    if k.d != d:
        raise InvalidInput("elliptical constants have the wrong dimension")
    P0, P1 = calvo_oller_embed((m0, V0), e), calvo_oller_embed((m1, V1), e)
    coeffs = S.birkhoff_coefficients(P0, P1, derivative=True)

    def stack(ts):
        c0, c1, d0, d1 = coeffs(ts)
        P = c0[:, None, None] * P0 + c1[:, None, None] * P1
        dP = d0[:, None, None] * P0 + d1[:, None, None] * P1
        return _retract_stack(P, dP, e)

    def fn(t):
        if t <= 0:
            return F.join_mean_scale(m0, V0)
        if t >= 1:
            return F.join_mean_scale(m1, V1)
        m, V, _, _ = stack(np.array([t]))
        return F.join_mean_scale(m[0], V[0])

    def deriv(t):
        _, _, dm, dV = stack(np.array([t]))
        return F.join_mean_scale(dm[0], dV[0])

    curve = Curve(fn, "pullback", {"embedding": e, "constants": k, "deriv": deriv})
    ts = np.linspace(0.0, 1.0, int(T))
    m, V, dm, dV = stack(ts)
    speeds = F.elliptical_length_elements(k, m, V, dm, dV)
    return curve, float(simpson(speeds, x=ts))


def lerp_curve(theta0, theta1) -> Curve:
    a = np.asarray(theta0, dtype=float).copy()
    b = np.asarray(theta1, dtype=float).copy()
    return Curve(lambda t: (1 - t) * a + t * b, "lerp", {"deriv": lambda t: b - a})


def lerp_curve_ub(model, theta0, theta1, T: int = 513, method="simpson") -> float:
    """Discretized length of the chart-straight segment from ``theta0`` to ``theta1``.

    The exact length of that segment bounds the distance; the value returned
    is its ``T``-point estimate (Simpson quadrature of the speed by default,
    see :func:`fisherrao.manifold.curve_length` for the other methods).
    Raises :class:`DomainError` if a sample leaves the domain.
    """
    a, b = model.check(theta0), model.check(theta1)
    if np.array_equal(a, b):
        return 0.0
    return curve_length(model, lerp_curve(a, b), T, method)


# ---------------------------------------------------------------------------
# sphere embedding


def hellinger_lb(p, q) -> float:
    """Hellinger distance ``sqrt(1 - sum sqrt(p q))``, below the categorical Fisher-Rao distance."""
    return F.categorical_hellinger(p, q)


def bhattacharyya_arc_lb(model, theta0, theta1) -> float:
    """``2 arccos(BC)`` with ``BC = int sqrt(p0 p1)``.

    ``p -> 2 sqrt(p)`` maps any model isometrically into the sphere of
    radius 2 of ``L^2``, so the great-circle distance is a lower bound; it is
    tight at infinitesimal scale.
    """
    bc = model.op("bhattacharyya")(model.check(theta0), model.check(theta1))
    return 2.0 * math.acos(min(1.0, max(-1.0, bc)))


# ---------------------------------------------------------------------------
# default providers per family


def _is_normal_elliptical(model) -> bool:
    k = model.constants
    return isinstance(k, F.EllipticalConstants) and k.a == 0.25 and k.b == 0.25


def lower_providers(model, exact: bool = False) -> list:
    """Candidate lower bounds ``(name, fn)`` declared for ``model``."""
    out = []
    if exact and model.has("closed_distance"):
        out.append(("exact", model.op("closed_distance")))
    if model.has("bhattacharyya"):
        out.append(("bhattacharyya_arc", lambda a, b: bhattacharyya_arc_lb(model, a, b)))
    if _is_normal_elliptical(model):
        d = model.constants.d
        out.append(("calvo_oller", lambda a, b: calvo_oller_lb(F.split_mean_scale(a, d),
                                                                F.split_mean_scale(b, d))))
    return out


def upper_providers(model, exact: bool = False, T: int = 257,
                    embedding: CalvoOllerEmbedding = DEFAULT_EMBEDDING) -> list:
    """Candidate upper bounds ``(name, fn)`` declared for ``model``.

    ``embedding`` selects the cone embedding of the pulled-back Birkhoff
    curve; any embedding gives a realizable curve, hence a valid bound.
    """
    out = []
    if exact and model.has("closed_distance"):
        out.append(("exact", model.op("closed_distance")))
    if model.has("hessian_potential"):
        out.append(("jeffreys_bregman", lambda a, b: family_jeffreys_bregman_ub(model, a, b)))
    if isinstance(model.constants, F.EllipticalConstants):
        k = model.constants
        d = k.d
        out.append(("pullback_birkhoff", lambda a, b: pullback_birkhoff_curve(
            F.split_mean_scale(a, d), F.split_mean_scale(b, d), embedding, T=T,
            constants=k)[1]))
    return out


def default_bounds(model, exact: bool = False, T: int = 257,
                   embedding: CalvoOllerEmbedding = DEFAULT_EMBEDDING):
    """Best available ``(lower, upper)`` functions returning ``(value, method)``.

    Lower bounds are combined with ``max`` and upper bounds with ``min``.
    With ``exact=False`` (the setting used by the approximation schemes)
    the closed-form distance is used only when a side has no other
    provider. A side with nothing at all falls back to ``0`` (lower) or the
    Fisher-Manhattan bound (upper) when available.
    """
    lows = lower_providers(model, exact)
    ups = upper_providers(model, exact, T, embedding)
    if not lows and model.has("closed_distance"):
        lows = [("exact", model.op("closed_distance"))]
    if not ups and model.has("closed_distance"):
        ups = [("exact", model.op("closed_distance"))]
    if not ups and (model.has("per_axis_1d_distance") or model.box_domain):
        ups = [("fisher_manhattan", lambda a, b: fisher_manhattan_ub(model, a, b))]

    def lower(a, b):
        if not lows:
            return 0.0, "trivial"
        vals = [(fn(a, b), name) for name, fn in lows]
        return max(vals, key=lambda v: v[0])

    def upper(a, b):
        if not ups:
            raise CapabilityError(f"family {model.name!r} has no upper-bound provider")
        vals = [(fn(a, b), name) for name, fn in ups]
        return min(vals, key=lambda v: v[0])

    return lower, upper


def bounds(model, theta0, theta1, exact: bool = False, T: int = 257,
           embedding: CalvoOllerEmbedding = DEFAULT_EMBEDDING) -> BoundsPair:
    """Best certified bracket of ``rho(theta0, theta1)`` from the declared providers."""
    lower, upper = default_bounds(model, exact, T, embedding)
    a, b = model.check(theta0), model.check(theta1)
    lo, lm = lower(a, b)
    up, um = upper(a, b)
    return BoundsPair(float(lo), float(up), lm, um)
