"""Chart-level Riemannian machinery.

A :class:`MetricField` maps chart coordinates ``theta`` to the Fisher
information matrix ``G(theta)``. Everything here is expressed in terms of
that map: length elements, discretized curve lengths, Christoffel symbols,
the Hessian-metric test and a shooting solver for the geodesic two-point
boundary value problem (used as a validation oracle at low dimension).

Domain membership is owned by the families; a metric field only carries the
predicate it was given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline

from .errors import CapabilityError, DomainError, InvalidInput, NumericalFailure

CURVE_KINDS = ("geodesic", "pregeodesic", "lerp", "pullback", "custom")
_CBRT_EPS = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class MetricField:
    """The Fisher information matrix as a function of chart coordinates.

    ``christoffel`` may supply closed-form symbols ``Gamma[k, i, j]``;
    ``spray`` may supply the batched geodesic acceleration
    ``(theta[n, m], v[n, m]) -> -Gamma(v, v)[n, m]``. Both are optional
    accelerators for the shooting oracle; finite differences are used
    otherwise.
    """

    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    contains: Optional[Callable[[np.ndarray], bool]] = None
    christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spray: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def check(self, theta) -> np.ndarray:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        if th.shape != (self.dim,):
            raise InvalidInput(f"expected {self.dim} coordinates, got shape {th.shape}")
        if not np.all(np.isfinite(th)):
            raise InvalidInput("coordinates must be finite")
        if self.contains is not None and not self.contains(th):
            raise DomainError(f"point {th.tolist()} lies outside the domain")
        return th

    def __call__(self, theta) -> np.ndarray:
        th = self.check(theta)
        return np.atleast_2d(np.asarray(self.fn(th), dtype=float))


@dataclass(frozen=True)
class Curve:
    """A path ``t in [0, 1] -> theta(t)`` tagged with what kind of curve it is."""

    fn: Callable[[float], np.ndarray]
    kind: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise InvalidInput(f"unknown curve kind {self.kind!r}")

    def __call__(self, t: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.fn(float(t)), dtype=float))

    def sample(self, ts) -> np.ndarray:
        return np.array([self(t) for t in ts])

    def velocity(self, t: float, h: float = 1e-5) -> np.ndarray:
        """``d theta / dt``: ``meta["deriv"]`` when supplied, else second-order differences."""
        if "deriv" in self.meta:
            return np.atleast_1d(np.asarray(self.meta["deriv"](float(t)), dtype=float))
        t = float(t)
        if t - h < 0.0:
            return (-3 * self(t) + 4 * self(t + h) - self(t + 2 * h)) / (2 * h)
        if t + h > 1.0:
            return (3 * self(t) - 4 * self(t - h) + self(t - 2 * h)) / (2 * h)
        return (self(t + h) - self(t - h)) / (2 * h)


class HessianTest(NamedTuple):
    is_hessian: bool
    worst_violation: float
    where: Optional[np.ndarray]


def length_element(G: MetricField, theta, dtheta) -> float:
    """``sqrt(dtheta^T G(theta) dtheta)``."""
    M = G(theta)
    d = np.atleast_1d(np.asarray(dtheta, dtype=float))
    if d.shape != (G.dim,):
        raise InvalidInput(f"displacement must have {G.dim} entries")
    q = float(d @ M @ d)
    return math.sqrt(max(q, 0.0))


def _steps(theta: np.ndarray, h: Optional[float]) -> np.ndarray:
    if h is None:
        return _CBRT_EPS * np.maximum(1.0, np.abs(theta))
    if h <= 0:
        raise InvalidInput("finite-difference step must be positive")
    return np.full(theta.shape, float(h))


def metric_derivatives(G: MetricField, theta, h: Optional[float] = None) -> np.ndarray:
    """Central differences ``dG[k] = dG/dtheta_k`` (shape ``(m, m, m)``)."""
    th = G.check(theta)
    hs = _steps(th, h)
    dG = np.empty((G.dim, G.dim, G.dim))
    for k in range(G.dim):
        e = np.zeros(G.dim)
        e[k] = hs[k]
        dG[k] = (G(th + e) - G(th - e)) / (2.0 * hs[k])
    return dG


def christoffels(G: MetricField, theta, h: Optional[float] = None) -> np.ndarray:
    """Christoffel symbols of the second kind, ``Gamma[k, i, j] = Gamma^k_ij``.

    First-kind symbols ``1/2 (d_j g_ik + d_i g_jk - d_k g_ij)`` come from
    central differences of the metric and are raised with ``G(theta)^-1``.
    The result is symmetrized in ``(i, j)`` so the symmetry holds exactly.
    """
    th = G.check(theta)
    M = G(th)
    dG = metric_derivatives(G, th, h)  # dG[l, a, b] = d_l g_ab
    # first[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (np.transpose(dG, (2, 0, 1)) + np.transpose(dG, (2, 1, 0)) - dG)
    try:
        if np.linalg.cond(M) > 1e14:
            raise np.linalg.LinAlgError
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        raise NumericalFailure("metric is singular at the requested point") from None
    gamma = np.einsum("kl,lij->kij", Minv, first)
    return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))


def hessian_metric_test(G: MetricField, samples, h: Optional[float] = None,
                        tol: float = 1e-6) -> HessianTest:
    """Sampled test of the Hessian-metric condition ``d_k g_ij = d_j g_ik``.

    A field that is the Hessian of a potential in this chart satisfies the
    condition identically. The verdict is True when every violation is at
    most ``tol * (1 + ||G(theta)||_F)``; the largest violation (relative to
    that scale) and the sample where it occurred are reported.
    """
    worst, where = 0.0, None
    for theta in samples:
        th = G.check(theta)
        dG = metric_derivatives(G, th, h)  # dG[k, i, j] = d_k g_ij
        # d_k g_ij versus d_j g_ik: swap the derivative index with the second slot
        viol = float(np.max(np.abs(dG - np.transpose(dG, (2, 1, 0)))))
        scaled = viol / (1.0 + float(np.linalg.norm(G(th))))
        if scaled > worst or where is None:
            worst, where = max(worst, scaled), th
    return HessianTest(bool(worst <= tol), worst, where)


def _segment_measure(model, method):
    """Per-segment length estimate ``(theta_a, theta_b) -> real`` for ``method``."""
    if isinstance(method, tuple):
        # ("f-divergence", I_f, f''(1))
        _, div, f2 = method
        if f2 <= 0:
            raise InvalidInput("f''(1) must be positive")
        return lambda a, b: math.sqrt(max(0.0, 2.0 / f2 * div(a, b)))
    if method in ("exact", "exact-segments"):
        dist = model.op("distance")
        return dist
    if method == "jeffreys":
        J = model.op("jeffreys")
        return lambda a, b: math.sqrt(max(0.0, J(a, b)))
    if method == "kl":
        KL = model.op("kl")
        return lambda a, b: math.sqrt(max(0.0, 2.0 * KL(a, b)))
    if method in ("finite-difference", "fd"):
        G = model if isinstance(model, MetricField) else model.metric
        return lambda a, b: length_element(G, a, b - a)
    raise InvalidInput(f"unknown curve-length method {method!r}")


def curve_length(model, c: Curve, T: int, method="finite-difference") -> float:
    """Length of a curve discretized at ``T`` uniform times ``t_i = i/(T-1)``.

    ``method`` chooses the per-segment estimate:

    * ``"exact"``: the family's closed-form distance between consecutive samples;
    * ``"jeffreys"``: ``sqrt(D_J)`` (the f-divergence with ``f''(1) = 2``);
    * ``"kl"``: ``sqrt(2 KL)``;
    * ``("f-divergence", I_f, f2)``: ``sqrt(2/f2 * I_f)`` for any f-divergence;
    * ``"finite-difference"``: ``length_element(theta_i, theta_{i+1} - theta_i)``;
    * ``"simpson"``: Simpson quadrature of the speed ``sqrt(v^T G v)`` at the
      ``T`` samples, with ``v`` from :meth:`Curve.velocity`. This one is
      high order on smooth curves, where the others are first order
      (finite difference) or second order (divergences).

    ``model`` is a family descriptor, or a bare :class:`MetricField` for the
    finite-difference method.
    """
    if int(T) != T or T < 2:
        raise InvalidInput("T must be an integer >= 2")
    if isinstance(model, MetricField) and method not in ("finite-difference", "fd"):
        raise CapabilityError(f"a bare metric field supports only finite differences, not {method!r}")
    ts = np.linspace(0.0, 1.0, int(T))
    pts = c.sample(ts)
    ops = getattr(model, "ops", {})
    if method in ("finite-difference", "fd", "simpson"):
        G = model if isinstance(model, MetricField) else model.metric
        for p in pts:
            G.check(p)
        if method == "simpson":
            vel = np.array([c.velocity(t) for t in ts])
            if "lengths" in ops:
                speeds = ops["lengths"](pts, vel)
            else:
                speeds = np.array([length_element(G, p, v) for p, v in zip(pts, vel)])
            return float(simpson(speeds, x=ts))
        if "lengths" in ops:
            # batched left-point length elements supplied by the family
            return float(np.sum(ops["lengths"](pts[:-1], np.diff(pts, axis=0))))
    seg = _segment_measure(model, method)
    return float(sum(seg(pts[i], pts[i + 1]) for i in range(len(pts) - 1)))


def spray_from_christoffel(G: MetricField, h: Optional[float] = None):
    """Batched geodesic acceleration ``-Gamma^k_ij v^i v^j`` from a metric field."""
    if G.christoffel is not None:
        def spray(theta, v):
            out = np.empty_like(v)
            for n in range(theta.shape[0]):
                out[n] = -np.einsum("kij,i,j->k", G.christoffel(theta[n]), v[n], v[n])
            return out

        return spray

    m = G.dim
    fn = lambda th: np.atleast_2d(np.asarray(G.fn(th), dtype=float))

    def spray(theta, v):
        # inner loop of the shooting oracle: no domain checks, the integrator validates
        out = np.empty_like(v)
        for n in range(theta.shape[0]):
            th, w = theta[n], v[n]
            hs = _steps(th, h)
            dG = np.empty((m, m, m))
            for k in range(m):
                e = np.zeros(m)
                e[k] = hs[k]
                dG[k] = (fn(th + e) - fn(th - e)) / (2.0 * hs[k])
            # first-kind symbols contracted with v twice: (dG[.] v) v - 1/2 v dG v
            dGv = dG @ w  # dGv[l, a] = d_l g_ab v^b
            rhs = w @ dGv - 0.5 * np.einsum("a,lab,b->l", w, dG, w)
            try:
                out[n] = -np.linalg.solve(fn(th), rhs)
            except np.linalg.LinAlgError:
                raise NumericalFailure("metric is singular along the trajectory") from None
        return out

    return spray


def _integrate(spray, theta0, V0, steps):
    """RK4 for ``theta'' = spray(theta, theta')`` over ``t in [0, 1]``.

    ``V0`` holds a batch of initial velocities; returns positions and
    velocities at every node, shape ``(steps + 1, n, m)``.
    """
    n, m = V0.shape
    x = np.tile(theta0, (n, 1))
    v = V0.copy()
    h = 1.0 / steps
    xs = np.empty((steps + 1, n, m))
    vs = np.empty((steps + 1, n, m))
    xs[0], vs[0] = x, v
    with np.errstate(all="ignore"):
        for s in range(steps):
            k1x, k1v = v, spray(x, v)
            k2x, k2v = v + 0.5 * h * k1v, spray(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
            k3x, k3v = v + 0.5 * h * k2v, spray(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
            k4x, k4v = v + h * k3v, spray(x + h * k3x, v + h * k3v)
            x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            xs[s + 1], vs[s + 1] = x, v
    return xs, vs


def _shoot(G, spray, theta0, target, v_init, steps, tol, max_iter):
    """Damped Newton iteration on the initial velocity; returns (v0, xs, vs) or None.

    Each iteration integrates one batch holding the current velocity and its
    ``2m`` central-difference perturbations, so the residual and the
    Jacobian of the endpoint map come from a single RK4 pass.
    """
    m = G.dim
    eye = np.eye(m)

    def ok(x):
        return bool(np.all(np.isfinite(x))) and (G.contains is None or bool(G.contains(x)))

    v, step = v_init.copy(), 1.0
    prev = None  # (v, |r|, dv) of the last accepted iterate
    for _ in range(max_iter):
        hs = 1e-6 * max(1.0, float(np.linalg.norm(v)))
        xs, vs = _integrate(spray, theta0, np.concatenate([v[None], v + hs * eye, v - hs * eye]), steps)
        end = xs[-1]
        r = end[0] - target if ok(end[0]) else None
        if r is not None and prev is not None and np.linalg.norm(r) >= prev[1]:
            r = None
        if r is None:
            # reject: backtrack along the previous Newton direction
            if prev is None or step < 1.0 / 1024:
                return None
            step *= 0.5
            v = prev[0] + step * prev[2]
            continue
        nr = float(np.linalg.norm(r))
        if nr <= tol:
            return v, xs[:, 0], vs[:, 0]
        if not np.all(np.isfinite(end)):
            return None
        J = ((end[1:m + 1] - end[m + 1:]) / (2.0 * hs)).T
        try:
            dv = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        prev, step = (v, nr, dv), 1.0
        v = v + dv
    return None


def geodesic_bvp_oracle(G: MetricField, theta0, theta1, steps: int = 1024,
                        tol: float = 1e-8, max_iter: int = 100):
    """Shooting solution of the geodesic boundary value problem.

    The geodesic ODE is integrated with fixed-step classical RK4 and the
    initial velocity is corrected by damped Newton iterations with a
    central-difference Jacobian until ``||gamma(1) - theta1|| <= tol``. If
    Newton fails from the straight-line initial guess, the target is moved
    progressively from ``theta0`` to ``theta1`` (homotopy continuation).

    Returns ``(curve, length)``; the curve is the cubic Hermite interpolant
    of the RK4 nodes and the length is the Simpson quadrature of the speed
    ``sqrt(v^T G v)`` at those nodes. Intended as a validation tool for
    ``m <= 3``.
    """
    if G.dim > 3:
        raise CapabilityError("the shooting oracle is limited to charts of dimension <= 3")
    steps = int(steps)
    if steps < 2:
        raise InvalidInput("steps must be >= 2")
    a, b = G.check(theta0), G.check(theta1)
    spray = G.spray if G.spray is not None else spray_from_christoffel(G)

    sol = _shoot(G, spray, a, b, b - a, steps, tol, max_iter)
    if sol is None:
        v = b - a
        for stages in (4, 16, 64):
            v_guess = (b - a) / stages
            for s in range(1, stages + 1):
                target = a + (s / stages) * (b - a)
                sol = _shoot(G, spray, a, target, v_guess if s == 1 else sol[0] * s / (s - 1),
                             steps, tol, max_iter)
                if sol is None:
                    break
            if sol is not None:
                break
        if sol is None:
            raise NumericalFailure("geodesic shooting did not converge")
    v0, xs, vs = sol
    # the speed is smooth (constant on an exact geodesic): Simpson on about 129 nodes
    stride = max(1, steps // 128)
    while steps % stride:
        stride -= 1
    idx = np.arange(0, steps + 1, stride)
    speeds = np.array([math.sqrt(max(0.0, float(vs[i] @ G(xs[i]) @ vs[i]))) for i in idx])
    length = float(simpson(speeds, dx=stride / steps))
    ts = np.linspace(0.0, 1.0, steps + 1)
    spline = CubicHermiteSpline(ts, xs, vs, axis=0)
    xs[0], xs[-1] = a, b

    def fn(t):
        if t <= 0.0:
            return a.copy()
        if t >= 1.0:
            return b.copy()
        return spline(t)

    return Curve(fn, "geodesic", {"initial_velocity": v0, "nodes": xs, "steps": steps}), length
