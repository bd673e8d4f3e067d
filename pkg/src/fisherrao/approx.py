"""Approximation schemes for Fisher-Rao distances.

Two kinds of estimates live here:

* metric-scaling estimates, which read the length element off a short
  initial piece of a closed-form geodesic (cheap, but uncertified);
* guaranteed approximations, which shrink a pair along its geodesic until a
  certified lower/upper bracket is tight enough, then scale the upper bound
  back up.  The multiplicative variants return a value in
  ``[rho, (1 + eps) rho]``; the additive variant returns one in
  ``[rho, rho + delta]``.

Bounds are injected as callables ``(theta0, theta1) -> value`` or
``-> (value, method)``; by default the providers declared in
:func:`fisherrao.bounds.default_bounds` are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import bounds as B
from .errors import ApproximationFailure, CapabilityError, DomainError, InvalidInput
from .manifold import length_element

KINDS = ("exact", "lower", "upper", "approx")
CONTRACTS = ("none", "mult", "add")


@dataclass(frozen=True)
class ApproxConfig:
    """Targets and guards of the guaranteed approximation schemes.

    ``epsilon`` is the multiplicative target, ``delta`` the additive one;
    a scheme only reads the target it needs. Distances at or below
    ``abs_floor`` are treated as zero.
    """

    epsilon: float = 1e-3
    delta: float = 1e-4
    max_depth: int = 64
    abs_floor: float = 1e-12

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidInput(f"epsilon must be a positive number, got {self.epsilon!r}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise InvalidInput(f"delta must be a positive number, got {self.delta!r}")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise InvalidInput(f"max_depth must be an integer >= 1, got {self.max_depth!r}")
        if not self.abs_floor >= 0:
            raise InvalidInput(f"abs_floor must be >= 0, got {self.abs_floor!r}")


@dataclass(frozen=True)
class DistanceEstimate:
    """A distance value tagged with what is known about it.

    ``contract`` is ``"none"``, ``"mult"`` (value within ``(1 + tolerance)``
    times the true distance) or ``"add"`` (within ``tolerance`` of it).
    ``work`` is the recursion depth reached; ``segments`` counts the pieces
    whose upper bounds were summed.
    """

    value: float
    kind: str
    contract: str = "none"
    tolerance: Optional[float] = None
    method: str = ""
    work: int = 0
    segments: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown estimate kind {self.kind!r}")
        if self.contract not in CONTRACTS:
            raise InvalidInput(f"unknown contract {self.contract!r}")
        if (self.contract == "none") != (self.tolerance is None):
            raise InvalidInput("a tolerance is required exactly when a contract is given")
        if not self.value >= 0:
            raise InvalidInput(f"distance estimate must be >= 0, got {self.value!r}")

    def to_dict(self) -> dict:
        return {"value": self.value, "kind": self.kind, "contract": self.contract,
                "tolerance": self.tolerance, "method": self.method, "work": self.work,
                "segments": self.segments}


# ---------------------------------------------------------------------------
# metric-scaling estimates


def _geodesic_op(model):
    if not model.has("closed_geodesic"):
        raise CapabilityError(f"family {model.name!r} has no closed-form geodesic")
    return model.op("closed_geodesic")


def _check_eps_t(eps_t):
    if not 0 < eps_t <= 1:
        raise InvalidInput(f"eps_t must lie in (0, 1], got {eps_t!r}")


def metric_scaling_approx(model, theta0, theta1, eps_t: float = 1e-3) -> float:
    """Estimate ``rho`` by ``|gamma(eps_t) - theta0|_{G(theta0)} / eps_t``.

    The error is ``O(eps_t)``; the estimate is neither a lower nor an upper
    bound in general.
    """
    _check_eps_t(eps_t)
    geo = _geodesic_op(model)
    a, b = model.check(theta0), model.check(theta1)
    step = np.asarray(geo(a, b, eps_t), dtype=float) - a
    return length_element(model.metric, a, step) / eps_t


def metric_scaling_amortized(model, theta0, theta1, eps_t: float = 1e-3, k: int = 8) -> float:
    """Average the metric-scaling estimate over anchors ``s_i = (i - 1)/k``.

    Anchor ``i`` contributes ``|gamma(s_i + eps_t) - gamma(s_i)|_{G(gamma(s_i))} / eps_t``.
    With ``k = 1`` this is :func:`metric_scaling_approx`.
    """
    _check_eps_t(eps_t)
    if int(k) != k or k < 1:
        raise InvalidInput(f"k must be an integer >= 1, got {k!r}")
    geo = _geodesic_op(model)
    a, b = model.check(theta0), model.check(theta1)
    total = 0.0
    for i in range(int(k)):
        s = i / k
        p = a if i == 0 else np.asarray(geo(a, b, s), dtype=float)
        q = np.asarray(geo(a, b, s + eps_t), dtype=float)
        total += length_element(model.metric, p, q - p) / eps_t
    return total / k


def fdiv_small_scale(model, theta0, theta1, f_second_at_1: float = 2.0,
                     divergence: str = "jeffreys") -> float:
    """``sqrt(2 I_f / f''(1))``, the small-separation reading of an f-divergence.

    The defaults use the Jeffreys divergence, whose generator
    ``(u - 1) log u`` has ``f''(1) = 2``; pass ``divergence="kl"`` with
    ``f_second_at_1=1`` for the Kullback-Leibler divergence.
    """
    if not f_second_at_1 > 0:
        raise InvalidInput("f''(1) must be positive")
    I_f = model.op(divergence)(theta0, theta1)
    return math.sqrt(max(0.0, 2.0 * I_f / f_second_at_1))


# ---------------------------------------------------------------------------
# guaranteed approximations


def _as_bound(fn, name):
    def f(a, b):
        out = fn(a, b)
        if isinstance(out, tuple):
            return float(out[0]), str(out[1])
        return float(out), name

    return f


def _resolve_bounds(model, lower, upper):
    dl, du = B.default_bounds(model)
    lo = dl if lower is None else _as_bound(lower, "lower")
    up = du if upper is None else _as_bound(upper, "upper")
    return lo, up


def _fdiv_guard(model):
    if model.has("jeffreys_divergence"):
        return lambda a, b: fdiv_small_scale(model, a, b)
    if model.has("kl_divergence"):
        return lambda a, b: fdiv_small_scale(model, a, b, 1.0, "kl")
    return None


class _Bracket:
    """Evaluates the bracket of a pair and applies the degenerate guards."""

    def __init__(self, model, cfg, lower, upper):
        self.model = model
        self.cfg = cfg
        self.lower, self.upper = _resolve_bounds(model, lower, upper)
        self.guard = _fdiv_guard(model)
        self.methods = set()

    def __call__(self, a, b, depth, best):
        up, um = self.upper(a, b)
        if up <= self.cfg.abs_floor:
            return 0.0, up, True
        lo, lm = self.lower(a, b)
        if lo <= 0.0:
            if self.guard is None:
                raise ApproximationFailure(
                    "lower bound is zero while the upper bound is not: degenerate bracket",
                    *best(0.0, up), depth)
            lo, lm = self.guard(a, b), "fdiv_small_scale"
            if lo <= 0.0:
                raise ApproximationFailure(
                    "lower bound and its small-scale substitute are both zero",
                    *best(0.0, up), depth)
        self.methods.add(f"{lm}/{um}")
        return lo, up, up <= (1.0 + self.cfg.epsilon) * lo

    def method(self, scheme):
        pairs = ",".join(sorted(self.methods)) or "none"
        return f"{scheme}[{pairs}]"


def approx_mult_geodesic(model, theta0, theta1, cfg: ApproxConfig = ApproxConfig(),
                         lower: Optional[Callable] = None,
                         upper: Optional[Callable] = None) -> DistanceEstimate:
    """``(1 + eps)``-approximation by halving along the closed-form geodesic.

    While ``UB/LB > 1 + eps`` on ``(theta0, theta_k)``, replace ``theta_k``
    by the geodesic midpoint; the answer is ``2^k UB(theta0, theta_k)``.
    The geodesic must be arclength-proportional so that each halving
    divides the distance exactly by two.
    """
    geo = _geodesic_op(model)
    a, b = model.check(theta0), model.check(theta1)
    bracket = _Bracket(model, cfg, lower, upper)
    scale = 1.0
    best = lambda lo, up: (lo * scale, up * scale)
    for depth in range(cfg.max_depth + 1):
        lo, up, done = bracket(a, b, depth, best)
        if done:
            if up <= cfg.abs_floor and lo == 0.0:
                return DistanceEstimate(0.0, "exact", method="below_abs_floor", work=depth)
            return DistanceEstimate(scale * up, "approx", "mult", cfg.epsilon,
                                    bracket.method("geodesic_halving"), depth)
        if depth == cfg.max_depth:
            raise ApproximationFailure(
                f"bracket ratio {up / lo:.6g} still above 1 + eps after {depth} halvings",
                scale * lo, scale * up, depth)
        b = model.check(geo(a, b, 0.5))
        scale *= 2.0


def _pregeodesic_op(model):
    if model.has("closed_pregeodesic"):
        return model.op("closed_pregeodesic")
    if model.has("closed_geodesic"):
        return model.op("closed_geodesic")
    raise CapabilityError(f"family {model.name!r} has no closed-form pregeodesic")


def approx_mult_pregeodesic(model, theta0, theta1, cfg: ApproxConfig = ApproxConfig(),
                            lower: Optional[Callable] = None,
                            upper: Optional[Callable] = None) -> DistanceEstimate:
    """``(1 + eps)``-approximation by cutting along a pregeodesic and summing.

    A segment whose bracket is tight contributes its upper bound; any other
    segment is cut at the pregeodesic point of parameter ``1/2`` and both
    parts are processed. The cut point lies on the geodesic, so the pieces'
    distances add up to the whole even when the cut is unbalanced.
    """
    pre = _pregeodesic_op(model)
    a, b = model.check(theta0), model.check(theta1)
    bracket = _Bracket(model, cfg, lower, upper)
    total_lo = total_up = 0.0
    pending = [(a, b, 0)]
    pending_up = {}
    max_depth = segments = 0

    def best(lo, up):
        # current bracket over everything: settled pieces plus open ones
        return total_lo + lo, total_up + up + sum(pending_up.values())

    while pending:
        p, q, depth = pending.pop()
        max_depth = max(max_depth, depth)
        lo, up, done = bracket(p, q, depth, best)
        if done:
            total_up += up
            total_lo += lo
            segments += 1
            continue
        if depth == cfg.max_depth:
            raise ApproximationFailure(
                f"bracket ratio {up / lo:.6g} still above 1 + eps at depth {depth}",
                *best(lo, up), depth)
        m = np.asarray(pre(p, q, 0.5), dtype=float)
        if not model.contains(m):
            raise DomainError("pregeodesic cut point left the domain")
        pending.append((m, q, depth + 1))
        pending.append((p, m, depth + 1))
    if total_up <= cfg.abs_floor and total_lo == 0.0:
        return DistanceEstimate(0.0, "exact", method="below_abs_floor", work=max_depth)
    return DistanceEstimate(total_up, "approx", "mult", cfg.epsilon,
                            bracket.method("pregeodesic_cutting"), max_depth, segments)


SCHEMES = {"geodesic": approx_mult_geodesic, "pregeodesic": approx_mult_pregeodesic}


def approx_add(model, theta0, theta1, delta: Optional[float] = None,
               cfg: ApproxConfig = ApproxConfig(), scheme: Optional[str] = None,
               lower: Optional[Callable] = None,
               upper: Optional[Callable] = None) -> DistanceEstimate:
    """``delta``-additive approximation built on a multiplicative scheme.

    A coarse run with ``eps0 = 1`` gives ``r0 >= rho``; rerunning with
    ``eps = delta / r0`` then bounds the error by ``eps * rho <= delta``.
    """
    delta = cfg.delta if delta is None else float(delta)
    if not delta > 0:
        raise InvalidInput(f"delta must be positive, got {delta!r}")
    if scheme is None:
        scheme = "geodesic" if model.has("closed_geodesic") else "pregeodesic"
    try:
        run = SCHEMES[scheme]
    except KeyError:
        raise InvalidInput(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}") from None
    coarse = run(model, theta0, theta1, ApproxConfig(1.0, delta, cfg.max_depth, cfg.abs_floor),
                 lower, upper)
    if coarse.value <= cfg.abs_floor or coarse.value <= delta:
        # 0 <= rho <= value <= delta already
        return DistanceEstimate(coarse.value, coarse.kind, "add", delta, coarse.method,
                                coarse.work, coarse.segments)
    eps = delta / coarse.value
    fine = run(model, theta0, theta1, ApproxConfig(eps, delta, cfg.max_depth, cfg.abs_floor),
               lower, upper)
    return DistanceEstimate(fine.value, fine.kind, "add", delta, fine.method,
                            max(coarse.work, fine.work), fine.segments)
