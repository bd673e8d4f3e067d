"""Command-line front end.

A request is a JSON object read from ``--input`` (or stdin)::

    {"family": "spd(2)", "task": "dist",
     "points": [[[1.5, 1], [1, 1]], [[2, 1], [1, 1]]],
     "options": {"method": "exact"}}

Flags override the matching request fields. The response is a JSON
document with an echo of the request and one record per result, each
carrying its ``kind`` and ``method``. The ``geodesic`` task writes CSV
rows ``t, theta..., length`` unless ``--format json`` is given.

Exit codes: 0 success, 2 invalid input or unknown family, 3 domain
violation, 4 missing capability, 5 numerical failure. Errors are also
written to stdout as a JSON object with an ``error`` member.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import approx as A
from . import bounds as B
from . import families as F
from .errors import (ApproximationFailure, CapabilityError, DomainError, InvalidInput,
                     NumericalFailure)
from .manifold import geodesic_bvp_oracle, length_element

FORMAT_VERSION = 1
TASKS = ("dist", "bounds", "approx", "geodesic", "matrix")
EXIT_CODES = ((InvalidInput, 2), (DomainError, 3), (CapabilityError, 4), (NumericalFailure, 5))
DEFAULT_GRID_SEGMENTS = 10
MAX_WORKERS = 8


# ---------------------------------------------------------------------------
# single tasks


def _pair(thetas, task):
    if len(thetas) != 2:
        raise InvalidInput(f"task {task!r} needs exactly two points, got {len(thetas)}")
    return thetas


def distance_estimate(model, a, b, method: str = "auto", T=None) -> A.DistanceEstimate:
    """Distance by closed form, shooting oracle, metric scaling or small-scale Jeffreys."""
    if method == "auto":
        method = "exact" if model.has("closed_distance") else "oracle"
    if method == "exact":
        return A.DistanceEstimate(float(model.distance(a, b)), "exact", method="closed_form")
    if method == "oracle":
        steps = 1024 if T is None else int(T)
        _, length = geodesic_bvp_oracle(model.metric, a, b, steps=steps)
        return A.DistanceEstimate(float(length), "approx", method="geodesic_bvp_oracle",
                                  segments=steps)
    if method == "metric-scaling":
        return A.DistanceEstimate(float(A.metric_scaling_approx(model, a, b)), "approx",
                                  method="metric_scaling")
    if method == "fdiv":
        return A.DistanceEstimate(A.fdiv_small_scale(model, a, b), "approx",
                                  method="fdiv_small_scale")
    raise InvalidInput(f"unknown dist method {method!r}")


def _bounds_task(model, thetas, opts):
    a, b = _pair(thetas, "bounds")
    T = int(opts.get("T") or 257)
    pair = B.bounds(model, a, b, T=T, embedding=_embedding(opts))
    return [A.DistanceEstimate(pair.lower, "lower", method=pair.lower_method),
            A.DistanceEstimate(pair.upper, "upper", method=pair.upper_method)]


def _approx_task(model, thetas, opts):
    a, b = _pair(thetas, "approx")
    scheme = opts.get("method") or None
    if scheme not in (None, "geodesic", "pregeodesic"):
        raise InvalidInput(f"approx method must be 'geodesic' or 'pregeodesic', got {scheme!r}")
    if opts.get("delta") is not None:
        cfg = A.ApproxConfig(delta=float(opts["delta"]))
        return [A.approx_add(model, a, b, cfg=cfg, scheme=scheme)]
    cfg = A.ApproxConfig(epsilon=float(opts.get("epsilon") or 1e-3))
    if scheme is None:
        scheme = "geodesic" if model.has("closed_geodesic") else "pregeodesic"
    return [A.SCHEMES[scheme](model, a, b, cfg)]


def _matrix_task(model, thetas, opts):
    method = opts.get("method") or "auto"
    pairs = [(i, j) for i in range(len(thetas)) for j in range(i + 1, len(thetas))]

    def one(ij):
        return distance_estimate(model, thetas[ij[0]], thetas[ij[1]], method, opts.get("T"))

    # map() yields in submission order, so the output does not depend on scheduling
    with ThreadPoolExecutor(max_workers=max(1, min(MAX_WORKERS, len(pairs)))) as pool:
        ests = list(pool.map(one, pairs))
    n = len(thetas)
    M = [[0.0] * n for _ in range(n)]
    out = []
    for (i, j), e in zip(pairs, ests):
        M[i][j] = M[j][i] = e.value
        out.append(dict(e.to_dict(), i=i, j=j))
    return out, M


# ---------------------------------------------------------------------------
# curves


def _embedding(opts):
    alpha = opts.get("alpha")
    beta = opts.get("beta")
    return B.CalvoOllerEmbedding(0.0 if alpha is None else float(alpha),
                                 1.0 if beta is None else float(beta))


def t_grid(opts) -> np.ndarray:
    """The sampling grid: ``options.t`` if given, else ``T + 1`` uniform points."""
    if opts.get("t") is not None:
        ts = np.asarray(opts["t"], dtype=float).ravel()
    else:
        T = int(opts.get("T") or DEFAULT_GRID_SEGMENTS)
        if T < 1:
            raise InvalidInput("the grid needs at least one segment")
        ts = np.linspace(0.0, 1.0, T + 1)
    if ts.size == 0 or not np.all(np.isfinite(ts)) or ts.min() < 0 or ts.max() > 1:
        raise InvalidInput("t-grid values must lie in [0, 1]")
    return ts


def build_curve(model, a, b, method: str = "auto", opts=None):
    """A curve from ``a`` to ``b`` as ``(method, t -> theta)``; ``t = 0, 1`` give ``a, b`` exactly."""
    method, fn = _curve(model, a, b, method, opts or {})
    return method, lambda t: a.copy() if t <= 0 else b.copy() if t >= 1 else fn(t)


def _curve(model, a, b, method, opts):
    if method == "auto":
        if model.has("closed_geodesic"):
            method = "geodesic"
        elif isinstance(model.constants, F.EllipticalConstants):
            method = "pullback"
        else:
            method = "oracle"
    if method in ("geodesic", "pregeodesic"):
        fn = model.op("closed_" + method)
        return method, lambda t: np.asarray(fn(a, b, t), dtype=float)
    if method == "pullback":
        k = model.constants
        if not isinstance(k, F.EllipticalConstants):
            raise CapabilityError(f"pullback curves need an elliptical family, not {model.name!r}")
        curve, _ = B.pullback_birkhoff_curve(F.split_mean_scale(a, k.d), F.split_mean_scale(b, k.d),
                                             _embedding(opts), T=3, constants=k)
        return method, curve
    if method == "lerp":
        return method, B.lerp_curve(a, b)
    if method == "oracle":
        curve, _ = geodesic_bvp_oracle(model.metric, a, b)
        return method, curve
    raise InvalidInput(f"unknown curve method {method!r}")


def emit_curve(model, curve, ts) -> list:
    """Rows ``[t, theta..., cumulative length]`` of a curve sampled on ``ts``.

    Grid end points map to the curve's end points. Consecutive samples are
    joined by their closed-form distance when the family has one (exact
    along a geodesic) and by the finite-difference length element
    otherwise.
    """
    ts = np.asarray(ts, dtype=float)
    pts = [np.asarray(curve(float(t)), dtype=float) for t in ts]
    for p in pts:
        model.check(p)
    rows, total = [], 0.0
    for i, (t, p) in enumerate(zip(ts, pts)):
        if i > 0:
            q = pts[i - 1]
            if model.has("closed_distance"):
                total += float(model.distance(q, p))
            else:
                total += float(length_element(model.metric, q, p - q))
        rows.append([float(t)] + [float(x) for x in p] + [total])
    return rows


def _csv(rows, dim) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"theta{i}" for i in range(dim)] + ["length"])
    for r in rows:
        w.writerow([repr(x) for x in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# request handling


def run(request: dict) -> dict:
    """Execute a request document and return the response document."""
    if not isinstance(request, dict):
        raise InvalidInput("the request must be a JSON object")
    family = request.get("family")
    task = request.get("task")
    points = request.get("points")
    opts = dict(request.get("options") or {})
    if not isinstance(family, str):
        raise InvalidInput("request needs a 'family' string")
    if task not in TASKS:
        raise InvalidInput(f"task must be one of {', '.join(TASKS)}, got {task!r}")
    if not isinstance(points, list) or not points:
        raise InvalidInput("request needs a non-empty 'points' list")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = F.get_family(family, points)
        thetas = [model.load(p) for p in points]
        doc = {"format_version": FORMAT_VERSION, "version": __version__,
               "request": {"family": family, "task": task, "points": points, "options": opts},
               "family": {"name": model.name, "dim": model.dim,
                          "capabilities": sorted(model.capabilities)}}
        if task == "dist":
            a, b = _pair(thetas, "dist")
            doc["results"] = [distance_estimate(model, a, b, opts.get("method") or "auto",
                                                opts.get("T")).to_dict()]
        elif task == "bounds":
            doc["results"] = [e.to_dict() for e in _bounds_task(model, thetas, opts)]
        elif task == "approx":
            doc["results"] = [e.to_dict() for e in _approx_task(model, thetas, opts)]
        elif task == "matrix":
            doc["results"], doc["matrix"] = _matrix_task(model, thetas, opts)
        else:
            a, b = _pair(thetas, "geodesic")
            method, curve = build_curve(model, a, b, opts.get("method") or "auto", opts)
            rows = emit_curve(model, curve, t_grid(opts))
            doc["results"] = [A.DistanceEstimate(rows[-1][-1], "upper", method=f"{method}_curve",
                                                 segments=len(rows) - 1).to_dict()]
            doc["curves"] = [{"method": method, "columns": ["t"] + [
                f"theta{i}" for i in range(model.dim)] + ["length"], "rows": rows}]
    doc["warnings"] = [str(w.message) for w in caught]
    return doc


def _error_doc(exc, code) -> dict:
    err = {"code": code, "type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ApproximationFailure):
        err.update(lower=exc.lower, upper=exc.upper, depth=exc.depth)
    return {"format_version": FORMAT_VERSION, "version": __version__, "error": err}


def exit_code_for(exc) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 5


def dumps(doc) -> str:
    """JSON text; floats use the shortest round-tripping repr."""
    try:
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    except ValueError:
        raise NumericalFailure("result contains a non-finite number") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fisherrao",
                                description="Fisher-Rao distances, bounds and approximations.")
    p.add_argument("--version", action="version",
                   version=f"fisherrao {__version__} (format {FORMAT_VERSION})")
    p.add_argument("--input", "-i", default="-", help="request JSON file, '-' for stdin")
    p.add_argument("--output", "-o", default="-", help="output file, '-' for stdout")
    p.add_argument("--family", help="family registry name, e.g. 'mvn(2)'")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--epsilon", type=float, help="multiplicative target of the approx task")
    p.add_argument("--delta", type=float, help="additive target of the approx task")
    p.add_argument("--segments", "-T", dest="T", type=int,
                   help="curve grid segments (geodesic) or quadrature nodes (bounds)")
    p.add_argument("--method", help="task-specific method name")
    p.add_argument("--alpha", type=float, help="cone embedding exponent for pullback curves")
    p.add_argument("--beta", type=float, help="cone embedding mean weight for pullback curves")
    p.add_argument("--seed", type=int,
                   help="recorded in the echo; every computation is deterministic")
    p.add_argument("--format", choices=("json", "csv"),
                   help="output format; defaults to csv for geodesic, json otherwise")
    p.add_argument("--timing", action="store_true", help="add wall-clock timing to the output")
    return p


def _read_request(args) -> dict:
    try:
        if args.input == "-":
            text = sys.stdin.read()
        else:
            with open(args.input, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise InvalidInput(f"cannot read request: {exc}") from None
    try:
        req = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"request is not valid JSON: {exc}") from None
    if not isinstance(req, dict):
        raise InvalidInput("the request must be a JSON object")
    opts = dict(req.get("options") or {})
    for key in ("epsilon", "delta", "T", "method", "alpha", "beta", "seed"):
        val = getattr(args, key)
        if val is not None:
            opts[key] = val
    req["options"] = opts
    if args.family is not None:
        req["family"] = args.family
    if args.task is not None:
        req["task"] = args.task
    return req


def _write(text, path):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        req = _read_request(args)
        doc = run(req)
        fmt = args.format or ("csv" if req.get("task") == "geodesic" else "json")
        if fmt == "csv":
            if "curves" not in doc:
                raise InvalidInput("csv output is only available for the geodesic task")
            text = _csv(doc["curves"][0]["rows"], doc["family"]["dim"])
        else:
            if args.timing:
                doc["timing"] = {"seconds": time.perf_counter() - start}
            text = dumps(doc)
        _write(text, args.output)
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes a structured error
        code = exit_code_for(exc)
        if not isinstance(exc, (InvalidInput, DomainError, CapabilityError, NumericalFailure)):
            if isinstance(exc, (ValueError, TypeError, KeyError, IndexError)):
                code = 2
        sys.stdout.write(dumps(_error_doc(exc, code)))
        print(f"fisherrao: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
