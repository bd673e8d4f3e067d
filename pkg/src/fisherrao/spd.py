"""Dense symmetric / SPD kernels and the two SPD-cone geometries.

Matrices are plain ``numpy.ndarray`` objects. :func:`as_sym` and
:func:`as_spd` are the validation gates for the symmetric and
symmetric-positive-definite types; every public function runs its inputs
through one of them.

Two geometries live here:

* the affine-invariant (trace) metric ``ds^2 = 1/2 tr((P^-1 dP)^2)`` of
  centered normal models, with geodesic ``P0^1/2 (P0^-1/2 P1 P0^-1/2)^t P0^1/2``
  and distance ``sqrt(1/2 sum log^2 lambda_i(P0^-1 P1))``;
* the Birkhoff (Hilbert) projective distance ``log(lambda_max / lambda_min)``
  whose geodesics are straight segments of the cone.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg as sla

from .errors import DomainError, InvalidInput, NumericalFailure

SYM_TOL = 1e-12
_EPS = np.finfo(float).eps


class EigenPair(NamedTuple):
    """Spectral decomposition ``M = Q diag(values) Q^T`` with ascending values."""

    values: np.ndarray
    vectors: np.ndarray


def as_sym(M, tol: float = SYM_TOL) -> np.ndarray:
    """Validate a real symmetric matrix and return it as a float array.

    The asymmetry allowed is ``tol * (1 + max|M_ij|)``; the returned matrix
    is exactly symmetric.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidInput(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    scale = 1.0 + float(np.max(np.abs(A)))
    if float(np.max(np.abs(A - A.T))) > tol * scale:
        raise InvalidInput("matrix is not symmetric")
    return 0.5 * (A + A.T)


def as_spd(M, tol: float = SYM_TOL) -> np.ndarray:
    """Validate a symmetric positive-definite matrix (Cholesky must succeed)."""
    A = as_sym(M, tol)
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise DomainError("matrix is not positive definite") from None
    return A


def _check_pair(P0, P1) -> tuple[np.ndarray, np.ndarray]:
    A, B = as_spd(P0), as_spd(P1)
    if A.shape != B.shape:
        raise InvalidInput(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A, B


def sym_eigen(M, tol: float = 1e-15, max_sweeps: int = 60) -> EigenPair:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius mass falls below
    ``tol * ||M||_F``. Eigenvalues are returned in ascending order with the
    matching orthonormal eigenvectors as columns.
    """
    A = as_sym(M).copy()
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return EigenPair(A.diagonal().copy(), V)
    norm = float(np.linalg.norm(A))
    if norm == 0.0:
        return EigenPair(np.zeros(n), V)
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(A[iu] ** 2)))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= _EPS * 1e-3 * norm:
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise NumericalFailure(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
    values = A.diagonal().copy()
    order = np.argsort(values, kind="stable")
    return EigenPair(values[order], V[:, order])


def sym_fn(M, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through its spectrum."""
    w, Q = sym_eigen(M)
    with np.errstate(all="ignore"):
        fw = np.asarray(f(w), dtype=float)
    if not np.all(np.isfinite(fw)):
        raise DomainError("function is undefined on the spectrum")
    out = (Q * fw) @ Q.T
    return 0.5 * (out + out.T)


def spd_fn(M, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``Q f(Lambda) Q^T`` for an SPD matrix; a non-SPD input is a DomainError."""
    w, Q = sym_eigen(M)
    if w[0] <= 0.0:
        raise DomainError("matrix is not positive definite")
    with np.errstate(all="ignore"):
        fw = np.asarray(f(w), dtype=float)
    if not np.all(np.isfinite(fw)):
        raise DomainError("function is undefined on the spectrum")
    out = (Q * fw) @ Q.T
    return 0.5 * (out + out.T)


def spd_log(M) -> np.ndarray:
    return spd_fn(M, np.log)


def spd_sqrt(M) -> np.ndarray:
    return spd_fn(M, np.sqrt)


def spd_power(M, t: float) -> np.ndarray:
    return spd_fn(M, lambda w: w ** t)


def sym_exp(S) -> np.ndarray:
    return sym_fn(S, np.exp)


def whiten(P0, P1) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(L, L^-1 P1 L^-T)`` where ``P0 = L L^T`` is the Cholesky factor.

    The second matrix has the spectrum of ``P0^-1 P1`` and is symmetric.
    """
    L = np.linalg.cholesky(P0)
    X = sla.solve_triangular(L, P1, lower=True)
    M = sla.solve_triangular(L, X.T, lower=True)
    return L, 0.5 * (M + M.T)


def relative_spectrum(P0, P1) -> np.ndarray:
    """Ascending eigenvalues of ``P0^-1 P1`` (both SPD)."""
    A, B = _check_pair(P0, P1)
    return sym_eigen(whiten(A, B)[1]).values


def spd_geodesic(P0, P1, t: float) -> np.ndarray:
    """Point at time ``t`` of the affine-invariant geodesic from ``P0`` to ``P1``.

    Computed by congruence with the Cholesky factor of ``P0`` and one
    eigendecomposition of the whitened matrix; ``t`` outside ``[0, 1]``
    extrapolates along the same geodesic.
    """
    A, B = _check_pair(P0, P1)
    if t == 0:
        return A.copy()
    L, M = whiten(A, B)
    w, Q = sym_eigen(M)
    inner = (Q * w ** float(t)) @ Q.T
    out = L @ inner @ L.T
    return 0.5 * (out + out.T)


def spd_distance(P0, P1) -> float:
    """Affine-invariant Fisher-Rao distance ``sqrt(1/2 sum log^2 lambda_i)``."""
    A, B = _check_pair(P0, P1)
    if np.array_equal(A, B):
        return 0.0
    lam = relative_spectrum(A, B)
    return math.sqrt(0.5 * float(np.sum(np.log(lam) ** 2)))


def ahm_midpoint(P0, P1, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Geometric mean of two SPD matrices by the arithmetic-harmonic mean iteration.

    ``A <- (A + H)/2`` and ``H <- 2 (A^-1 + H^-1)^-1`` are updated jointly
    from ``(P0, P1)``; both sequences converge quadratically to the
    geodesic midpoint.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    A, H = _check_pair(P0, P1)
    for _ in range(max_iter + 1):
        if np.linalg.norm(A - H) <= tol * np.linalg.norm(A):
            return A
        A_next = 0.5 * (A + H)
        H = 2.0 * np.linalg.inv(np.linalg.inv(A) + np.linalg.inv(H))
        H = 0.5 * (H + H.T)
        A = A_next
    raise NumericalFailure(f"AHM iteration did not converge in {max_iter} iterations")


def _start_vector(n: int) -> np.ndarray:
    v = np.random.default_rng(12345).standard_normal(n)
    return v / np.linalg.norm(v)


def extreme_eigs(M, tol: float = 1e-12) -> tuple[float, float]:
    """Smallest and largest eigenvalues of an SPD matrix.

    ``lambda_max`` comes from power iteration on ``M`` and ``lambda_min``
    from inverse iteration with Cholesky solves. Iteration stops when the
    residual ``||M v - mu v||`` drops below ``tol * mu``. If either
    iteration exhausts its budget ``10 d log(1/tol)`` (tightly clustered
    extremes converge slowly), the values are taken from the full Jacobi
    spectrum instead.
    """
    A = as_spd(M)
    n = A.shape[0]
    if n == 1:
        return float(A[0, 0]), float(A[0, 0])
    cap = max(50, int(math.ceil(10 * n * math.log(1.0 / tol))))
    chol = sla.cho_factor(A, lower=True)

    def iterate(step):
        v = _start_vector(n)
        for _ in range(cap):
            w = step(v)
            nw = np.linalg.norm(w)
            if not math.isfinite(nw) or nw == 0.0:
                return None
            v = w / nw
            Av = A @ v
            mu = float(v @ Av)
            if np.linalg.norm(Av - mu * v) <= tol * abs(mu):
                return mu
        return None

    hi = iterate(lambda v: A @ v)
    lo = iterate(lambda v: sla.cho_solve(chol, v))
    if hi is None or lo is None:
        w = sym_eigen(A).values
        lo, hi = float(w[0]), float(w[-1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0:
        raise NumericalFailure("extreme eigenvalue iteration failed")
    return lo, hi


def birkhoff_distance(P0, P1, tol: float = 1e-12) -> float:
    """Birkhoff projective distance ``log(lambda_max / lambda_min)`` of ``P0^-1 P1``."""
    A, B = _check_pair(P0, P1)
    if np.array_equal(A, B):
        return 0.0
    lo, hi = extreme_eigs(whiten(A, B)[1], tol)
    return max(0.0, math.log(hi / lo))


def birkhoff_coefficients(P0, P1, tol: float = 1e-12, derivative: bool = False):
    """Mixing weights ``t -> (c0, c1)`` of the Birkhoff geodesic ``c0 P0 + c1 P1``.

    With ``alpha, beta`` the extreme eigenvalues of ``P0^-1 P1``, the weights
    are ``(beta alpha^t - alpha beta^t)/(beta - alpha)`` and
    ``(beta^t - alpha^t)/(beta - alpha)``. Taking the spectrum of ``P0^-1 P1``
    (rather than its inverse) makes the curve proportional to Birkhoff
    arclength: ``birkhoff_distance(P0, gamma(t)) = t * birkhoff_distance(P0, P1)``.
    When ``beta - alpha <= 1e-12 beta`` the continuous limit
    ``((1 - t) alpha^t, t alpha^(t-1))`` is used; for ``P1 = c P0`` it gives
    ``c^t P0``.

    The returned function accepts scalars or arrays of ``t``; with
    ``derivative=True`` it returns ``(c0, c1, dc0/dt, dc1/dt)``.
    """
    A, B = _check_pair(P0, P1)
    alpha, beta = extreme_eigs(whiten(A, B)[1], tol)
    la, lb = math.log(alpha), math.log(beta)

    if beta - alpha <= 1e-12 * beta:
        def coeffs(t):
            t = np.asarray(t, dtype=float)
            at, at1 = alpha ** t, alpha ** (t - 1.0)
            c = ((1.0 - t) * at, t * at1)
            if not derivative:
                return c
            return c + (-at + (1.0 - t) * at * la, at1 + t * at1 * la)
    else:
        def coeffs(t):
            t = np.asarray(t, dtype=float)
            at, bt = alpha ** t, beta ** t
            c = ((beta * at - alpha * bt) / (beta - alpha), (bt - at) / (beta - alpha))
            if not derivative:
                return c
            return c + ((beta * at * la - alpha * bt * lb) / (beta - alpha),
                        (bt * lb - at * la) / (beta - alpha))
    return coeffs


def birkhoff_geodesic(P0, P1, t: float) -> np.ndarray:
    """Point at ``t`` in ``[0, 1]`` of the straight Birkhoff geodesic from ``P0`` to ``P1``."""
    if not 0.0 <= t <= 1.0:
        raise InvalidInput("t must lie in [0, 1]")
    A, B = _check_pair(P0, P1)
    if t == 0:
        return A.copy()
    if t == 1:
        return B.copy()
    c0, c1 = birkhoff_coefficients(A, B)(t)
    return c0 * A + c1 * B


def vech(S) -> np.ndarray:
    """Upper-triangular entries of a symmetric matrix, row by row."""
    S = np.asarray(S, dtype=float)
    return S[np.triu_indices(S.shape[0])]


def unvech(v, d: int) -> np.ndarray:
    """Inverse of :func:`vech`."""
    v = np.asarray(v, dtype=float)
    if v.shape != (d * (d + 1) // 2,):
        raise InvalidInput(f"expected {d * (d + 1) // 2} coordinates for a {d}x{d} matrix")
    S = np.zeros((d, d))
    S[np.triu_indices(d)] = v
    return S + np.triu(S, 1).T


def vech_basis(d: int) -> np.ndarray:
    """Symmetric basis matrices ``E_a`` with ``S = sum_a vech(S)_a E_a``."""
    k = d * (d + 1) // 2
    E = np.zeros((k, d, d))
    for a, (i, j) in enumerate(zip(*np.triu_indices(d))):
        E[a, i, j] = E[a, j, i] = 1.0
    return E


def vech_dim(k: int) -> int:
    """Matrix size ``d`` with ``d (d + 1) / 2 == k``."""
    d = int(round((math.sqrt(8 * k + 1) - 1) / 2))
    if d * (d + 1) // 2 != k:
        raise InvalidInput(f"{k} is not a triangular number")
    return d
