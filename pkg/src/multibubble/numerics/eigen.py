"""Smallest eigenpairs of symmetric generalized pencils A x = mu M x.

Both matrices are sparse and banded; M must be positive definite.  Tridiagonal
pencils get exact inertia counts (Sturm sequences of the LDL^T pivots of
A - sigma M), so each shift is placed inside the right eigenvalue bracket before
inverse iteration.  Other pencils, optionally with a symmetric low-rank term
U U^T added to A, use shifted inverse iteration followed by Rayleigh-quotient
iteration, with Woodbury solves for the low-rank part.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu


class ConditioningError(RuntimeError):
    pass


def _as_csc(A):
    return sp.csc_matrix(A) if not sp.issparse(A) else A.tocsc()


def _bandwidth(A) -> int:
    coo = A.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def _tridiag(A):
    return A.diagonal(0), A.diagonal(1)


def sturm_count(A_diag, A_off, M_diag, M_off, sigma: float) -> int:
    """Number of eigenvalues of the tridiagonal pencil strictly below ``sigma``."""
    a = A_diag - sigma * M_diag
    b = A_off - sigma * M_off
    count = 0
    d = a[0]
    tiny = 1e-300
    if d < 0:
        count += 1
    for i in range(1, a.size):
        if d == 0.0:
            d = tiny
        d = a[i] - b[i - 1] ** 2 / d
        if d < 0:
            count += 1
    return count


def _update_count(A_diag, A_off, M_diag, M_off, U, sigma: float) -> int:
    """Eigenvalues of the pencil (T + U U^T, M) below sigma, T tridiagonal.

    Haynsworth inertia additivity on [[T - sigma M, U], [U^T, -I]] gives
    neg(T - sigma M + U U^T) = neg(T - sigma M) + pos(I + U^T (T - sigma M)^-1 U) - p.
    """
    d = A_diag - sigma * M_diag
    e = A_off - sigma * M_off
    ab = np.zeros((3, d.size))
    ab[0, 1:] = e
    ab[1] = d
    ab[2, :-1] = e
    Z = solve_banded((1, 1), ab, U)
    cap = np.eye(U.shape[1]) + U.T @ Z
    pos = int(np.sum(np.linalg.eigvalsh(0.5 * (cap + cap.T)) > 0))
    return sturm_count(A_diag, A_off, M_diag, M_off, sigma) + pos - U.shape[1]


def _gershgorin_lower(A, M) -> float:
    m = M.diagonal()
    if _bandwidth(M) != 0:
        raise ValueError("lower_bound is required when the metric is not diagonal")
    s = 1.0 / np.sqrt(m)
    S = sp.diags(s) @ A @ sp.diags(s)
    S = S.tocsr()
    d = S.diagonal()
    off = np.asarray(abs(S).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - off))


class _ShiftedSolver:
    """Solves (A + U U^T - sigma M) x = rhs."""

    def __init__(self, A, M, sigma, U=None):
        try:
            self.lu = splu(_as_csc(A - sigma * M))
        except RuntimeError as exc:
            raise ConditioningError(f"factorization failed at shift {sigma:.6g}: {exc}") from exc
        self.U = U
        if U is not None:
            Z = self.lu.solve(U)
            cap = np.eye(U.shape[1]) + U.T @ Z
            self.Z = Z
            self.cap = np.linalg.inv(cap)

    def solve(self, rhs):
        x = self.lu.solve(rhs)
        if self.U is not None:
            x = x - self.Z @ (self.cap @ (self.U.T @ x))
        if not np.all(np.isfinite(x)):
            raise ConditioningError("non-finite solve in inverse iteration")
        return x


def _deflate(x, found, M):
    for v in found:
        x = x - v * (v @ (M @ x))
    return x


def _normalize(x, M):
    n = np.sqrt(x @ (M @ x))
    return x / n


def _apply(A, U, x):
    y = A @ x
    if U is not None:
        y = y + U @ (U.T @ x)
    return y


def _rayleigh(A, M, U, x):
    return float(x @ _apply(A, U, x)) / float(x @ (M @ x))


def _inverse_iterate(A, M, U, sigma, x, found, tol, maxiter):
    solver = _ShiftedSolver(A, M, sigma, U)
    mu = _rayleigh(A, M, U, x)
    for _ in range(maxiter):
        x = _normalize(_deflate(solver.solve(M @ x), found, M), M)
        mu_new = _rayleigh(A, M, U, x)
        res = _apply(A, U, x) - mu_new * (M @ x)
        if np.linalg.norm(res) <= tol * max(1.0, abs(mu_new)) * np.linalg.norm(M @ x):
            return mu_new, x, True
        if abs(mu_new - mu) <= tol * max(1.0, abs(mu_new)):
            return mu_new, x, True
        mu = mu_new
    return mu, x, False


def smallest_eigenpairs(A, M, count: int, *, lower_bound: float | None = None, update=None,
                        tol: float = 1e-13, seed: int = 0, maxiter: int = 200):
    """Return the ``count`` algebraically smallest eigenvalues and M-orthonormal vectors.

    ``update`` is an optional (n, p) array U; the pencil is then (A + U U^T, M).
    """
    A = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
    M = sp.csr_matrix(M) if not sp.issparse(M) else M.tocsr()
    n = A.shape[0]
    if count < 1 or count > n:
        raise ValueError("count out of range")
    U = None if update is None else np.asarray(update, float).reshape(n, -1)
    # symmetric diagonal equilibration; congruence keeps eigenvalues and inertia
    scale = 1.0 / np.sqrt(M.diagonal())
    S = sp.diags(scale)
    A, M = (S @ A @ S).tocsr(), (S @ M @ S).tocsr()
    if U is not None:
        U = scale[:, None] * U
    if lower_bound is None:
        # U U^T is positive semidefinite, so the bound for A alone suffices
        lower_bound = _gershgorin_lower(A, M) - 1e-8
    rng = np.random.default_rng(seed)
    found, vals = [], []
    tridiagonal = _bandwidth(A) <= 1 and _bandwidth(M) <= 1

    if tridiagonal:
        ad, ao = _tridiag(A)
        md, mo = _tridiag(M)
        if U is None:
            counter = lambda sig: sturm_count(ad, ao, md, mo, sig)
        else:
            counter = lambda sig: _update_count(ad, ao, md, mo, U, sig)
        lo0 = lower_bound
        if counter(lo0) > 0:
            raise ConditioningError("lower bound is not below the spectrum")
        hi0 = lo0 + 1.0
        while counter(hi0) < count:
            hi0 = lo0 + 2.0 * (hi0 - lo0)
        for j in range(count):
            lo, hi = lo0, hi0
            # bracket mu_j: count(lo) <= j < count(hi)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if counter(mid) <= j:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-15 * max(1.0, abs(hi)) + 1e-300:
                    break
            lo0 = lo
            sigma = lo - max(1e-3 * (hi - lo), 1e-11 * max(1.0, abs(lo)))
            x = _normalize(_deflate(rng.standard_normal(n), found, M), M)
            mu, x, ok = _inverse_iterate(A, M, U, sigma, x, found, tol, maxiter)
            if not ok:
                raise ConditioningError(f"inverse iteration did not converge for pair {j}")
            found.append(x)
            vals.append(mu)
        return np.array(vals), scale[:, None] * np.column_stack(found)

    for j in range(count):
        x = _normalize(_deflate(rng.standard_normal(n), found, M), M)
        # plain inverse iteration below the spectrum, then Rayleigh-quotient refinement
        mu, x, _ = _inverse_iterate(A, M, U, lower_bound, x, found, 1e-6, maxiter)
        for _ in range(30):
            mu_prev = mu
            mu, x, ok = _inverse_iterate(A, M, U, mu - 1e-10 * max(1.0, abs(mu)), x, found, tol, 3)
            if ok or abs(mu - mu_prev) <= tol * max(1.0, abs(mu)):
                break
        found.append(x)
        vals.append(mu)
    order = np.argsort(vals)
    return np.array(vals)[order], scale[:, None] * np.column_stack(found)[:, order]
