"""Batched norm kernels: values, Hessians of p^2, and indicatrix sums.

Every built-in norm reduces to the canonical form

    p(xi) = lam * base(M @ xi)

with ``base`` one of three closed-form families (``EUCLID``, ``EVEN_P``,
``RANDERS``). The kernels below take that canonical tuple plus a batch of
vectors. Each public function dispatches to a numba-compiled loop or to a
vectorised numpy implementation depending on :mod:`finslerkit._backend`.
"""

import math

import numpy as np

from . import _backend
from ._backend import njit

EUCLID = 0
EVEN_P = 1
RANDERS = 2


# --------------------------------------------------------------------------
# scalar building blocks (compiled)
# --------------------------------------------------------------------------

@njit
def _base_value(kind, P, mat, vec, y):
    n = y.shape[0]
    if kind == 1:
        s = 0.0
        for i in range(n):
            s += y[i] ** P
        return s ** (1.0 / P)
    q = 0.0
    for i in range(n):
        for j in range(n):
            q += y[i] * mat[i, j] * y[j]
    alpha = math.sqrt(q)
    if kind == 0:
        return alpha
    b = 0.0
    for i in range(n):
        b += vec[i] * y[i]
    return alpha + b


@njit
def _base_hess_p2(kind, P, mat, vec, y, out):
    n = y.shape[0]
    if kind == 0:
        for i in range(n):
            for j in range(n):
                out[i, j] = 2.0 * mat[i, j]
        return
    if kind == 1:
        s = 0.0
        for i in range(n):
            s += y[i] ** P
        c_outer = 2.0 * (2.0 - P) * s ** (2.0 / P - 2.0)
        c_diag = 2.0 * (P - 1.0) * s ** (2.0 / P - 1.0)
        for i in range(n):
            yi = y[i] ** (P - 1)
            for j in range(n):
                out[i, j] = c_outer * yi * y[j] ** (P - 1)
            out[i, i] += c_diag * y[i] ** (P - 2)
        return
    # Randers: p = alpha + beta.y, Hess(p^2) = 2 (grad p grad p^T + p Hess alpha)
    ay = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += mat[i, j] * y[j]
        ay[i] = acc
    q = 0.0
    b = 0.0
    for i in range(n):
        q += y[i] * ay[i]
        b += vec[i] * y[i]
    alpha = math.sqrt(q)
    p = alpha + b
    for i in range(n):
        gi = ay[i] / alpha + vec[i]
        for j in range(n):
            gj = ay[j] / alpha + vec[j]
            h_alpha = (mat[i, j] - ay[i] * ay[j] / q) / alpha
            out[i, j] = 2.0 * (gi * gj + p * h_alpha)


@njit
def _values_nb(kind, P, mat, vec, M, lam, X):
    N, n = X.shape
    out = np.empty(N)
    y = np.empty(n)
    for k in range(N):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * X[k, j]
            y[i] = acc
        out[k] = lam * _base_value(kind, P, mat, vec, y)
    return out


@njit
def _pullback_hess(M, lam, hb, out):
    n = M.shape[0]
    lam2 = lam * lam
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for a in range(n):
                ma = M[a, i]
                if ma == 0.0:
                    continue
                for c in range(n):
                    acc += ma * hb[a, c] * M[c, j]
            out[i, j] = lam2 * acc


@njit
def _hessians_nb(kind, P, mat, vec, M, lam, X):
    N, n = X.shape
    out = np.empty((N, n, n))
    y = np.empty(n)
    hb = np.empty((n, n))
    h = np.empty((n, n))
    for k in range(N):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * X[k, j]
            y[i] = acc
        _base_hess_p2(kind, P, mat, vec, y, hb)
        _pullback_hess(M, lam, hb, h)
        for i in range(n):
            for j in range(n):
                out[k, i, j] = h[i, j]
    return out


@njit
def _indicatrix_sums_nb(kind, P, mat, vec, M, lam, U, w):
    N, n = U.shape
    G = np.zeros((n, n))
    S = 0.0
    rmin = np.inf
    rmax = 0.0
    y = np.empty(n)
    hb = np.empty((n, n))
    h = np.empty((n, n))
    for k in range(N):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * U[k, j]
            y[i] = acc
        pu = lam * _base_value(kind, P, mat, vec, y)
        r = 1.0 / pu
        if r < rmin:
            rmin = r
        if r > rmax:
            rmax = r
        wr = w[k] * r ** n
        S += wr
        # Hess(p^2) is 0-homogeneous, so evaluating at u equals evaluating at r u
        _base_hess_p2(kind, P, mat, vec, y, hb)
        _pullback_hess(M, lam, hb, h)
        for i in range(n):
            for j in range(n):
                G[i, j] += wr * h[i, j]
    return G, S, rmin, rmax


# --------------------------------------------------------------------------
# numpy fallback
# --------------------------------------------------------------------------

def _base_values_np(kind, P, mat, vec, Y):
    if kind == EVEN_P:
        return np.sum(Y ** P, axis=1) ** (1.0 / P)
    alpha = np.sqrt(np.einsum("ki,ij,kj->k", Y, mat, Y))
    if kind == EUCLID:
        return alpha
    return alpha + Y @ vec


def _base_hessians_np(kind, P, mat, vec, Y):
    N, n = Y.shape
    if kind == EUCLID:
        return np.broadcast_to(2.0 * mat, (N, n, n)).copy()
    if kind == EVEN_P:
        s = np.sum(Y ** P, axis=1)
        c_outer = 2.0 * (2.0 - P) * s ** (2.0 / P - 2.0)
        c_diag = 2.0 * (P - 1.0) * s ** (2.0 / P - 1.0)
        Yp = Y ** (P - 1)
        H = c_outer[:, None, None] * Yp[:, :, None] * Yp[:, None, :]
        idx = np.arange(n)
        H[:, idx, idx] += c_diag[:, None] * Y ** (P - 2)
        return H
    AY = Y @ mat.T
    q = np.einsum("ki,ki->k", Y, AY)
    alpha = np.sqrt(q)
    p = alpha + Y @ vec
    grad = AY / alpha[:, None] + vec[None, :]
    h_alpha = (mat[None] - AY[:, :, None] * AY[:, None, :] / q[:, None, None]) / alpha[:, None, None]
    return 2.0 * (grad[:, :, None] * grad[:, None, :] + p[:, None, None] * h_alpha)


def _values_np(kind, P, mat, vec, M, lam, X):
    return lam * _base_values_np(kind, P, mat, vec, X @ M.T)


def _hessians_np(kind, P, mat, vec, M, lam, X):
    Hb = _base_hessians_np(kind, P, mat, vec, X @ M.T)
    return lam * lam * np.einsum("ai,kac,cj->kij", M, Hb, M)


def _indicatrix_sums_np(kind, P, mat, vec, M, lam, U, w):
    n = U.shape[1]
    r = 1.0 / _values_np(kind, P, mat, vec, M, lam, U)
    wr = w * r ** n
    H = _hessians_np(kind, P, mat, vec, M, lam, U)
    G = np.einsum("k,kij->ij", wr, H)
    return G, float(np.sum(wr)), float(r.min()), float(r.max())


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def _args(canon, X):
    kind, P, mat, vec, M, lam = canon
    return (int(kind), int(P), np.ascontiguousarray(mat, dtype=float),
            np.ascontiguousarray(vec, dtype=float), np.ascontiguousarray(M, dtype=float),
            float(lam), np.ascontiguousarray(X, dtype=float))


def values(canon, X, backend=None):
    """Norm values ``p(X[k])`` for a canonical tuple and an ``(N, n)`` batch."""
    backend = backend or _backend.BACKEND
    fn = _values_nb if backend == "numba" else _values_np
    return fn(*_args(canon, X))


def hessians(canon, X, backend=None):
    """Hessians of ``p^2`` at each row of ``X``; shape ``(N, n, n)``."""
    backend = backend or _backend.BACKEND
    fn = _hessians_nb if backend == "numba" else _hessians_np
    return fn(*_args(canon, X))


def indicatrix_sums(canon, U, w, backend=None):
    """Weighted radial sums over Euclidean-sphere nodes.

    Returns ``(G, S, rmin, rmax)`` with ``S = sum_k w_k r_k^n`` and
    ``G = sum_k w_k r_k^n Hess(p^2)(u_k)``, where ``r = 1/p(u)``.
    """
    backend = backend or _backend.BACKEND
    fn = _indicatrix_sums_nb if backend == "numba" else _indicatrix_sums_np
    G, S, rmin, rmax = fn(*_args(canon, U), np.ascontiguousarray(w, dtype=float))
    return G, float(S), float(rmin), float(rmax)
