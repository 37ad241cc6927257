"""Similarity fits and directional-stretch tests for maps of Minkowski spaces.

A map is conformal for a norm p at x exactly when ``p(df_x xi) / p(xi)`` does
not depend on ``xi``. The spread of that ratio over many directions is the
numerical handle used here.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .conformal import unit_directions
from .errors import DegenerateSamplingError, NumericalFailure
from .metric import averaged_form


@dataclass
class DifferentiableMap:
    func: Callable
    jac: Optional[Callable] = None
    name: str = "map"

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x, h=1e-6):
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        n = x.shape[0]
        J = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h * max(1.0, abs(x[j]))
            J[:, j] = (self(x + e) - self(x - e)) / (2.0 * e[j])
        return J


def inversion_map(metric=None):
    """``q -> q / g(q, q)``; the Euclidean unit-sphere inversion when ``metric`` is None."""
    G = None if metric is None else np.asarray(metric, dtype=float)

    def func(q):
        Gq = q if G is None else G @ q
        return q / (q @ Gq)

    def jac(q):
        Gq = q if G is None else G @ q
        s = q @ Gq
        return (s * np.eye(q.shape[0]) - 2.0 * np.outer(q, Gq)) / (s * s)

    return DifferentiableMap(func, jac, "inversion" if G is None else "g-inversion")


def averaged_inversion(norm, quad=None):
    """Inversion in the unit sphere of the averaged metric of ``norm``."""
    return inversion_map(averaged_form(norm, quad).matrix)


def similarity_map(mu, A, b):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return DifferentiableMap(lambda x: mu * (A @ x) + b, lambda x: mu * A, "similarity")


def mobius_bar_map(mobius):
    return DifferentiableMap(lambda q: mobius.bar(q)[0], mobius.bar_differential, "mobius-bar")


def directional_stretch_spread(norm, fmap, x, directions=None, n_directions=128, seed=0):
    """``max - min`` of ``p(df_x xi)`` over F-unit directions ``xi``."""
    x = np.asarray(x, dtype=float)
    J = fmap.jacobian(x)
    if not np.all(np.isfinite(J)):
        raise NumericalFailure("map differential is non-finite")
    if abs(np.linalg.det(J)) < 1e-14 * max(1.0, np.abs(J).max()) ** len(x):
        raise NumericalFailure("map differential is singular")
    u = unit_directions(norm.dim, n_directions, seed) if directions is None \
        else np.atleast_2d(np.asarray(directions, dtype=float))
    xi = u / norm.values(u)[:, None]
    stretch = norm.values(xi @ J.T)
    return float(stretch.max() - stretch.min())


@dataclass
class SimilarityFit:
    mu: float
    A: np.ndarray
    b: np.ndarray
    residual: float

    def __call__(self, x):
        return self.mu * (np.asarray(x) @ self.A.T) + self.b

    def to_dict(self):
        return {"mu": self.mu, "A": self.A.tolist(), "b": self.b.tolist(), "residual": self.residual}


def fit_similarity(X, Y):
    """Least-squares fit of ``Y ~ mu A X + b`` with orthogonal A (Umeyama).

    Reflections are allowed in A. The residual is the largest Euclidean
    misfit over the samples.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape:
        raise ValueError("sample arrays must have the same shape")
    N, n = X.shape
    if N < n + 2:
        raise DegenerateSamplingError(f"need at least {n + 2} samples, got {N}")
    xm, ym = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - xm, Y - ym
    if np.linalg.matrix_rank(Xc, tol=1e-10 * max(1.0, np.abs(Xc).max())) < n:
        raise DegenerateSamplingError("samples are not in general position")
    U, S, Vt = np.linalg.svd(Yc.T @ Xc / N)
    A = U @ Vt
    mu = float(S.sum() / (np.sum(Xc * Xc) / N))
    b = ym - mu * A @ xm
    residual = float(np.max(np.linalg.norm(Y - (mu * X @ A.T + b), axis=1)))
    return SimilarityFit(mu, A, b, residual)


def sample_map(fmap, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([fmap(x) for x in X])


def annulus_samples(n, count, r_min=0.5, r_max=2.0, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * rng.uniform(r_min, r_max, count)[:, None]
