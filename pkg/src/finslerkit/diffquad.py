"""Second differentials of p^2 and integration over the indicatrix.

The indicatrix ``S1 = {p = 1}`` is parametrised as a radial graph over the
Euclidean unit sphere, ``xi(u) = r(u) u`` with ``r = 1/p(u)``. Under that map
the surface form ``omega = Omega(xi, .)`` of the volume form normalised to
give the unit ball volume 1 pulls back to ``r(u)^n / V`` times the Euclidean
surface measure, ``V`` being the Lebesgue volume of the unit ball. So every
indicatrix integral becomes a weighted sum over sphere nodes.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidNormError, NumericalFailure


def sphere_area(n):
    """Euclidean surface area of S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class SphereQuadrature:
    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    resolution: int

    def __len__(self):
        return self.weights.shape[0]

    def integrate(self, values):
        """Sum ``w_k * values[k]`` over the leading axis."""
        values = np.asarray(values, dtype=float)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def to_json(self):
        return json.dumps({
            "dim": self.dim, "order": self.order, "resolution": self.resolution,
            "nodes": self.nodes.tolist(), "weights": self.weights.tolist(),
        })


def _circle(k):
    theta = 2.0 * np.pi * np.arange(k) / k
    nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return nodes, np.full(k, 2.0 * np.pi / k)


def build_sphere_quadrature(n, resolution=64):
    """Product rule on S^{n-1}.

    For n = 2 this is the ``resolution``-point trapezoid rule on the circle.
    For n >= 3, S^{m-1} is built from S^{m-2} as ``u = (t, sqrt(1-t^2) u')``
    with ``resolution // 2`` Gauss-Jacobi nodes in ``t`` for the weight
    ``(1-t^2)^((m-3)/2)``; for the 2-sphere that weight is 1, i.e. the usual
    Gauss-Legendre rule in ``cos(polar angle)``.
    """
    n = int(n)
    resolution = int(resolution)
    if n < 2:
        raise ValueError(f"sphere quadrature needs n >= 2, got {n}")
    if resolution < 8:
        raise ValueError(f"resolution must be >= 8, got {resolution}")
    nodes, weights = _circle(resolution)
    order = resolution - 1
    k = resolution // 2
    for m in range(3, n + 1):
        alpha = (m - 3) / 2.0
        t, wt = special.roots_jacobi(k, alpha, alpha)
        s = np.sqrt(1.0 - t * t)
        new_nodes = np.concatenate(
            [t.repeat(len(weights))[:, None], (s[:, None, None] * nodes[None]).reshape(-1, m - 1)],
            axis=1,
        )
        weights = np.outer(wt, weights).reshape(-1)
        nodes = new_nodes
        order = min(order, 2 * k - 1)
    # renormalise rows to kill the last ulp of drift from the recursive products
    nodes = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    return SphereQuadrature(n, nodes, weights, order, resolution)


# --------------------------------------------------------------------------
# Hessians of p^2
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HessianStrategy:
    """How to obtain ``D^2 p^2``.

    ``mode`` is ``"analytic"`` (the norm's closed form; error if it has
    none), ``"fd"`` (central differences with step ``step * |xi|``), or
    ``"auto"`` (analytic when available, else fd).
    """

    mode: str = "auto"
    step: float = 1e-4

    def __post_init__(self):
        if self.mode not in ("auto", "analytic", "fd"):
            raise ValueError(f"unknown Hessian mode {self.mode!r}")
        if not (1e-7 <= self.step <= 1e-3):
            raise ValueError(f"FD step must lie in [1e-7, 1e-3], got {self.step}")


DEFAULT_STRATEGY = HessianStrategy()


def _fd_hessians(norm, X, step):
    N, n = X.shape
    h = step * np.maximum(np.linalg.norm(X, axis=1), 1e-300)
    eye = np.eye(n)
    # stencil: centre, +-e_i, and the four corners for each i < j
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    offsets = [np.zeros(n)]
    for i in range(n):
        offsets += [eye[i], -eye[i]]
    for i, j in pairs:
        offsets += [eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]]
    offsets = np.array(offsets)
    pts = X[:, None, :] + h[:, None, None] * offsets[None]
    f = norm.values(pts.reshape(-1, n)).reshape(N, len(offsets)) ** 2
    H = np.empty((N, n, n))
    f0 = f[:, 0]
    h2 = h * h
    for i in range(n):
        H[:, i, i] = (f[:, 1 + 2 * i] - 2.0 * f0 + f[:, 2 + 2 * i]) / h2
    base = 1 + 2 * n
    for c, (i, j) in enumerate(pairs):
        fpp, fpm, fmp, fmm = (f[:, base + 4 * c + q] for q in range(4))
        H[:, i, j] = H[:, j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h2)
    return H


def hessians_p2(norm, X, strategy=DEFAULT_STRATEGY):
    """Batched Hessians of ``p^2`` at the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if np.any(np.all(X == 0.0, axis=1)):
        raise ValueError("Hessian of p^2 requested at the origin")
    H = None
    if strategy.mode in ("auto", "analytic"):
        H = norm.analytic_hessians(X)
        if H is None and strategy.mode == "analytic":
            raise InvalidNormError(f"{norm!r} has no analytic Hessian")
    if H is None:
        H = _fd_hessians(norm, X, strategy.step)
    if not np.all(np.isfinite(H)):
        raise NumericalFailure("non-finite Hessian entries (too close to a smoothness defect?)")
    return 0.5 * (H + np.swapaxes(H, 1, 2))


def hessian_p2(norm, xi, strategy=DEFAULT_STRATEGY):
    """The form ``b_xi(eta, nu) = D^2_xi p^2 (eta, nu)`` as an n x n array."""
    return hessians_p2(norm, np.reshape(xi, (1, -1)), strategy)[0]


# --------------------------------------------------------------------------
# indicatrix integrals
# --------------------------------------------------------------------------

def radial_function(norm, quad):
    """``r(u_k) = 1 / p(u_k)`` at the quadrature nodes."""
    if quad.dim != norm.dim:
        raise ValueError("quadrature and norm dimensions differ")
    p = norm.values(quad.nodes)
    with np.errstate(divide="ignore"):
        r = 1.0 / p
    if not np.all(np.isfinite(r)) or np.any(p <= 0):
        raise InvalidNormError("norm vanishes or is non-finite on the unit sphere")
    return r


def unit_ball_volume(norm, quad):
    """Lebesgue volume of ``{p <= 1}``: ``(1/n) sum_k w_k r_k^n``."""
    r = radial_function(norm, quad)
    return float(quad.weights @ r ** norm.dim) / norm.dim


def anisotropy(norm, quad):
    """``max r / min r`` over the nodes; a conditioning diagnostic only."""
    r = radial_function(norm, quad)
    return float(r.max() / r.min())


def indicatrix_integral(norm, integrand, quad, vectorized=True):
    """Integrate ``integrand`` over ``S1`` against the normalised form omega.

    ``integrand`` receives indicatrix points ``xi`` as an ``(N, n)`` array
    (or one at a time when ``vectorized=False``) and may return scalars or
    arrays per point; the result has the per-point shape.
    """
    r = radial_function(norm, quad)
    n = norm.dim
    xi = r[:, None] * quad.nodes
    if vectorized:
        vals = np.asarray(integrand(xi), dtype=float)
    else:
        vals = np.array([integrand(x) for x in xi], dtype=float)
    if vals.ndim == 0 or vals.shape[0] != len(quad):
        vals = np.broadcast_to(vals, (len(quad),) + vals.shape)
    density = quad.weights * r ** n
    V = float(np.sum(density)) / n
    out = np.tensordot(density, vals, axes=(0, 0)) / V
    return float(out) if np.ndim(out) == 0 else out
