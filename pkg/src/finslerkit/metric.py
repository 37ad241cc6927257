"""The averaged Riemannian metric of a norm, pointwise and over a chart."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import kernels
from ._backend import max_workers
from .diffquad import (DEFAULT_STRATEGY, build_sphere_quadrature, hessians_p2,
                       radial_function)
from .errors import NotPositiveDefiniteError
from .norms import pullback_norm

DEFAULT_RESOLUTION = 256
PD_RELATIVE_TOL = 1e-10


@lru_cache(maxsize=16)
def default_quadrature(n, resolution=DEFAULT_RESOLUTION):
    return build_sphere_quadrature(n, resolution)


@dataclass
class SymBilinearForm:
    matrix: np.ndarray
    definiteness: str
    min_eig: float
    witness: np.ndarray
    volume: Optional[float] = None
    integral_omega: Optional[float] = None
    anisotropy: Optional[float] = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, eta, nu):
        return float(np.asarray(eta) @ self.matrix @ np.asarray(nu))


def classify_form(matrix, rel_tol=PD_RELATIVE_TOL, psd_tol=1e-12):
    """Wrap a symmetric matrix with its definiteness class.

    PD means the smallest eigenvalue exceeds ``rel_tol * trace``.
    """
    m = np.asarray(matrix, dtype=float)
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    scale = max(abs(float(np.trace(m))), np.finfo(float).tiny)
    if w[0] > rel_tol * scale:
        kind = "PD"
    elif w[0] >= -psd_tol * scale:
        kind = "PSD"
    else:
        kind = "indefinite"
    return SymBilinearForm(m, kind, float(w[0]), v[:, 0])


def averaged_form(norm, quad=None, strategy=DEFAULT_STRATEGY, check=True):
    """``g(eta, nu) = integral over S1 of b_xi(eta, nu) omega``.

    All ``n(n+1)/2`` entries share one pass over the nodes. Closed-form
    norms go through the compiled kernel; callbacks, and any norm when
    ``strategy.mode == "fd"``, take the generic path.
    """
    n = norm.dim
    quad = quad if quad is not None else default_quadrature(n)
    if quad.dim != n:
        raise ValueError("quadrature and norm dimensions differ")
    canon = norm.canonical()
    if canon is not None and strategy.mode != "fd":
        G, S, rmin, rmax = kernels.indicatrix_sums(canon, quad.nodes, quad.weights)
    else:
        r = radial_function(norm, quad)
        wr = quad.weights * r ** n
        H = hessians_p2(norm, r[:, None] * quad.nodes, strategy)
        G = np.einsum("k,kij->ij", wr, H)
        S, rmin, rmax = float(np.sum(wr)), float(r.min()), float(r.max())
    if not (np.isfinite(S) and S > 0):
        raise NotPositiveDefiniteError("unit-ball volume is not positive", np.nan, np.zeros(n))
    V = S / n
    form = classify_form(G / V)
    form.volume = V
    form.integral_omega = S / V
    form.anisotropy = rmax / rmin
    if check and form.definiteness != "PD":
        raise NotPositiveDefiniteError(
            f"averaged form is not positive definite (min eigenvalue {form.min_eig:.3g}); "
            "quadrature too coarse or norm invalid",
            form.min_eig, form.witness)
    return form


@dataclass
class MetricField:
    points: np.ndarray
    forms: list = field(default_factory=list)

    def matrices(self):
        return np.array([f.matrix for f in self.forms])

    def to_records(self):
        return [{"x": x.tolist(), "g": f.matrix.tolist(), "min_eig": f.min_eig}
                for x, f in zip(self.points, self.forms)]

    def to_json(self):
        return json.dumps(self.to_records(), sort_keys=True)


def averaged_metric_field(field, grid=5, quad=None, strategy=DEFAULT_STRATEGY):
    """Averaged form of ``field.norm(x)`` at every grid point.

    ``grid`` is a per-axis count, a shape tuple, or an explicit ``(N, n)``
    array of points. Each point is computed from its own norm; no
    conformal-factor shortcut is taken.
    """
    if isinstance(grid, np.ndarray) and grid.ndim == 2:
        points = np.asarray(grid, dtype=float)
    else:
        points = field.grid(grid)
    quad = quad if quad is not None else default_quadrature(field.dim)

    def one(x):
        try:
            return averaged_form(field.norm(x), quad, strategy)
        except NotPositiveDefiniteError as exc:
            exc.where = x
            raise
        except Exception as exc:
            raise type(exc)(f"at grid point {x.tolist()}: {exc}") from exc

    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            forms = list(pool.map(one, points))
    else:
        forms = [one(x) for x in points]
    return MetricField(points, forms)


def gl_equivariance_check(norm, A, quad=None, strategy=DEFAULT_STRATEGY):
    """``max |g(p o A) - A^T g(p) A|`` over entries."""
    A = np.asarray(A, dtype=float)
    g = averaged_form(norm, quad, strategy).matrix
    g_pull = averaged_form(pullback_norm(norm, A), quad, strategy).matrix
    return float(np.max(np.abs(g_pull - A.T @ g @ A)))
