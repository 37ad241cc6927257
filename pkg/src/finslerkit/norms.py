"""Minkowski norms, their validation, and point-dependent Finsler fields.

A norm here is any positively 1-homogeneous, subadditive function on R^n
that vanishes only at the origin. Reversibility is not assumed, so Randers
norms with ``p(-xi) != p(xi)`` are first-class citizens.

The closed-form families all reduce to ``lam * base(M @ xi)`` (see
:mod:`finslerkit.kernels`), which lets pullbacks and rescalings of them stay
on the compiled path with exact Hessians.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import InvalidNormError

SCHEMA_VERSION = 1


def _as_matrix(m, name):
    m = np.array(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidNormError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidNormError(f"{name} has non-finite entries")
    return m


def _require_spd(m, name):
    if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise InvalidNormError(f"{name} is not symmetric")
    eig = np.linalg.eigvalsh(m)
    if eig[0] <= 1e-14 * max(1.0, eig[-1]):
        raise InvalidNormError(f"{name} is not positive definite (min eigenvalue {eig[0]:.3g})")


class Norm:
    """Base class. Subclasses set ``family`` and ``dim``."""

    family = "abstract"
    dim: int

    def canonical(self):
        """``(kind, P, mat, vec, M, lam)`` for compiled kernels, or None."""
        return None

    def values(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected vectors of length {self.dim}, got {X.shape[1]}")
        canon = self.canonical()
        if canon is not None:
            return kernels.values(canon, X)
        return self._values_py(X)

    def _values_py(self, X):
        raise NotImplementedError

    def analytic_hessians(self, X):
        """Exact Hessians of p^2 at the rows of ``X``, or None if unavailable."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        canon = self.canonical()
        if canon is not None:
            return kernels.hessians(canon, X)
        return self._hessians_py(X)

    def _hessians_py(self, X):
        return None

    def __call__(self, xi):
        return float(self.values(np.reshape(xi, (1, -1)))[0])

    def to_spec(self):
        raise InvalidNormError(f"{self.family} norms are not serialisable")


class Euclidean(Norm):
    family = "euclidean"

    def __init__(self, matrix):
        self.matrix = _as_matrix(matrix, "matrix")
        _require_spd(self.matrix, "matrix")
        self.dim = self.matrix.shape[0]
        if self.dim < 2:
            raise InvalidNormError("dimension must be at least 2")

    def canonical(self):
        return (kernels.EUCLID, 2, self.matrix, np.zeros(self.dim), np.eye(self.dim), 1.0)

    def to_spec(self):
        return {"family": self.family, "matrix": self.matrix.tolist()}

    def __repr__(self):
        return f"Euclidean(dim={self.dim})"


class EvenPNorm(Norm):
    """``(sum xi_i^p)^(1/p)`` for an even integer ``p >= 2``."""

    family = "even_p"

    def __init__(self, p, dim):
        if int(p) != p or p < 2 or int(p) % 2:
            raise InvalidNormError(f"p must be an even integer >= 2, got {p}")
        if int(dim) < 2:
            raise InvalidNormError("dimension must be at least 2")
        self.p = int(p)
        self.dim = int(dim)

    def canonical(self):
        n = self.dim
        return (kernels.EVEN_P, self.p, np.zeros((n, n)), np.zeros(n), np.eye(n), 1.0)

    def to_spec(self):
        return {"family": self.family, "p": self.p, "dim": self.dim}

    def __repr__(self):
        return f"EvenPNorm(p={self.p}, dim={self.dim})"


class Randers(Norm):
    """``sqrt(a(xi, xi)) + beta . xi`` with ``|beta|_a < 1`` (dual norm of a)."""

    family = "randers"

    def __init__(self, a, beta):
        self.a = _as_matrix(a, "a")
        _require_spd(self.a, "a")
        self.beta = np.array(beta, dtype=float).reshape(-1)
        self.dim = self.a.shape[0]
        if self.beta.shape[0] != self.dim:
            raise InvalidNormError("beta length does not match a")
        if self.dim < 2:
            raise InvalidNormError("dimension must be at least 2")
        self.beta_norm = float(np.sqrt(self.beta @ np.linalg.solve(self.a, self.beta)))
        if not self.beta_norm < 1.0:
            raise InvalidNormError(f"Randers norm needs |beta|_a < 1, got {self.beta_norm:.6g}")

    def canonical(self):
        return (kernels.RANDERS, 2, self.a, self.beta, np.eye(self.dim), 1.0)

    def to_spec(self):
        return {"family": self.family, "a": self.a.tolist(), "beta": self.beta.tolist()}

    def __repr__(self):
        return f"Randers(dim={self.dim}, |beta|_a={self.beta_norm:.3g})"


class LinearPullback(Norm):
    """``xi -> base(A @ xi)``."""

    family = "pullback"

    def __init__(self, base, A):
        A = _as_matrix(A, "A")
        if A.shape[0] != base.dim:
            raise InvalidNormError("A does not match the base norm dimension")
        if abs(np.linalg.det(A)) == 0.0 or np.linalg.matrix_rank(A) < A.shape[0]:
            raise InvalidNormError("pullback matrix is singular")
        self.base = base
        self.A = A
        self.dim = base.dim

    def canonical(self):
        c = self.base.canonical()
        if c is None:
            return None
        kind, P, mat, vec, M, lam = c
        return (kind, P, mat, vec, M @ self.A, lam)

    def _values_py(self, X):
        return self.base.values(X @ self.A.T)

    def _hessians_py(self, X):
        Hb = self.base.analytic_hessians(X @ self.A.T)
        if Hb is None:
            return None
        return np.einsum("ai,kac,cj->kij", self.A, Hb, self.A)

    def to_spec(self):
        return {"family": self.family, "base": self.base.to_spec(), "A": self.A.tolist()}

    def __repr__(self):
        return f"LinearPullback({self.base!r})"


class Scaled(Norm):
    """``xi -> lam * base(xi)`` with a constant ``lam > 0``."""

    family = "scaled"

    def __init__(self, base, lam):
        lam = float(lam)
        if not (lam > 0 and np.isfinite(lam)):
            raise InvalidNormError(f"scale must be positive and finite, got {lam}")
        self.base = base
        self.lam = lam
        self.dim = base.dim

    def canonical(self):
        c = self.base.canonical()
        if c is None:
            return None
        kind, P, mat, vec, M, lam = c
        return (kind, P, mat, vec, M, lam * self.lam)

    def _values_py(self, X):
        return self.lam * self.base.values(X)

    def _hessians_py(self, X):
        Hb = self.base.analytic_hessians(X)
        return None if Hb is None else self.lam ** 2 * Hb

    def to_spec(self):
        return {"family": self.family, "base": self.base.to_spec(), "lam": self.lam}

    def __repr__(self):
        return f"Scaled({self.base!r}, lam={self.lam:g})"


class Callback(Norm):
    """User-supplied evaluator ``func(xi) -> float``.

    ``hessian``, if given, must return the Hessian of ``func**2`` at ``xi``.
    Nothing about the callback is checked at construction; use
    :func:`validate_norm`.
    """

    family = "callback"

    def __init__(self, func: Callable, dim: int, hessian: Optional[Callable] = None, name="callback"):
        self.func = func
        self.dim = int(dim)
        self.hessian = hessian
        self.name = name

    def _values_py(self, X):
        return np.array([float(self.func(x)) for x in X])

    def _hessians_py(self, X):
        if self.hessian is None:
            return None
        return np.array([np.asarray(self.hessian(x), dtype=float) for x in X])

    def __repr__(self):
        return f"Callback({self.name}, dim={self.dim})"


def eval_norm(norm, xi):
    """Evaluate ``norm`` at a single vector."""
    return norm(np.asarray(xi, dtype=float))


def pullback_norm(norm, A):
    """Return the norm ``xi -> norm(A @ xi)``.

    Euclidean norms stay Euclidean (``A^T b A``); nested pullbacks collapse
    into one matrix product.
    """
    A = _as_matrix(A, "A")
    if A.shape[0] != norm.dim:
        raise InvalidNormError("A does not match the norm dimension")
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise InvalidNormError("pullback matrix is singular")
    if isinstance(norm, Euclidean):
        m = A.T @ norm.matrix @ A
        return Euclidean(0.5 * (m + m.T))
    if isinstance(norm, LinearPullback):
        return LinearPullback(norm.base, norm.A @ A)
    return LinearPullback(norm, A)


@dataclass
class NormValidation:
    homogeneity_residual: float
    triangle_violation: float
    min_on_sphere: float
    sample_count: int
    tol: float

    @property
    def valid(self):
        return (self.homogeneity_residual <= self.tol
                and self.triangle_violation <= self.tol
                and self.min_on_sphere > 0.0)

    def to_dict(self):
        return {
            "homogeneity_residual": self.homogeneity_residual,
            "triangle_violation": self.triangle_violation,
            "min_on_sphere": self.min_on_sphere,
            "sample_count": self.sample_count,
            "tol": self.tol,
            "valid": self.valid,
        }


def validate_norm(norm, sample_count=1000, seed=0, tol=1e-10):
    """Sample the norm axioms: homogeneity, subadditivity, positivity.

    Scales are drawn from [0, 4] and vectors from a standard normal, so the
    reported residuals are absolute values at order-one magnitudes.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    n = norm.dim
    xi = rng.standard_normal((sample_count, n))
    eta = rng.standard_normal((sample_count, n))
    lam = rng.uniform(0.0, 4.0, sample_count)
    p_xi = norm.values(xi)
    homog = np.abs(norm.values(lam[:, None] * xi) - lam * p_xi)
    tri = np.maximum(0.0, norm.values(xi + eta) - p_xi - norm.values(eta))
    u = xi / np.linalg.norm(xi, axis=1, keepdims=True)
    on_sphere = norm.values(u)
    return NormValidation(
        homogeneity_residual=float(np.max(homog)),
        triangle_violation=float(np.max(tri)),
        min_on_sphere=float(np.min(on_sphere)),
        sample_count=int(sample_count),
        tol=float(tol),
    )


def norm_from_spec(spec):
    """Build a norm from its JSON-compatible dict (see ``docs/norm-spec.md``)."""
    if not isinstance(spec, dict):
        raise InvalidNormError("norm spec must be a JSON object")
    schema = spec.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise InvalidNormError(f"unsupported norm spec schema {schema!r}")
    family = spec.get("family")
    try:
        if family == "euclidean":
            if "matrix" in spec:
                return Euclidean(spec["matrix"])
            return Euclidean(np.eye(int(spec["dim"])))
        if family == "even_p":
            return EvenPNorm(spec["p"], spec["dim"])
        if family == "randers":
            a = spec["a"] if "a" in spec else np.eye(len(spec["beta"]))
            return Randers(a, spec["beta"])
        if family == "pullback":
            return LinearPullback(norm_from_spec(spec["base"]), spec["A"])
        if family == "scaled":
            return Scaled(norm_from_spec(spec["base"]), spec["lam"])
    except KeyError as exc:
        raise InvalidNormError(f"norm spec for {family!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidNormError):
            raise
        raise InvalidNormError(f"bad norm spec for {family!r}: {exc}") from None
    raise InvalidNormError(f"unknown norm family {family!r}")


def norm_to_spec(norm):
    spec = {"schema": SCHEMA_VERSION}
    spec.update(norm.to_spec())
    return spec


# --------------------------------------------------------------------------
# Finsler fields on a box chart
# --------------------------------------------------------------------------

@dataclass
class FinslerField:
    """``F(x, xi) = factor(x) * base_norm(xi)`` on an axis-aligned box.

    ``norm_at`` overrides the conformal form with an arbitrary per-point
    norm, for fields that are not conformally Minkowski.
    """

    base_norm: Norm
    lower: np.ndarray
    upper: np.ndarray
    factor: Optional[Callable] = None
    norm_at: Optional[Callable] = None
    name: str = field(default="field")

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        n = self.base_norm.dim
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("chart bounds must match the norm dimension")
        if np.any(self.upper <= self.lower):
            raise ValueError("chart box must have positive extent")

    @property
    def dim(self):
        return self.base_norm.dim

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def factor_at(self, x):
        if self.factor is None:
            return 1.0
        lam = float(self.factor(np.asarray(x, dtype=float)))
        if not (lam > 0 and np.isfinite(lam)):
            raise InvalidNormError(f"conformal factor must be positive, got {lam} at {x}")
        return lam

    def norm(self, x):
        """The norm on the tangent space at ``x``."""
        if self.norm_at is not None:
            return self.norm_at(np.asarray(x, dtype=float))
        lam = self.factor_at(x)
        if lam == 1.0:
            return self.base_norm
        return Scaled(self.base_norm, lam)

    def __call__(self, x, xi):
        if self.norm_at is not None:
            return self.norm(x)(xi)
        return self.factor_at(x) * self.base_norm(xi)

    def grid(self, shape):
        """Uniform grid points as an ``(N, n)`` array, C order."""
        if np.isscalar(shape):
            shape = (int(shape),) * self.dim
        axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(self.lower, self.upper, shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


def minkowski_field(norm, half_width=10.0, factor=None, name="minkowski"):
    """Field on the box ``[-half_width, half_width]^n``."""
    n = norm.dim
    return FinslerField(norm, -half_width * np.ones(n), half_width * np.ones(n),
                        factor=factor, name=name)
