"""Flows of vector fields and their conformal classification.

A field ``v`` is probed through the log-derivative

    alpha(x, xi) = d/dt|_0 log F(phi^t(x), dphi^t_x(xi)),

computed by a central difference in ``t`` along an RK4 flow that carries
the variational equation. Conformal fields have ``alpha`` independent of
``xi``; homothetic ones have it constant; Killing fields have it zero.
"""

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .diffquad import DEFAULT_STRATEGY
from .errors import DegenerateSamplingError, FlowEscapeError
from .metric import averaged_form, default_quadrature


# --------------------------------------------------------------------------
# vector fields
# --------------------------------------------------------------------------

@dataclass
class VectorField:
    dim: int
    func: Callable
    jac: Optional[Callable] = None
    tag: str = "custom"
    complete: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x, h=1e-6):
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        J = np.empty((self.dim, self.dim))
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = h * max(1.0, abs(x[j]))
            J[:, j] = (self(x + e) - self(x - e)) / (2.0 * e[j])
        return J

    def scaled(self, c):
        """The field ``c * v``; its flow is the time-``c`` reparametrisation."""
        jac = None if self.jac is None else (lambda x, j=self.jac: c * np.asarray(j(x)))
        return VectorField(self.dim, lambda x, f=self.func: c * np.asarray(f(x)), jac,
                           tag=f"{c:g}*{self.tag}", complete=self.complete, params=dict(self.params))


def radial_field(n):
    return VectorField(n, lambda x: x.copy(), lambda x: np.eye(n), "radial", True)


def rotation_field(n, i=0, j=1):
    def func(x):
        v = np.zeros(n)
        v[i], v[j] = -x[j], x[i]
        return v

    J = np.zeros((n, n))
    J[i, j], J[j, i] = -1.0, 1.0
    return VectorField(n, func, lambda x: J, "rotation", True, {"plane": [i, j]})


def translation_field(b):
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    return VectorField(n, lambda x: b.copy(), lambda x: np.zeros((n, n)), "translation", True,
                       {"b": b.tolist()})


def shear_field(n):
    """``(x_2, x_1, 0, ...)``: a linear field that is not conformal for most norms."""
    J = np.zeros((n, n))
    J[0, 1] = J[1, 0] = 1.0
    return VectorField(n, lambda x: J @ x, lambda x: J, "shear", True)


def mobius_generator(omega, b):
    """``x -> Omega x + b`` with skew ``Omega`` and ``Omega b = 0``.

    Generates the one-parameter group ``x -> exp(t Omega) x + t b`` of maps
    ``f_{A,b}`` with ``A b = b``.
    """
    omega = np.asarray(omega, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.allclose(omega, -omega.T, atol=1e-12):
        raise ValueError("Omega must be skew-symmetric")
    if np.linalg.norm(omega @ b) > 1e-12:
        raise ValueError("Omega b must vanish")
    return VectorField(b.shape[0], lambda x: omega @ x + b, lambda x: omega, "mobius-generator",
                       True, {"omega": omega.tolist(), "b": b.tolist()})


def special_conformal_field(b):
    """``x -> |x|^2 b - 2 (x.b) x``, the inversion-conjugate of translation by ``b``.

    Euclidean conformal with factor ``-2 x.b`` (varies in x).
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]

    def func(x):
        return (x @ x) * b - 2.0 * (x @ b) * x

    def jac(x):
        return 2.0 * np.outer(b, x) - 2.0 * np.outer(x, b) - 2.0 * (x @ b) * np.eye(n)

    return VectorField(n, func, jac, "special-conformal", False, {"b": b.tolist()})


# --------------------------------------------------------------------------
# flow with variational equation
# --------------------------------------------------------------------------

def _check(x, chart):
    if not np.all(np.isfinite(x)):
        raise FlowEscapeError("flow produced non-finite values")
    if chart is not None:
        lo, hi = chart
        if np.any(x < lo) or np.any(x > hi):
            raise FlowEscapeError(f"trajectory left the chart at {x.tolist()}")


def flow_step(v, x, xi, t, steps=64, chart=None):
    """``(phi^t(x), dphi^t_x(xi))`` by classical RK4 with ``steps`` equal steps.

    ``xi`` may be one vector ``(n,)`` or a stack ``(k, n)``; the variational
    equation is integrated for the full fundamental matrix once either way.
    ``chart`` is an optional ``(lower, upper)`` box the trajectory must stay in.
    """
    x = np.array(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = x.shape[0]
    if chart is not None:
        chart = (np.asarray(chart[0], dtype=float), np.asarray(chart[1], dtype=float))
        _check(x, chart)
    Phi = np.eye(n)
    if t != 0.0:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        dt = t / steps
        for _ in range(steps):
            k1 = v(x)
            K1 = v.jacobian(x) @ Phi
            x2 = x + 0.5 * dt * k1
            k2 = v(x2)
            K2 = v.jacobian(x2) @ (Phi + 0.5 * dt * K1)
            x3 = x + 0.5 * dt * k2
            k3 = v(x3)
            K3 = v.jacobian(x3) @ (Phi + 0.5 * dt * K2)
            x4 = x + dt * k3
            k4 = v(x4)
            K4 = v.jacobian(x4) @ (Phi + dt * K3)
            x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            Phi = Phi + dt / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
            _check(x, chart)
    if not np.all(np.isfinite(Phi)):
        raise FlowEscapeError("variational equation produced non-finite values")
    return x, (xi @ Phi.T if xi.ndim == 2 else Phi @ xi)


def _chart_of(F):
    lower = getattr(F, "lower", None)
    upper = getattr(F, "upper", None)
    if lower is None or upper is None:
        return None
    return (lower, upper)


def conformal_factors(F, v, x, xis, tau=1e-4, steps=4):
    """``alpha(x, xi)`` for each row of ``xis`` at one base point."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    chart = _chart_of(F)
    xp, Xp = flow_step(v, x, xis, tau, steps, chart)
    xm, Xm = flow_step(v, x, xis, -tau, steps, chart)
    fp = np.array([F(xp, e) for e in Xp])
    fm = np.array([F(xm, e) for e in Xm])
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))) or np.any(fp <= 0) or np.any(fm <= 0):
        raise FlowEscapeError("F is non-finite or non-positive along the probe")
    return (np.log(fp) - np.log(fm)) / (2.0 * tau)


def conformal_factor(F, v, x, xi, tau=1e-4, steps=4):
    """Infinitesimal conformal factor ``d/dt log F`` along the flow of ``v``."""
    if not np.any(np.asarray(xi) != 0):
        raise ValueError("direction must be non-zero")
    return float(conformal_factors(F, v, x, xi, tau, steps)[0])


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

class Verdict(str, enum.Enum):
    NOT_CONFORMAL = "NotConformal"
    CONFORMAL = "Conformal"
    HOMOTHETIC = "Homothetic"
    KILLING = "Killing"


@dataclass
class ConformalReport:
    verdict: Verdict
    points: np.ndarray
    alpha: np.ndarray          # (n_points, n_directions)
    residual: float            # max over points of the spread in directions
    constant: Optional[float] = None
    tol: float = 1e-4

    @property
    def factor_samples(self):
        """Per-point mean of alpha over directions."""
        return self.alpha.mean(axis=1)

    def to_dict(self):
        out = {
            "verdict": self.verdict.value,
            "alpha_stats": {
                "min": float(self.alpha.min()),
                "max": float(self.alpha.max()),
                "mean": float(self.alpha.mean()),
            },
            "residual": float(self.residual),
        }
        if self.constant is not None:
            out["c"] = float(self.constant)
        return out


def unit_directions(n, count, seed=0):
    """Euclidean unit vectors, closed under negation.

    Equally spaced angles for n = 2; seeded Gaussian draws plus their
    negatives otherwise.
    """
    if n == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    half = (count + 1) // 2
    u = np.random.default_rng(seed).standard_normal((half, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return np.concatenate([u, -u])[:count]


def verdict_from_alpha(alpha, tol):
    spread = alpha.max(axis=1) - alpha.min(axis=1)
    residual = float(spread.max())
    if residual > tol:
        return Verdict.NOT_CONFORMAL, residual, None
    means = alpha.mean(axis=1)
    if float(np.max(np.abs(alpha))) < tol:
        return Verdict.KILLING, residual, None
    if float(means.max() - means.min()) < tol:
        return Verdict.HOMOTHETIC, residual, float(means.mean())
    return Verdict.CONFORMAL, residual, None


def _check_points(points, directions):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) < 8:
        raise DegenerateSamplingError("need at least 8 sample points")
    if np.all(np.ptp(points, axis=0) == 0.0):
        raise DegenerateSamplingError("all sample points coincide")
    if len(directions) < 16:
        raise DegenerateSamplingError("need at least 16 directions per point")
    return points


def classify_field(F, v, points, directions=None, tol=1e-4, n_directions=16, seed=0,
                   tau=1e-4, steps=4):
    """Classify ``v`` against the Finsler field ``F``.

    Directions are Euclidean unit vectors rescaled to the F-unit sphere at
    each point, so for non-reversible norms both ``xi`` and ``-xi`` are
    probed as separate samples.
    """
    dirs = unit_directions(len(np.atleast_2d(points)[0]), n_directions, seed) if directions is None \
        else np.atleast_2d(np.asarray(directions, dtype=float))
    points = _check_points(points, dirs)
    alpha = np.empty((len(points), len(dirs)))
    for i, x in enumerate(points):
        unit = np.array([u / F(x, u) for u in dirs])
        alpha[i] = conformal_factors(F, v, x, unit, tau, steps)
    verdict, residual, c = verdict_from_alpha(alpha, tol)
    return ConformalReport(verdict, points, alpha, residual, c, tol)


@dataclass
class TransferResult:
    residual: float
    finsler: ConformalReport
    riemannian: ConformalReport   # classification against sqrt(g(F))
    alpha_g: np.ndarray           # log-derivative of g itself, i.e. 2 alpha_F

    @property
    def consistent(self):
        return self.finsler.verdict == self.riemannian.verdict

    def to_dict(self):
        return {"residual": self.residual, "finsler_verdict": self.finsler.verdict.value,
                "averaged_verdict": self.riemannian.verdict.value, "consistent": self.consistent}


def transfer_consistency(F, v, points, quad=None, strategy=DEFAULT_STRATEGY, tol=1e-4,
                         directions=None, n_directions=16, seed=0, tau=1e-4, steps=4,
                         report=None):
    """Compare the conformal factor of ``v`` for ``F`` and for ``g(F)``.

    Since ``g(lam F) = lam^2 g(F)``, the log-derivative of ``g`` along the flow
    should be twice that of ``F``. Returns the max deviation together with
    both classifications.
    """
    report = report if report is not None else classify_field(
        F, v, points, directions, tol, n_directions, seed, tau, steps)
    if report.verdict == Verdict.NOT_CONFORMAL:
        raise ValueError("transfer check requires a conformal field; got NotConformal")
    points = report.points
    quad = quad if quad is not None else default_quadrature(F.dim)
    dirs = unit_directions(F.dim, n_directions, seed) if directions is None \
        else np.atleast_2d(np.asarray(directions, dtype=float))
    chart = _chart_of(F)
    alpha_g = np.empty((len(points), len(dirs)))
    for i, x in enumerate(points):
        unit = np.array([u / F(x, u) for u in dirs])
        xp, Xp = flow_step(v, x, unit, tau, steps, chart)
        xm, Xm = flow_step(v, x, unit, -tau, steps, chart)
        gp = averaged_form(F.norm(xp), quad, strategy).matrix
        gm = averaged_form(F.norm(xm), quad, strategy).matrix
        qp = np.einsum("ki,ij,kj->k", Xp, gp, Xp)
        qm = np.einsum("ki,ij,kj->k", Xm, gm, Xm)
        alpha_g[i] = (np.log(qp) - np.log(qm)) / (2.0 * tau)
    residual = float(np.max(np.abs(alpha_g - 2.0 * report.alpha)))
    verdict, spread, c = verdict_from_alpha(0.5 * alpha_g, tol)
    riem = ConformalReport(verdict, points, 0.5 * alpha_g, spread, c, tol)
    return TransferResult(residual, report, riem, alpha_g)


# --------------------------------------------------------------------------
# homotheties of R^n and the map h
# --------------------------------------------------------------------------

def _check_orthogonal(A, tol=1e-10):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.max(np.abs(A.T @ A - np.eye(len(A)))) > tol:
        raise ValueError("A must be an orthogonal matrix")
    return A


def homothety(mu, A):
    """``x -> mu * x A`` in row-vector convention, with its differential."""
    A = _check_orthogonal(A)

    def phi(x, xi):
        return mu * (np.asarray(x) @ A), mu * (np.asarray(xi) @ A)

    return phi


def h_map(mu, A):
    """``(x, xi) -> (mu x A, xi A)``: the homothety's differential, rescaled by 1/mu.

    Preserves any F for which the homothety multiplies F by ``mu``.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    A = _check_orthogonal(A)

    def h(x, xi):
        return mu * (np.asarray(x) @ A), np.asarray(xi) @ A

    return h


def iterate_h(F, mu, A, x, xi, iterations=50):
    """F-values along ``h^k(x, xi)`` for ``k = 0 .. iterations``.

    Returns ``(values, x_final, xi_final)``. Along a subsequence with
    ``A^k -> 1`` the orbit approaches ``(0, xi)``.
    """
    h = h_map(mu, A)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    values = [F(x, xi)]
    for _ in range(iterations):
        x, xi = h(x, xi)
        values.append(F(x, xi))
    return np.array(values), x, xi
