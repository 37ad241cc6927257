"""Round-sphere geometry: stereographic charts, inversion, Mobius maps, v1.

Points of S^n live in R^{n+1}. A chart is fixed by a unit vector ``x`` (the
pole); projections from ``+x`` and ``-x`` both land in the equatorial
hyperplane ``x^perp``, coordinatised by an orthonormal frame ``E``.

Conventions:
    s(q)  = E^T q / (1 - <q, P>)        for the pole P = +x or -x
    sigma = 1 / (1 - <q, P>)             so that s^* g_0 = sigma^2 g_1

With these, ``s_- o s_+^{-1}`` is the inversion ``z -> z/|z|^2``, while
``s_+(-q) = -s_-(q)``.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._backend import njit
from .conformal import VectorField, unit_directions
from .diffquad import DEFAULT_STRATEGY
from .errors import NumericalFailure
from .metric import averaged_form, default_quadrature
from .norms import Euclidean, Scaled, pullback_norm

POLE_TOL = 1e-10


def hyperplane_frame(x):
    """Orthonormal ``(n+1, n)`` basis of ``x^perp`` (Householder, deterministic)."""
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    m = x.shape[0]
    e = np.zeros(m)
    e[-1] = 1.0
    # reflect e onto -x or x, whichever keeps w well away from zero
    w = e + x if x[-1] >= 0.0 else e - x
    H = np.eye(m) - 2.0 * np.outer(w, w) / (w @ w)
    return H[:, :-1].copy()


def check_sphere_point(q, tol=1e-10):
    q = np.asarray(q, dtype=float)
    if abs(np.linalg.norm(q) - 1.0) > tol:
        raise ValueError(f"point is not on the unit sphere (|q| = {np.linalg.norm(q):.15g})")
    return q


class SphereChart:
    """Stereographic projections of S^n from ``+pole`` and ``-pole``."""

    def __init__(self, n, pole=None):
        self.n = int(n)
        if pole is None:
            pole = np.zeros(self.n + 1)
            pole[-1] = 1.0
        pole = np.asarray(pole, dtype=float)
        if pole.shape != (self.n + 1,):
            raise ValueError("pole must be a vector in R^{n+1}")
        self.x = pole / np.linalg.norm(pole)
        self.E = hyperplane_frame(self.x)

    def _pole(self, sign):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return sign * self.x

    def factor(self, q, sign=1):
        return 1.0 / (1.0 - np.asarray(q) @ self._pole(sign))

    def project(self, q, sign=1):
        """``(s(q), sigma(q))``."""
        q = check_sphere_point(q)
        P = self._pole(sign)
        d = 1.0 - q @ P
        if d < POLE_TOL:
            raise ValueError("point coincides with the projection pole")
        return self.E.T @ q / d, 1.0 / d

    def lift(self, z, sign=1):
        """Inverse projection ``R^n -> S^n - {pole}``."""
        z = np.asarray(z, dtype=float)
        zz = z @ z
        return (2.0 * (self.E @ z) + (zz - 1.0) * self._pole(sign)) / (zz + 1.0)

    def differential(self, q, sign=1):
        """``ds_q`` as an ``(n, n+1)`` matrix acting on tangent vectors."""
        q = np.asarray(q, dtype=float)
        P = self._pole(sign)
        sigma = 1.0 / (1.0 - q @ P)
        return sigma * self.E.T + sigma * sigma * np.outer(self.E.T @ q, P)

    def lift_differential(self, z, sign=1):
        """``d(s^{-1})_z`` as an ``(n+1, n)`` matrix."""
        z = np.asarray(z, dtype=float)
        D = z @ z + 1.0
        q = self.lift(z, sign)
        P = self._pole(sign)
        return (2.0 * self.E + 2.0 * np.outer(P, z)) / D - 2.0 * np.outer(q, z) / D


def stereo(q, pole=1, chart=None):
    """Stereographic projection from ``pole * x``; returns ``(z, sigma)``."""
    q = np.asarray(q, dtype=float)
    chart = chart or SphereChart(q.shape[0] - 1)
    return chart.project(q, pole)


def stereo_inverse(z, pole=1, chart=None):
    z = np.asarray(z, dtype=float)
    chart = chart or SphereChart(z.shape[0])
    return chart.lift(z, pole)


# --------------------------------------------------------------------------
# inversion and reflections
# --------------------------------------------------------------------------

def inversion(z):
    """``z / |z|^2``."""
    z = np.asarray(z, dtype=float)
    zz = z @ z
    if zz < 1e-24:
        raise ValueError("inversion is undefined at the origin")
    return z / zz


def inversion_differential(z):
    """``(|z|^2 I - 2 z z^T) / |z|^4``."""
    z = np.asarray(z, dtype=float)
    zz = z @ z
    if zz < 1e-24:
        raise ValueError("inversion is undefined at the origin")
    return (zz * np.eye(z.shape[0]) - 2.0 * np.outer(z, z)) / (zz * zz)


def numeric_inversion_differential(z, h=1e-6):
    """Central-difference Jacobian of :func:`inversion`."""
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (inversion(z + e) - inversion(z - e)) / (2.0 * h)
    return J


def reflection(q):
    """Reflection at the hyperplane normal to ``q``."""
    q = np.asarray(q, dtype=float)
    return np.eye(q.shape[0]) - 2.0 * np.outer(q, q) / (q @ q)


def householder_vectors(Q):
    """Unit vectors ``q_1..q_k`` with ``Q = R_{q_1} ... R_{q_k}``.

    Any orthogonal matrix is a product of at most n reflections; the
    vectors come from a Householder QR of ``Q`` (whose triangular factor is
    a diagonal of signs, each sign -1 contributing one more reflection).
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    vecs = []
    R = Q.copy()
    for k in range(n):
        a = R[:, k].copy()
        a[:k] = 0.0
        target = np.zeros(n)
        target[k] = 1.0
        w = a - target
        if np.linalg.norm(w) > 1e-12:
            w /= np.linalg.norm(w)
            vecs.append(w)
            R = reflection(w) @ R
    # R is now the identity up to roundoff; Q = R_{w_1} ... R_{w_k}
    return vecs


# --------------------------------------------------------------------------
# Mobius maps
# --------------------------------------------------------------------------

@dataclass
class MobiusMap:
    """``f(q) = A q + b`` with orthogonal ``A`` fixing ``b != 0``.

    ``bar`` is its conjugate by the inversion, which has a fixed point at 0.
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        n = self.b.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A and b dimensions differ")
        if np.max(np.abs(self.A.T @ self.A - np.eye(n))) > 1e-12:
            raise ValueError("A must be orthogonal")
        if np.linalg.norm(self.A @ self.b - self.b) > 1e-12:
            raise ValueError("A must fix b")
        if not np.any(self.b != 0):
            raise ValueError("b must be non-zero")

    @property
    def dim(self):
        return self.b.shape[0]

    def apply(self, q):
        return self.A @ np.asarray(q, dtype=float) + self.b

    def _denominator(self, q):
        bb = self.b @ self.b
        return 1.0 + 2.0 * (self.A @ q) @ self.b + bb * (q @ q)

    def bar(self, q):
        """``(f_bar(q), psi(q))`` from the closed-form expression."""
        q = np.asarray(q, dtype=float)
        D = self._denominator(q)
        if abs(D) < 1e-300:
            raise NumericalFailure("Mobius denominator vanishes")
        return (self.A @ q + self.b * (q @ q)) / D, 1.0 / D

    def bar_by_conjugation(self, q):
        """``I(f(I(q)))`` for ``q != 0``."""
        return inversion(self.apply(inversion(q)))

    def bar_differential(self, q):
        q = np.asarray(q, dtype=float)
        D = self._denominator(q)
        N = self.A @ q + self.b * (q @ q)
        dN = self.A + 2.0 * np.outer(self.b, q)
        dD = 2.0 * self.A.T @ self.b + 2.0 * (self.b @ self.b) * q
        return dN / D - np.outer(N, dD) / (D * D)

    def bar_power(self, q, m):
        """``(f_bar^m(q), d(f_bar^m)_q)`` via ``I o f^m o I`` with ``f^m(w) = A^m w + m b``."""
        q = np.asarray(q, dtype=float)
        Am = np.linalg.matrix_power(self.A, m)
        w = inversion(q)
        fw = Am @ w + m * self.b
        return inversion(fw), inversion_differential(fw) @ Am @ inversion_differential(q)


# --------------------------------------------------------------------------
# the field v1 and its flow
# --------------------------------------------------------------------------

def v1_field(q, b, chart=None):
    """The field with ``ds_+(v1) = b``, in ambient coordinates.

    Closed form ``(1 - <q,x>) c + <q,c> (x - q)`` with ``c = E b``; it is
    polynomial in q and vanishes only at the pole x.
    """
    q = np.asarray(q, dtype=float)
    chart = chart or SphereChart(q.shape[0] - 1)
    c = chart.E @ np.asarray(b, dtype=float)
    x = chart.x
    return (1.0 - q @ x) * c + (q @ c) * (x - q)


def v1_vector_field(b, chart):
    b = np.asarray(b, dtype=float)
    c = chart.E @ b
    x = chart.x
    m = x.shape[0]

    def func(q):
        return (1.0 - q @ x) * c + (q @ c) * (x - q)

    def jac(q):
        return -np.outer(c, x) + np.outer(x - q, c) - (q @ c) * np.eye(m)

    return VectorField(m, func, jac, "v1", True, {"b": b.tolist()})


def v1_flow_exact(q, b, t, chart):
    """``s_+^{-1}(s_+(q) + t b)``; the pole is fixed."""
    q = np.asarray(q, dtype=float)
    if 1.0 - q @ chart.x < POLE_TOL:
        return chart.x.copy()
    z, _ = chart.project(q, 1)
    return chart.lift(z + t * np.asarray(b, dtype=float), 1)


@njit
def _v1_rk4_nb(Q, c, x, t, steps):
    N, m = Q.shape
    out = Q.copy()
    dt = t / steps
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    y = np.empty(m)
    for k in range(N):
        q = out[k].copy()
        for _ in range(steps):
            for stage in range(4):
                if stage == 0:
                    for i in range(m):
                        y[i] = q[i]
                elif stage == 1:
                    for i in range(m):
                        y[i] = q[i] + 0.5 * dt * k1[i]
                elif stage == 2:
                    for i in range(m):
                        y[i] = q[i] + 0.5 * dt * k2[i]
                else:
                    for i in range(m):
                        y[i] = q[i] + dt * k3[i]
                qx = 0.0
                qc = 0.0
                for i in range(m):
                    qx += y[i] * x[i]
                    qc += y[i] * c[i]
                kk = k1 if stage == 0 else (k2 if stage == 1 else (k3 if stage == 2 else k4))
                for i in range(m):
                    kk[i] = (1.0 - qx) * c[i] + qc * (x[i] - y[i])
            for i in range(m):
                q[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        out[k] = q
    return out


def _v1_rk4_np(Q, c, x, t, steps):
    q = Q.copy()
    dt = t / steps

    def f(y):
        return (1.0 - y @ x)[:, None] * c[None] + (y @ c)[:, None] * (x[None] - y)

    for _ in range(steps):
        k1 = f(q)
        k2 = f(q + 0.5 * dt * k1)
        k3 = f(q + 0.5 * dt * k2)
        k4 = f(q + dt * k3)
        q = q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return q


def v1_flow(starts, b, t, chart, steps=None, backend=None):
    """RK4 flow of v1 for a batch of starting points ``(N, n+1)``.

    Default step count keeps ``|dt| <= 0.01``.
    """
    Q = np.ascontiguousarray(np.atleast_2d(starts), dtype=float)
    c = chart.E @ np.asarray(b, dtype=float)
    steps = int(steps) if steps else max(1, int(np.ceil(abs(t) / 0.01)))
    backend = backend or _backend.BACKEND
    fn = _v1_rk4_nb if backend == "numba" else _v1_rk4_np
    out = fn(Q, np.ascontiguousarray(c), np.ascontiguousarray(chart.x), float(t), steps)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("v1 flow produced non-finite values")
    return out


def flow_distance_bound(q, b, t, chart):
    """Exact chord distance from ``phi^t(q)`` to the pole: ``2/sqrt(|z+tb|^2+1)``."""
    z, _ = chart.project(q, 1)
    w = z + t * np.asarray(b, dtype=float)
    return 2.0 / np.sqrt(w @ w + 1.0)


# --------------------------------------------------------------------------
# Finsler metrics on S^n and the functions m, M
# --------------------------------------------------------------------------

def tangent_frame(q):
    """Orthonormal ``(n+1, n)`` basis of ``T_q S^n``."""
    return hyperplane_frame(q)


class RoundMetric:
    """``F(q, eta) = c * factor(q) * |eta|``: conformal rescalings of sqrt(g_1)."""

    def __init__(self, n, c=1.0, factor=None):
        self.n = int(n)
        self.c = float(c)
        self.factor = factor

    def _lam(self, q):
        return self.c * (1.0 if self.factor is None else float(self.factor(q)))

    def __call__(self, q, eta):
        return self._lam(q) * float(np.linalg.norm(eta))

    def tangent_norm(self, q):
        T = tangent_frame(q)
        return Scaled(Euclidean(np.eye(self.n)), self._lam(q)), T


class StereoPushforward:
    """``F(q, eta) = p(ds_q eta) / sigma(q)`` for a Minkowski norm p on R^n.

    Defined on ``S^n - {pole}``; for Euclidean p it is the round metric.
    """

    def __init__(self, norm, chart, sign=1):
        if norm.dim != chart.n:
            raise ValueError("norm dimension must equal the sphere dimension")
        self.norm = norm
        self.chart = chart
        self.sign = sign
        self.n = chart.n

    def __call__(self, q, eta):
        sigma = self.chart.factor(q, self.sign)
        return self.norm(self.chart.differential(q, self.sign) @ eta) / sigma

    def tangent_norm(self, q):
        T = tangent_frame(q)
        J = self.chart.differential(q, self.sign) @ T
        sigma = self.chart.factor(q, self.sign)
        return Scaled(pullback_norm(self.norm, J), 1.0 / sigma), T


def sphere_averaged_metric(F, q, quad=None, strategy=DEFAULT_STRATEGY, normalize=True):
    """Averaged metric of ``F(q, .)`` on ``T_q S^n`` as an ambient matrix.

    With ``normalize`` the form is divided by ``2n``, the constant by which
    the averaging multiplies an inner product, so ``F = sqrt(g_1)`` gives
    back ``g_1`` itself.
    """
    norm, T = F.tangent_norm(np.asarray(q, dtype=float))
    quad = quad if quad is not None else default_quadrature(norm.dim)
    G = averaged_form(norm, quad, strategy).matrix
    if normalize:
        G = G / (2.0 * norm.dim)
    return T @ G @ T.T


def round_metric(q):
    """The standard metric g_1 restricted to ``T_q S^n``, ambient form."""
    q = np.asarray(q, dtype=float)
    return np.eye(q.shape[0]) - np.outer(q, q)


def m_and_M(F, q, b, chart, g=None, n_directions=128, quad=None, strategy=DEFAULT_STRATEGY, seed=0):
    """``m(q) = F^2(v1)/g(v1, v1)`` and ``M(q) = max - min of F^2/g`` on ``T_q S^n``.

    ``g`` maps a point to an ambient Gram matrix; it defaults to the
    2n-normalised averaged metric of ``F``. ``M`` is sampled over
    ``n_directions`` F-unit tangent directions, which under-approximates
    the true spread.
    """
    q = check_sphere_point(q)
    G = g(q) if g is not None else sphere_averaged_metric(F, q, quad, strategy)
    v = v1_field(q, b, chart)
    gv = v @ G @ v
    if gv <= 1e-28:
        raise ValueError("v1 vanishes at this point; m is undefined")
    m = F(q, v) ** 2 / gv
    T = tangent_frame(q)
    etas = unit_directions(chart.n, n_directions, seed) @ T.T
    etas = etas / np.array([F(q, e) for e in etas])[:, None]
    ratios = np.array([F(q, e) ** 2 / (e @ G @ e) for e in etas])
    return float(m), float(ratios.max() - ratios.min())


# --------------------------------------------------------------------------
# the two suites from the sphere case analysis
# --------------------------------------------------------------------------

def _result(value, tol, ok):
    return {"value": float(value), "tol": float(tol), "pass": bool(ok)}


def reflection_invariance_defect(norm, normals, directions):
    """``max |p(R_q xi) / p(xi) - 1|`` over normals q and directions xi."""
    base = norm.values(directions)
    worst = 0.0
    for q in normals:
        R = reflection(q)
        worst = max(worst, float(np.max(np.abs(norm.values(directions @ R.T) / base - 1.0))))
    return worst


def h_isometry_limit(norm, mobius, z, xi, depth=40):
    """Probe whether ``h_A`` preserves the Minkowski norm, directly and via the limit.

    Returns the direct ratio ``p(A xi)/p(xi)``, the ratio at depth
    ``p(A eta)/p(eta)`` for ``eta = d(f_bar^depth)_z xi`` (the two agree when
    ``f_bar`` is conformal for p), and the normalised direction ``eta/p(eta)``
    approximating the limit vector at the origin.
    """
    A = mobius.A
    xi = np.asarray(xi, dtype=float)
    direct = norm(A @ xi) / norm(xi)
    point, J = mobius.bar_power(z, depth)
    eta = J @ xi
    via_limit = norm(A @ eta) / norm(eta)
    return {"direct": float(direct), "via_limit": float(via_limit),
            "limit_direction": (eta / norm(eta)).tolist(), "base_point": point.tolist()}


def case2a_suite(norm, seed=0, n_normals=20, n_directions=128):
    """Reflection dichotomy: the inversion's differential on S^{n-1} and norm invariance."""
    n = norm.dim
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((n_normals, n))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    results = {}
    err = max(float(np.max(np.abs(numeric_inversion_differential(q) - reflection(q)))) for q in normals)
    results["dI_equals_reflection"] = _result(err, 1e-8, err < 1e-8)
    chart = SphereChart(n)
    zs = rng.standard_normal((20, n))
    comp = max(float(np.max(np.abs(chart.project(chart.lift(z, 1), -1)[0] - inversion(z)))) for z in zs)
    results["s_minus_after_s_plus_inverse_is_inversion"] = _result(comp, 1e-10, comp < 1e-10)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    prod = np.eye(n)
    for w in householder_vectors(Q):
        prod = prod @ numeric_inversion_differential(w)
    gen = float(np.max(np.abs(prod - Q)))
    results["reflections_generate_orthogonal"] = _result(gen, 1e-8, gen < 1e-8)
    dirs = unit_directions(n, n_directions, seed)
    defect = reflection_invariance_defect(norm, normals, dirs)
    return {
        "invariants": results,
        "reflection_invariance_defect": defect,
        "euclidean_forced": bool(defect < 1e-7),
    }


def case2b_suite(norm, mobius, round_c=1.0, seed=0, n_starts=20, horizon=30.0,
                 flow_tol=1e-3, depth=40, quad=None, strategy=DEFAULT_STRATEGY):
    """Mobius and v1 invariants on S^n, with ``n = mobius.dim``.

    ``norm`` plays the Minkowski metric ``F_-`` near the fixed point of
    ``f_bar``; ``round_c`` scales the round metric used for the m/M checks.
    """
    n = mobius.dim
    rng = np.random.default_rng(seed)
    chart = SphereChart(n)
    results = {}
    _, psi0 = mobius.bar(np.zeros(n))
    results["psi_at_origin"] = _result(abs(psi0 - 1.0), 0.0, psi0 == 1.0)
    d0 = float(np.max(np.abs(mobius.bar_differential(np.zeros(n)) - mobius.A)))
    results["differential_at_origin_is_A"] = _result(d0, 1e-8, d0 < 1e-8)
    qs = rng.standard_normal((20, n))
    conj = max(float(np.max(np.abs(mobius.bar(q)[0] - mobius.bar_by_conjugation(q)))) for q in qs)
    results["inversion_conjugation"] = _result(conj, 1e-10, conj < 1e-10)

    b = mobius.b
    starts = rng.standard_normal((n_starts, n + 1))
    starts /= np.linalg.norm(starts, axis=1, keepdims=True)
    dist = 0.0
    for sign in (1, -1):
        end = v1_flow(starts, b, sign * horizon, chart)
        dist = max(dist, float(np.max(np.linalg.norm(end - chart.x[None], axis=1))))
    results["flow_reaches_pole"] = _result(dist, flow_tol, dist < flow_tol)

    F = RoundMetric(n, round_c)
    drift = 0.0
    Mmax = 0.0
    for q in starts[:5]:
        m0, M0 = m_and_M(F, q, b, chart, quad=quad, strategy=strategy, seed=seed)
        Mmax = max(Mmax, M0)
        for t in (1.0, 2.0, 5.0):
            qt = v1_flow_exact(q, b, t, chart)
            qt = qt / np.linalg.norm(qt)
            mt, Mt = m_and_M(F, qt, b, chart, quad=quad, strategy=strategy, seed=seed)
            drift = max(drift, abs(mt - m0))
            Mmax = max(Mmax, Mt)
    results["m_flow_invariant"] = _result(drift, 1e-5, drift < 1e-5)
    results["M_vanishes_for_round_metric"] = _result(Mmax, 1e-6, Mmax < 1e-6)

    if depth:
        zs = rng.standard_normal((5, n))
        xis = unit_directions(n, 16, seed)
        worst_direct = 0.0
        worst_gap = 0.0
        for z in zs:
            for xi in xis:
                r = h_isometry_limit(norm, mobius, z, xi, depth)
                worst_direct = max(worst_direct, abs(r["direct"] - 1.0))
                worst_gap = max(worst_gap, abs(r["direct"] - r["via_limit"]))
        h_iso = {"isometry_defect": worst_direct, "limit_gap": worst_gap,
                 "h_A_is_isometry": bool(worst_direct < 1e-9)}
    else:
        h_iso = None

    return {"invariants": results, "h_A": h_iso, "chart": chart, "starts": starts}


def v1_trajectories(starts, b, chart, horizon=30.0, samples=61):
    """Sampled v1 orbits for plotting: list of ``(start_index, t, q)`` rows."""
    rows = []
    ts = np.linspace(-horizon, horizon, samples)
    for k, q in enumerate(np.atleast_2d(starts)):
        for t in ts:
            qt = v1_flow_exact(q, b, t, chart)
            rows.append((k, float(t), qt))
    return rows
