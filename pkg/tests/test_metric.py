import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerkit import (Callback, Euclidean, EvenPNorm, FinslerField, HessianStrategy,
                        NotPositiveDefiniteError, Randers, Scaled, averaged_form, averaged_metric_field,
                        build_sphere_quadrature)
from finslerkit.metric import classify_form, gl_equivariance_check

from conftest import random_spd


def test_euclidean_identity_gives_2n():
    for n in (2, 3, 4):
        quad = build_sphere_quadrature(n, 16 if n == 4 else 64)
        form = averaged_form(Euclidean(np.eye(n)), quad)
        np.testing.assert_allclose(form.matrix, 2 * n * np.eye(n), atol=1e-10)
        assert form.definiteness == "PD"
        assert form.integral_omega == pytest.approx(n)


def test_scaled_euclidean():
    g = averaged_form(Scaled(Euclidean(np.eye(2)), 3.0)).matrix
    np.testing.assert_allclose(g, 36 * np.eye(2), atol=1e-7)


def test_quartic_is_diagonal_with_equal_entries():
    form = averaged_form(EvenPNorm(4, 2))
    g = form.matrix
    assert abs(g[0, 1]) < 1e-12 and g[0, 0] == pytest.approx(g[1, 1], rel=1e-12)
    # l_4 ball: (2 Gamma(5/4))^2 / Gamma(3/2)
    assert form.volume == pytest.approx((2 * math.gamma(1.25)) ** 2 / math.gamma(1.5), rel=1e-10)
    # trace g = int tr b omega, and tr b is not constant, so g differs from 4I
    assert abs(g[0, 0] - 4.0) > 0.1


def test_quartic_signed_permutation_invariance():
    g = averaged_form(EvenPNorm(4, 3)).matrix
    np.testing.assert_allclose(g, g[0, 0] * np.eye(3), atol=1e-10)


def test_randers_form_matches_fd_path():
    norm = Randers([[2.0, 0.3], [0.3, 1.0]], [0.2, 0.4])
    a = averaged_form(norm).matrix
    b = averaged_form(norm, strategy=HessianStrategy("fd")).matrix
    np.testing.assert_allclose(a, b, rtol=1e-6)


def test_callback_path_matches_kernel():
    cb = Callback(lambda x: float((x[0] ** 4 + x[1] ** 4) ** 0.25), 2)
    quad = build_sphere_quadrature(2, 128)
    np.testing.assert_allclose(averaged_form(cb, quad).matrix,
                               averaged_form(EvenPNorm(4, 2), quad).matrix, rtol=1e-6, atol=1e-7)


def test_resolution_refinement():
    norm = Randers(np.eye(3), [0.3, 0.1, 0.0])
    g1 = averaged_form(norm, build_sphere_quadrature(3, 64)).matrix
    g4 = averaged_form(norm, build_sphere_quadrature(3, 256)).matrix
    assert np.max(np.abs(g1 - g4)) < 1e-8


def test_classify_form():
    assert classify_form(np.eye(2)).definiteness == "PD"
    f = classify_form(np.diag([1.0, 0.0]))
    assert f.definiteness == "PSD"
    np.testing.assert_allclose(np.abs(f.witness), [0.0, 1.0])
    assert classify_form(np.diag([1.0, -1.0])).definiteness == "indefinite"


def test_not_pd_raises():
    # p(x) = |x| but the user-supplied Hessian returns a rank-one form
    cb = Callback(lambda x: float(np.hypot(*x)), 2,
                  hessian=lambda x: np.diag([2.0, 0.0]))
    with pytest.raises(NotPositiveDefiniteError) as info:
        averaged_form(cb, build_sphere_quadrature(2, 32))
    assert info.value.min_eig == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(np.abs(info.value.witness), [0.0, 1.0], atol=1e-12)


def test_metric_field_constant_for_minkowski():
    field = FinslerField(Euclidean(np.eye(2)), [-1.0, -1.0], [1.0, 1.0])
    mf = averaged_metric_field(field, 5)
    assert len(mf.forms) == 25
    np.testing.assert_allclose(mf.matrices(), np.broadcast_to(4 * np.eye(2), (25, 2, 2)), atol=1e-12)
    import json
    recs = json.loads(mf.to_json())
    np.testing.assert_allclose(recs[0]["g"], 4 * np.eye(2), atol=1e-12)


def test_metric_field_threads_agree(monkeypatch):
    field = FinslerField(EvenPNorm(4, 2), [-1.0, -1.0], [1.0, 1.0], factor=lambda x: 1 + x[0] ** 2)
    one = averaged_metric_field(field, 4).matrices()
    monkeypatch.setenv("FINSLERKIT_THREADS", "3")
    many = averaged_metric_field(field, 4).matrices()
    np.testing.assert_array_equal(one, many)


def test_metric_field_reports_failing_point():
    def norm_at(x):
        if x[0] > 0.9:
            return Callback(lambda v: float(np.hypot(*v)), 2,
                            hessian=lambda v: np.zeros((2, 2)))
        return Euclidean(np.eye(2))
    field = FinslerField(Euclidean(np.eye(2)), [-1.0, -1.0], [1.0, 1.0], norm_at=norm_at)
    with pytest.raises(NotPositiveDefiniteError) as info:
        averaged_metric_field(field, 3)
    assert info.value.where[0] == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gl_equivariance_property(seed):
    rng = np.random.default_rng(seed)
    A = np.eye(2) + 0.4 * rng.standard_normal((2, 2))
    if np.linalg.cond(A) > 3:
        A = np.eye(2)
    for norm in (Euclidean(random_spd(rng, 2)), EvenPNorm(4, 2), Randers(np.eye(2), [0.3, 0.0])):
        assert gl_equivariance_check(norm, A) < 1e-8 * max(1.0, np.abs(A).max() ** 2)


def test_gl_equivariance_euclidean_closed_form():
    A = np.diag([2.0, 1.0])
    assert gl_equivariance_check(Euclidean(np.eye(2)), A) < 1e-7


@pytest.mark.parametrize("n", [2, 3])
def test_averaged_form_doubling_resolution(n):
    from conftest import catalog
    for norm in catalog(n).values():
        g1 = averaged_form(norm, build_sphere_quadrature(n, 256)).matrix
        g2 = averaged_form(norm, build_sphere_quadrature(n, 512)).matrix
        assert np.max(np.abs(g1 - g2)) < 1e-8
