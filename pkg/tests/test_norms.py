import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerkit import (Callback, Euclidean, EvenPNorm, FinslerField, InvalidNormError, LinearPullback,
                        Randers, Scaled, norm_from_spec, norm_to_spec, validate_norm)
from finslerkit.norms import SCHEMA_VERSION, eval_norm, minkowski_field, pullback_norm

vec = st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=2).map(np.array)


def test_pythagoras():
    assert eval_norm(Euclidean(np.eye(2)), [3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)


def test_even_p_values():
    assert EvenPNorm(4, 2)([1.0, 1.0]) == pytest.approx(2 ** 0.25)
    assert EvenPNorm(2, 3)([1.0, 2.0, 2.0]) == pytest.approx(3.0)
    assert EvenPNorm(6, 2)([-2.0, 0.0]) == pytest.approx(2.0)


def test_randers_is_not_reversible():
    R = Randers(np.eye(2), [0.5, 0.0])
    assert R([1.0, 0.0]) == pytest.approx(1.5)
    assert R([-1.0, 0.0]) == pytest.approx(0.5)


@pytest.mark.parametrize("bad", [
    lambda: EvenPNorm(3, 2),
    lambda: EvenPNorm(4, 1),
    lambda: Euclidean([[1.0, 2.0], [2.0, 1.0]]),
    lambda: Randers(np.eye(2), [1.0, 0.0]),
    lambda: Randers(np.diag([4.0, 1.0]), [0.0, 1.5]),
    lambda: LinearPullback(EvenPNorm(4, 2), [[1.0, 2.0], [2.0, 4.0]]),
    lambda: Scaled(EvenPNorm(4, 2), -1.0),
])
def test_invalid_norms_rejected(bad):
    with pytest.raises(InvalidNormError):
        bad()


def test_randers_dual_norm_uses_a_inverse():
    # |beta|_{a*} = sqrt(beta a^{-1} beta) = 0.5 / 2 here
    R = Randers(np.diag([4.0, 1.0]), [0.5, 0.0])
    assert R.beta_norm == pytest.approx(0.25)


def test_pullback_of_euclidean_is_euclidean():
    A = np.array([[2.0, 1.0], [0.0, 1.0]])
    pb = pullback_norm(Euclidean(np.eye(2)), A)
    assert isinstance(pb, Euclidean)
    np.testing.assert_allclose(pb.matrix, A.T @ A)


def test_pullback_values_and_composition(rng):
    A, B = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    q = EvenPNorm(4, 2)
    X = rng.standard_normal((20, 2))
    np.testing.assert_allclose(pullback_norm(q, A).values(X), q.values(X @ A.T))
    twice = pullback_norm(pullback_norm(q, A), B)
    np.testing.assert_allclose(twice.values(X), q.values(X @ (A @ B).T), rtol=1e-13)


def test_callback_matches_closed_form(rng):
    cb = Callback(lambda x: (x[0] ** 4 + x[1] ** 4) ** 0.25, 2)
    X = rng.standard_normal((10, 2))
    np.testing.assert_allclose(cb.values(X), EvenPNorm(4, 2).values(X), rtol=1e-14)


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(0.01, 100))
def test_axioms_hold_for_catalog(xi, eta, lam):
    for norm in (EvenPNorm(4, 2), Randers([[2.0, 0.3], [0.3, 1.0]], [0.2, -0.4]),
                 Euclidean([[3.0, 1.0], [1.0, 2.0]])):
        a, b = norm(xi), norm(eta)
        assert norm(xi + eta) <= a + b + 1e-9 * (1 + a + b)
        assert norm(lam * xi) == pytest.approx(lam * a, rel=1e-12, abs=1e-12)


def test_validate_norm_euclidean():
    v = validate_norm(Euclidean(np.eye(2)), 1000, seed=0)
    assert v.valid
    assert v.homogeneity_residual < 1e-12 and v.triangle_violation <= 1e-12 and v.min_on_sphere > 0


def test_validate_norm_flags_non_convex_callback():
    # the l_{1/2} quasi-norm violates the triangle inequality
    cb = Callback(lambda x: (np.sqrt(abs(x[0])) + np.sqrt(abs(x[1]))) ** 2, 2)
    v = validate_norm(cb, 1000, seed=0)
    assert not v.valid and v.triangle_violation > 1e-3


def test_validate_norm_flags_inhomogeneous_callback():
    cb = Callback(lambda x: float(x @ x), 2)
    assert validate_norm(cb, 200, seed=1).homogeneity_residual > 1e-3


@pytest.mark.parametrize("norm", [
    Euclidean([[2.0, 0.5], [0.5, 1.0]]),
    EvenPNorm(6, 3),
    Randers(np.eye(2), [0.1, 0.2]),
    Scaled(LinearPullback(EvenPNorm(4, 2), [[1.0, 1.0], [0.0, 2.0]]), 1.5),
])
def test_spec_round_trip(norm, rng):
    spec = norm_to_spec(norm)
    assert spec["schema"] == SCHEMA_VERSION
    back = norm_from_spec(json.loads(json.dumps(spec)))
    X = rng.standard_normal((10, norm.dim))
    np.testing.assert_allclose(back.values(X), norm.values(X), rtol=1e-14)


@pytest.mark.parametrize("spec", [
    {"family": "nope"},
    {"family": "even_p", "p": 5, "dim": 2},
    {"family": "even_p", "dim": 2},
    {"family": "euclidean"},
    {"schema": 99, "family": "euclidean", "dim": 2},
    "not a dict",
])
def test_bad_specs(spec):
    with pytest.raises(InvalidNormError):
        norm_from_spec(spec)


def test_callback_not_serialisable():
    with pytest.raises(InvalidNormError):
        norm_to_spec(Callback(lambda x: 1.0, 2))


def test_finsler_field_scaling_and_grid():
    field = FinslerField(EvenPNorm(4, 2), [-1.0, -1.0], [1.0, 1.0], factor=lambda x: np.exp(x[0]))
    assert field(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(np.e)
    assert field.norm([0.5, 0.0])([0.0, 2.0]) == pytest.approx(2 * np.exp(0.5))
    grid = field.grid(5)
    assert grid.shape == (25, 2) and field.contains(grid[0]) and not field.contains([2.0, 0.0])


def test_finsler_field_rejects_bad_factor():
    field = FinslerField(EvenPNorm(4, 2), [-1.0, -1.0], [1.0, 1.0], factor=lambda x: -1.0)
    with pytest.raises(InvalidNormError):
        field.norm([0.0, 0.0])


def test_minkowski_field_is_translation_invariant():
    F = minkowski_field(EvenPNorm(4, 2))
    xi = np.array([0.3, -1.2])
    assert F([0.0, 0.0], xi) == F([5.0, -3.0], xi)


def test_quartic_triangle_violation():
    v = validate_norm(EvenPNorm(4, 2), 1000, seed=3)
    assert v.triangle_violation <= 1e-12 and v.homogeneity_residual < 1e-12
