import numpy as np
import pytest

from finslerkit import DegenerateSamplingError, Euclidean, EvenPNorm, FinslerField, FlowEscapeError, Randers
from finslerkit import conformal as cf

BOX = ([-10.0, -10.0], [10.0, 10.0])


@pytest.fixture
def points():
    return np.random.default_rng(0).uniform(-2, 2, (8, 2))


def field(norm, factor=None):
    return FinslerField(norm, *BOX, factor=factor)


def test_flow_step_matches_linear_flow():
    # v(x) = x has phi^t(x) = e^t x and dphi = e^t I
    x, X = cf.flow_step(cf.radial_field(3), [1.0, 2.0, 3.0], np.eye(3), 0.5, steps=64)
    np.testing.assert_allclose(x, np.exp(0.5) * np.array([1.0, 2.0, 3.0]), rtol=1e-10)
    np.testing.assert_allclose(X, np.exp(0.5) * np.eye(3), rtol=1e-10)


def test_flow_step_rotation_is_orthogonal():
    x, X = cf.flow_step(cf.rotation_field(2), [1.0, 0.0], np.eye(2), np.pi / 2, steps=200)
    np.testing.assert_allclose(x, [0.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(X @ X.T, np.eye(2), atol=1e-9)


def test_flow_escape():
    with pytest.raises(FlowEscapeError):
        cf.flow_step(cf.translation_field([1.0, 0.0]), [0.0, 0.0], [1.0, 0.0], 5.0,
                     chart=([-1.0, -1.0], [1.0, 1.0]))


def test_vector_field_fd_jacobian():
    v = cf.VectorField(2, lambda x: np.array([x[0] * x[1], x[0] ** 2]))
    np.testing.assert_allclose(v.jacobian(np.array([1.0, 2.0])), [[2.0, 1.0], [2.0, 0.0]], atol=1e-8)


def test_factor_euclidean_rotation_is_zero():
    F = field(Euclidean(np.eye(2)))
    assert abs(cf.conformal_factor(F, cf.rotation_field(2), [1.0, 0.5], [0.3, 0.4])) < 1e-6


def test_factor_quartic_radial_is_one():
    F = field(EvenPNorm(4, 2))
    assert cf.conformal_factor(F, cf.radial_field(2), [0.4, -1.0], [1.0, 2.0]) == pytest.approx(1.0, abs=1e-8)


def test_zero_direction_rejected():
    with pytest.raises(ValueError):
        cf.conformal_factor(field(Euclidean(np.eye(2))), cf.radial_field(2), [0.0, 0.0], [0.0, 0.0])


@pytest.mark.parametrize("norm,vf,verdict", [
    (EvenPNorm(4, 2), cf.radial_field(2), cf.Verdict.HOMOTHETIC),
    (Euclidean(np.eye(2)), cf.rotation_field(2), cf.Verdict.KILLING),
    (EvenPNorm(4, 2), cf.shear_field(2), cf.Verdict.NOT_CONFORMAL),
    (EvenPNorm(4, 2), cf.rotation_field(2), cf.Verdict.NOT_CONFORMAL),
    (EvenPNorm(4, 2), cf.translation_field([1.0, -2.0]), cf.Verdict.KILLING),
    (Euclidean(np.eye(2)), cf.special_conformal_field([0.1, 0.0]), cf.Verdict.CONFORMAL),
    (Randers(np.eye(2), [0.4, 0.0]), cf.radial_field(2), cf.Verdict.HOMOTHETIC),
])
def test_classification_catalog(norm, vf, verdict, points):
    assert cf.classify_field(field(norm), vf, points).verdict == verdict


def test_randers_rotation_probes_both_signs(points):
    # rotation preserves |xi| but moves beta, and Randers is non-reversible
    report = cf.classify_field(field(Randers(np.eye(2), [0.4, 0.0])), cf.rotation_field(2), points)
    assert report.verdict == cf.Verdict.NOT_CONFORMAL


def test_homothetic_constant(points):
    report = cf.classify_field(field(EvenPNorm(4, 2)), cf.radial_field(2).scaled(2.5), points)
    assert report.verdict == cf.Verdict.HOMOTHETIC
    assert report.constant == pytest.approx(2.5, abs=1e-6)
    d = report.to_dict()
    assert set(d) == {"verdict", "alpha_stats", "residual", "c"}


def test_exp_factor_translation_is_homothetic(points):
    F = field(EvenPNorm(4, 2), factor=lambda x: np.exp(x[0]))
    report = cf.classify_field(F, cf.translation_field([1.0, 0.0]), points)
    assert report.verdict == cf.Verdict.HOMOTHETIC and report.constant == pytest.approx(1.0, abs=1e-6)


def test_non_constant_factor_is_conformal(points):
    F = field(EvenPNorm(4, 2), factor=lambda x: np.exp(x[0] ** 2 / 4))
    report = cf.classify_field(F, cf.translation_field([1.0, 0.0]), points)
    assert report.verdict == cf.Verdict.CONFORMAL
    np.testing.assert_allclose(report.factor_samples, points[:, 0] / 2, atol=1e-6)


def test_degenerate_sampling_rejected(points):
    F = field(Euclidean(np.eye(2)))
    with pytest.raises(DegenerateSamplingError):
        cf.classify_field(F, cf.radial_field(2), points[:3])
    with pytest.raises(DegenerateSamplingError):
        cf.classify_field(F, cf.radial_field(2), np.zeros((8, 2)))
    with pytest.raises(DegenerateSamplingError):
        cf.classify_field(F, cf.radial_field(2), points, n_directions=4)


def test_transfer_consistency(points):
    F = field(EvenPNorm(4, 2), factor=lambda x: np.exp(x[0] ** 2 / 4))
    tr = cf.transfer_consistency(F, cf.translation_field([1.0, 0.0]), points)
    assert tr.residual < 1e-4 and tr.consistent
    np.testing.assert_allclose(tr.alpha_g, 2 * tr.finsler.alpha, atol=1e-4)
    assert tr.to_dict()["averaged_verdict"] == "Conformal"


def test_transfer_requires_conformal(points):
    with pytest.raises(ValueError):
        cf.transfer_consistency(field(EvenPNorm(4, 2)), cf.shear_field(2), points)


def test_unit_directions_closed_under_negation():
    u = cf.unit_directions(3, 16, seed=2)
    assert u.shape == (16, 3)
    np.testing.assert_allclose(u[8:], -u[:8])
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0)


def test_homothety_and_h_map():
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    phi = cf.homothety(0.5, A)
    x, xi = phi([2.0, 0.0], [1.0, 0.0])
    np.testing.assert_allclose(x, [0.0, -1.0])
    np.testing.assert_allclose(xi, [0.0, -0.5])
    with pytest.raises(ValueError):
        cf.h_map(1.5, A)
    with pytest.raises(ValueError):
        cf.h_map(0.5, [[1.0, 1.0], [0.0, 1.0]])


def test_iterate_h_preserves_minkowski_values():
    F = field(EvenPNorm(4, 2))
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    values, x, xi = cf.iterate_h(F, 0.5, A, [3.0, 1.0], [0.2, 0.7], iterations=50)
    assert np.max(np.abs(values - values[0])) < 1e-9
    assert np.linalg.norm(x) < 1e-10


def test_iterate_h_detects_non_minkowski():
    # h assumes the homothety scales F by mu, which fails for a non-invariant F
    F = field(EvenPNorm(4, 2), factor=lambda x: 1 + x[0] ** 2)
    values, _, _ = cf.iterate_h(F, 0.5, np.eye(2), [2.0, 0.0], [1.0, 0.0], iterations=10)
    assert np.ptp(values) > 1.0


def test_alpha_g_is_two_for_quartic_radial(points):
    tr = cf.transfer_consistency(field(EvenPNorm(4, 2)), cf.radial_field(2), points)
    np.testing.assert_allclose(tr.alpha_g, 2.0, atol=1e-5)
    assert tr.residual < 1e-5
