import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvprivacy.errors import IllConditionedError, InvariantViolation, MixedStateError
from cvprivacy.fisher import (
    CLOSED_FORM,
    DERIVATIVE_FORMULA,
    NUMBER_COVARIANCE,
    SLD_EXACT,
    PhaseEncodedFamily,
    QfimResult,
    mean_photon_stats,
    number_covariance,
    pure_limit_ratio,
    qfim_general,
    qfim_mixed_exact,
    qfim_pure_phase,
    qfim_tree,
    qfim_two_mode_lossy_closed_form,
    tree_qfim_entries,
    tree_spectrum,
)
from cvprivacy.network import TreeSpec, build_tree_state, encode_phases
from cvprivacy.phase_space import (
    GaussianState,
    apply_loss,
    apply_map,
    coherent_state,
    displace,
    single_mode_squeezer,
    two_mode_squeezed,
    vacuum_state,
)


def test_qfim_result_structure():
    res = QfimResult(np.array([[2.0, 1.0], [1.0, 2.0]]), NUMBER_COVARIANCE)
    np.testing.assert_allclose(res.eigenvalues, [1.0, 3.0])
    assert res.reconstruction_error() < 1e-14
    assert res.trace == pytest.approx(4.0)
    # sign convention: first non-zero component positive
    assert np.all(res.eigenvectors[0] > 0)
    assert not res.matrix.flags.writeable
    assert res.scaled(0.5).trace == pytest.approx(2.0)


def test_qfim_result_rejects_bad_input():
    with pytest.raises(InvariantViolation):
        QfimResult(np.diag([1.0, -0.5]), NUMBER_COVARIANCE)
    with pytest.raises(ValueError):
        QfimResult(np.eye(2), "made-up")
    with pytest.raises(ValueError):
        QfimResult(np.ones(3), NUMBER_COVARIANCE)


def test_vacuum_is_insensitive():
    np.testing.assert_allclose(qfim_pure_phase(vacuum_state(3)).matrix, 0.0, atol=1e-15)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.0 + 1.0j])
def test_coherent_state_is_poissonian(alpha):
    Q = qfim_pure_phase(coherent_state([alpha])).matrix
    assert Q[0, 0] == pytest.approx(4 * abs(alpha) ** 2, rel=1e-12)


@pytest.mark.parametrize("r", [0.2, 0.7, 1.3])
def test_squeezed_vacuum_variance(r):
    sq = apply_map(vacuum_state(1), single_mode_squeezer(r))
    # var(n) = sinh^2(2r) / 2 for squeezed vacuum
    assert qfim_pure_phase(sq).matrix[0, 0] == pytest.approx(2 * np.sinh(2 * r) ** 2, rel=1e-12)


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0])
def test_tmss_qfim_is_all_ones(r):
    Q = qfim_pure_phase(two_mode_squeezed(r)).matrix
    np.testing.assert_allclose(Q, np.sinh(2 * r) ** 2 * np.ones((2, 2)), rtol=1e-12)


def test_pure_route_rejects_mixed_state():
    with pytest.raises(MixedStateError):
        qfim_pure_phase(apply_loss(two_mode_squeezed(1.0), 0.5))


def test_number_covariance_symmetric():
    s = displace(build_tree_state(TreeSpec(2, 0.8)), [0.3, 0.2j, 0.0, -0.1])
    C = number_covariance(s)
    np.testing.assert_allclose(C, C.T, atol=1e-14)


@pytest.mark.parametrize("depth", [2, 3])
def test_derivative_formula_doubles_pure_value(depth):
    tree = build_tree_state(TreeSpec(depth, 0.7))
    assert pure_limit_ratio(tree) == pytest.approx(2.0, rel=1e-9)
    res = qfim_general(PhaseEncodedFamily(tree), np.zeros(tree.num_modes))
    assert res.convention == DERIVATIVE_FORMULA
    assert res.notes["pure_limit_ratio"] == pytest.approx(2.0, rel=1e-9)


def test_exact_route_matches_pure_route():
    s = displace(build_tree_state(TreeSpec(2, 0.6)), [0.5, 0.0, -0.2j, 0.1])
    exact = qfim_mixed_exact(PhaseEncodedFamily(s), np.zeros(4))
    assert exact.convention == SLD_EXACT
    np.testing.assert_allclose(exact.matrix, qfim_pure_phase(s).matrix, atol=1e-9)


@pytest.mark.parametrize("fn", [qfim_general, qfim_mixed_exact])
def test_finite_difference_matches_analytic(fn):
    fam = PhaseEncodedFamily(displace(apply_loss(two_mode_squeezed(0.8), 0.7), [0.4, 0.2j]))
    theta = np.array([0.3, -0.2])
    a = fn(fam, theta).matrix
    b = fn(fam, theta, method="finite-difference").matrix
    np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-8)


@given(st.lists(st.floats(-np.pi, np.pi), min_size=2, max_size=2))
@settings(max_examples=25, deadline=None)
def test_qfim_independent_of_theta(theta):
    fam = PhaseEncodedFamily(displace(apply_loss(two_mode_squeezed(0.9), 0.6), [0.5, 0.0]))
    a = qfim_mixed_exact(fam, np.zeros(2)).matrix
    b = qfim_mixed_exact(fam, theta).matrix
    assert np.max(np.abs(a - b)) <= 1e-10 * max(1.0, np.max(np.abs(a)))


@pytest.mark.parametrize("r", [0.5, 1.0])
@pytest.mark.parametrize("eta", [0.3, 0.6, 0.9])
def test_derivative_formula_on_lossy_pair_matches_closed_form(r, eta):
    lossy = apply_loss(two_mode_squeezed(r), eta)
    Q = qfim_general(PhaseEncodedFamily(lossy), np.zeros(2))
    np.testing.assert_allclose(Q.matrix, qfim_two_mode_lossy_closed_form(r, eta).matrix, rtol=1e-9)


@pytest.mark.parametrize("eta", [0.3, 0.6, 0.9, 1.0])
def test_exact_route_lossy_pair_rank_one(eta):
    Q = qfim_mixed_exact(PhaseEncodedFamily(apply_loss(two_mode_squeezed(1.0), eta)), np.zeros(2)).matrix
    assert Q[0, 1] / Q[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert np.linalg.eigvalsh(Q)[0] <= 1e-9 * np.trace(Q)


def test_ill_conditioned_probe_rejected():
    huge = apply_map(vacuum_state(1), single_mode_squeezer(15.0))
    with pytest.raises(IllConditionedError):
        qfim_general(PhaseEncodedFamily(huge), [0.0])


def test_closed_form_rejects_full_loss():
    with pytest.raises(ValueError):
        qfim_two_mode_lossy_closed_form(1.0, 0.0)


@pytest.mark.parametrize("depth", range(2, 7))
@pytest.mark.parametrize("r", [0.1, 1.0, 2.0])
def test_tree_spectrum_matches_state(depth, r):
    w = qfim_pure_phase(build_tree_state(TreeSpec(depth, r))).eigenvalues
    ref = tree_spectrum(depth, r).eigenvalues
    assert np.max(np.abs(w - ref)) <= 1e-9 * ref.max()


def test_tree_spectrum_eigenvectors():
    sp = tree_spectrum(3, 1.0)
    Q = qfim_pure_phase(build_tree_state(TreeSpec(3, 1.0))).matrix
    np.testing.assert_allclose(Q @ sp.v_zero, 0.0, atol=1e-10)
    np.testing.assert_allclose(Q @ sp.v_avg, sp.lambda_plus * sp.v_avg, atol=1e-10)
    with pytest.raises(ValueError):
        tree_spectrum(1, 1.0)


def test_qfim_tree_dual_route():
    res = qfim_tree(4, 1.5)
    assert res.convention == CLOSED_FORM
    assert res.notes["dual_route_error"] < 1e-9


def test_tree_entries():
    Q = qfim_pure_phase(build_tree_state(TreeSpec(3, 0.8))).matrix
    e = tree_qfim_entries(3, 0.8)
    assert Q[0, 0] == pytest.approx(e["diagonal"], rel=1e-10)
    assert Q[0, 1] == pytest.approx(e["same_branch"], rel=1e-10)
    assert Q[0, 7] == pytest.approx(e["cross_branch"], rel=1e-10)


@pytest.mark.parametrize("depth", range(2, 7))
def test_photon_stats(depth):
    s = mean_photon_stats(depth, 1.2)
    assert s["lambda_snl"] == pytest.approx(4 * s["n_mode"], rel=1e-12)
    assert s["lambda_max"] / s["lambda_snl"] == pytest.approx(s["n_total"] + 2, rel=1e-12)
    assert s["lambda_max"] == pytest.approx(tree_spectrum(depth, 1.2).lambda_plus, rel=1e-12)


def test_encoded_state_keeps_pure_qfim():
    tree = build_tree_state(TreeSpec(2, 1.0))
    moved = encode_phases(tree, [0.3, -1.0, 2.0, 0.4])
    np.testing.assert_allclose(qfim_pure_phase(moved).matrix, qfim_pure_phase(tree).matrix, atol=1e-10)


def test_family_derivatives_shape():
    fam = PhaseEncodedFamily(GaussianState(np.eye(4) * 0.5))
    st, dcov, dmean = fam.derivatives(np.zeros(2))
    assert st.num_modes == 2
    assert len(dcov) == 2 and dcov[0].shape == (4, 4)
    assert len(dmean) == 2 and dmean[0].shape == (4,)
