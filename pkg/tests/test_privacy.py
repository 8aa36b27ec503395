import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cvprivacy.errors import InsensitiveProbeError
from cvprivacy.fisher import PhaseEncodedFamily, qfim_mixed_exact, qfim_pure_phase
from cvprivacy.network import TreeSpec, build_tree_state
from cvprivacy.phase_space import apply_loss, displace, two_mode_squeezed
from cvprivacy.privacy import (
    COMPLETE,
    INSENSITIVE,
    NONE,
    PARTIAL,
    analyze_privacy,
    average_direction,
    classify_regime,
    closed_form_displaced_privacy,
    closed_form_tree_privacy,
    eps_close,
    four_party_privacy,
    kernel,
    privacy_from_covariance,
    privacy_measure,
    private_components,
    tree_privacy_from_spectrum,
)

entries = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def _psd(a):
    Q = a @ a.T
    return Q + 1e-3 * np.eye(Q.shape[0])


def test_measure_basic():
    assert privacy_measure(np.ones((3, 3)), average_direction(3)) == pytest.approx(1.0)
    assert privacy_measure(np.eye(4), average_direction(4)) == pytest.approx(0.25)


def test_measure_rejects_bad_inputs():
    with pytest.raises(ValueError):
        privacy_measure(np.eye(2), [1.0, 1.0])
    with pytest.raises(ValueError):
        privacy_measure(np.eye(2), [1.0, 0.0, 0.0])
    with pytest.raises(InsensitiveProbeError):
        privacy_measure(np.zeros((2, 2)), average_direction(2))


@given(arrays(float, (4, 4), elements=entries), st.floats(1e-3, 1e3))
@settings(max_examples=50)
def test_scale_invariance(a, c):
    Q = _psd(a)
    v = average_direction(4)
    assert privacy_measure(c * Q, v) == pytest.approx(privacy_measure(Q, v), rel=1e-12)


@given(arrays(float, (4, 4), elements=entries), st.integers(0, 2**31))
@settings(max_examples=50)
def test_orthogonal_basis_invariance(a, seed):
    Q = _psd(a)
    O, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(4, 4)))
    v = average_direction(4)
    assert privacy_measure(O @ Q @ O.T, O @ v) == pytest.approx(privacy_measure(Q, v), abs=1e-10)


@given(arrays(float, (3, 3), elements=entries))
@settings(max_examples=50)
def test_measure_is_a_fraction(a):
    P = privacy_measure(_psd(a), average_direction(3))
    assert 0.0 <= P <= 1.0


def test_kernel_and_private_components():
    Q = np.diag([0.0, 1.0, 2.0])
    K = kernel(Q)
    assert K.shape == (3, 1)
    np.testing.assert_array_equal(private_components(Q), [True, False, False])
    assert kernel(np.eye(2)).shape == (2, 0)
    np.testing.assert_array_equal(private_components(np.eye(2)), [False, False])
    np.testing.assert_allclose(eps_close(np.diag([1e-5, 1.0, 2.0])), [1e-5])


@pytest.mark.parametrize(
    "Q, expected",
    [
        (np.ones((2, 2)), COMPLETE),
        (np.eye(2), NONE),
        (np.diag([1.0, 0.0]), PARTIAL),
        (np.zeros((2, 2)), INSENSITIVE),
    ],
)
def test_classify_regime(Q, expected):
    assert classify_regime(Q, average_direction(2)) == expected


def test_report_for_tree():
    rep = analyze_privacy(qfim_pure_phase(build_tree_state(TreeSpec(2, 1.0))))
    assert rep.kernel_dim == 1
    assert rep.regime == PARTIAL
    assert rep.P == pytest.approx(closed_form_tree_privacy(2, 1.0), abs=1e-12)
    assert all(rep.private_flags)
    d = rep.as_dict()
    assert d["kernel_dim"] == 1 and len(d["eigenvalues"]) == 4


def test_report_insensitive_probe():
    rep = analyze_privacy(np.zeros((2, 2)))
    assert rep.P is None and rep.regime == INSENSITIVE


@pytest.mark.parametrize("depth", [2, 3, 4, 5])
@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 2.0])
def test_tree_privacy_routes_agree(depth, r):
    v = average_direction(2**depth)
    P = privacy_measure(qfim_pure_phase(build_tree_state(TreeSpec(depth, r))), v)
    assert P == pytest.approx(closed_form_tree_privacy(depth, r), abs=1e-10)
    assert P == pytest.approx(tree_privacy_from_spectrum(depth, r), abs=1e-12)


def test_tree_privacy_limits():
    assert closed_form_tree_privacy(2, 1.0) == pytest.approx(0.7042381, abs=1e-7)
    assert four_party_privacy(1.0) == closed_form_tree_privacy(2, 1.0)
    assert closed_form_tree_privacy(3, 8.0) == pytest.approx(1.0, abs=1e-5)
    # weak squeezing: the top eigenvalue merges with the degenerate block
    assert closed_form_tree_privacy(3, 1e-4) == pytest.approx(2 / 8, rel=1e-6)
    with pytest.raises(InsensitiveProbeError):
        closed_form_tree_privacy(2, 0.0)
    with pytest.raises(ValueError):
        closed_form_tree_privacy(1, 1.0)


@pytest.mark.parametrize("r", [0.5, 1.0])
@pytest.mark.parametrize("a1", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("a2", [0.0, 0.5, 2.0])
def test_displaced_pair(r, a1, a2):
    s = displace(two_mode_squeezed(r), [a1, a2])
    v = average_direction(2)
    P = privacy_measure(qfim_pure_phase(s), v)
    assert P == pytest.approx(closed_form_displaced_privacy(r, a1, a2), abs=1e-10)
    assert privacy_from_covariance(s.cov, s.mean, v) == pytest.approx(P, abs=1e-12)


def test_displaced_spot_value():
    assert closed_form_displaced_privacy(1.0, 1.0, 0.0) == pytest.approx(0.8180625155625736, abs=1e-13)


def test_displacement_lifts_the_kernel():
    Q = qfim_pure_phase(displace(two_mode_squeezed(1.0), [1.0, 0.0]))
    assert kernel(Q).shape[1] == 0
    assert classify_regime(Q, average_direction(2)) == NONE


@pytest.mark.parametrize("eta", [0.3, 0.6, 0.9])
def test_loss_keeps_complete_privacy(eta):
    Q = qfim_mixed_exact(PhaseEncodedFamily(apply_loss(two_mode_squeezed(1.0), eta)), np.zeros(2))
    rep = analyze_privacy(Q)
    assert rep.regime == COMPLETE
    np.testing.assert_allclose(np.abs(rep.kernel_basis[:, 0]), [1 / np.sqrt(2)] * 2, atol=1e-8)


def test_loss_reduces_tree_privacy():
    ps = []
    for eta in (1.0, 0.8, 0.5):
        st = build_tree_state(TreeSpec(2, 1.0), eta=eta)
        Q = qfim_mixed_exact(PhaseEncodedFamily(st), np.zeros(4))
        ps.append(analyze_privacy(Q).P)
    assert ps[0] > ps[1] > ps[2]
