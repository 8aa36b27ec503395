import numpy as np
import pytest

from cvprivacy.fisher import qfim_pure_phase
from cvprivacy.network import (
    ClusterSpec,
    TreeSpec,
    build_cluster_state,
    build_product_squeezed,
    build_tree_state,
    encode_phases,
    tree_covariance_closed_form,
)
from cvprivacy.phase_space import cz_gate, interleaved_to_block, two_mode_squeezed, vacuum_state
from cvprivacy.privacy import average_direction, privacy_measure


def test_tree_spec_labels():
    spec = TreeSpec(3, 0.5)
    assert spec.num_modes == 8
    assert [spec.branch(j) for j in range(8)] == [0, 0, 0, 0, 1, 1, 1, 1]
    np.testing.assert_array_equal(spec.branch_signs(), [1, 1, 1, 1, -1, -1, -1, -1])
    # layer 1 splits each half in two, layer 2 splits the quarters
    assert [spec.layer_sign(j, 1) for j in range(4)] == [1, 1, -1, -1]
    assert [spec.layer_sign(j, 2) for j in range(4)] == [1, -1, 1, -1]
    assert [spec.splitter_index(j, 1) for j in range(8)] == [0, 0, 0, 0, 1, 1, 1, 1]
    with pytest.raises(ValueError):
        TreeSpec(0, 1.0)
    with pytest.raises(ValueError):
        spec.layer_sign(0, 3)


def test_depth_one_is_bare_tmss():
    assert build_tree_state(TreeSpec(1, 0.7)).allclose(two_mode_squeezed(0.7))
    assert tree_covariance_closed_form(TreeSpec(1, 0.7)).allclose(two_mode_squeezed(0.7))


@pytest.mark.parametrize("depth", [2, 3, 4])
def test_tree_at_zero_squeezing_is_vacuum(depth):
    assert build_tree_state(TreeSpec(depth, 0.0)).allclose(vacuum_state(2**depth))


@pytest.mark.parametrize("depth", range(2, 8))
@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 1.5, 2.0])
def test_tree_matches_closed_form(depth, r):
    spec = TreeSpec(depth, r)
    a = build_tree_state(spec).cov
    b = tree_covariance_closed_form(spec).cov
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.cosh(2 * r))


def test_closed_form_entries_depth_two():
    r = 1.0
    blk = interleaved_to_block(tree_covariance_closed_form(TreeSpec(2, r)).cov)
    sx = blk[:4, :4]
    assert sx[0, 0] == pytest.approx(np.cosh(2 * r) / 4 + 0.25, abs=1e-15)
    # same branch: squeezed part cosh(2r)/4, vacuum part -1/4
    assert sx[0, 1] == pytest.approx(np.cosh(2 * r) / 4 - 0.25, abs=1e-15)
    assert sx[0, 2] == pytest.approx(-np.sinh(2 * r) / 4, abs=1e-15)
    assert blk[4, 6] == pytest.approx(np.sinh(2 * r) / 4, abs=1e-15)
    np.testing.assert_array_equal(blk[:4, 4:], 0.0)


@pytest.mark.parametrize("depth", [2, 3, 5])
def test_tree_structure(depth):
    spec = TreeSpec(depth, 0.9)
    tree = build_tree_state(spec)
    assert tree.is_pure()
    np.testing.assert_allclose(interleaved_to_block(tree.cov)[: spec.num_modes, spec.num_modes :], 0.0, atol=1e-15)
    n = tree.mean_photon_numbers()
    half = spec.num_modes // 2
    assert n[:half].sum() == pytest.approx(np.sinh(0.9) ** 2, rel=1e-12)
    assert n[half:].sum() == pytest.approx(np.sinh(0.9) ** 2, rel=1e-12)


@pytest.mark.parametrize("t", [0.1, 1.0, np.pi])
@pytest.mark.parametrize("depth", [2, 3, 4])
def test_branch_sign_encoding_is_invisible(depth, t):
    spec = TreeSpec(depth, 1.0)
    tree = build_tree_state(spec)
    moved = encode_phases(tree, t * spec.branch_signs())
    assert np.max(np.abs(moved.cov - tree.cov)) <= 1e-12


def test_encoding_two_mode_depends_on_sum():
    s = two_mode_squeezed(0.8)
    a = encode_phases(s, [0.3, 0.5]).cov
    b = encode_phases(s, [0.7, 0.1]).cov
    np.testing.assert_allclose(a, b, atol=1e-14)
    assert encode_phases(s, [0.0, 0.0]).allclose(s)
    with pytest.raises(ValueError):
        encode_phases(s, [0.1])


def test_tree_with_loss_and_displacement():
    lossy = build_tree_state(TreeSpec(2, 1.0), eta=0.5)
    assert lossy.is_physical() and not lossy.is_pure()
    disp = build_tree_state(TreeSpec(2, 1.0), alpha=[1.0, 0.0])
    assert disp.is_pure()
    # the displacement of source mode A spreads over the A leaves
    np.testing.assert_allclose(disp.mean[0::2], [1.0, 1.0, 0.0, 0.0], atol=1e-15)


def test_cluster_spec_validation():
    with pytest.raises(ValueError):
        ClusterSpec(3, 1.0, ((0, 3),), 0.5)
    with pytest.raises(ValueError):
        ClusterSpec(3, 1.0, ((1, 1),), 0.5)
    with pytest.raises(ValueError):
        ClusterSpec(3, 1.0, ((0, 1), (1, 2)), [0.5, 0.6, 0.7])
    spec = ClusterSpec.linear_chain(4, 1.0, 0.88)
    assert spec.edges == ((0, 1), (1, 2), (2, 3))
    assert spec.couplings == (0.88, 0.88, 0.88)


def test_cluster_without_coupling_is_product():
    spec = ClusterSpec.linear_chain(4, 0.6, 0.0)
    assert build_cluster_state(spec).allclose(build_product_squeezed(4, -0.6))
    assert build_cluster_state(ClusterSpec.linear_chain(4, 0.6, 0.0, squeezed_quadrature="x")).allclose(
        build_product_squeezed(4, 0.6)
    )


def test_cluster_is_pure_and_cz_symplectic():
    assert cz_gate(0, 1, 0.88, 4).symplectic_residual() < 1e-12
    assert build_cluster_state(ClusterSpec.linear_chain(4, 1.0, 0.88)).is_pure()


def test_cluster_below_tree_at_reported_coupling():
    v = average_direction(4)
    p_cluster = privacy_measure(qfim_pure_phase(build_cluster_state(ClusterSpec.linear_chain(4, 1.0, 0.88))), v)
    p_tree = privacy_measure(qfim_pure_phase(build_tree_state(TreeSpec(2, 1.0))), v)
    assert p_cluster < p_tree


def test_product_squeezed():
    assert build_product_squeezed(3, 0.0).allclose(vacuum_state(3))
    with pytest.raises(ValueError):
        build_product_squeezed(0, 1.0)
    Q = qfim_pure_phase(build_product_squeezed(2, 0.7)).matrix
    np.testing.assert_allclose(Q, (np.cosh(4 * 0.7) - 1) * np.eye(2), atol=1e-12)
    assert privacy_measure(Q, average_direction(2)) == pytest.approx(0.5, abs=1e-15)
    Q4 = qfim_pure_phase(build_product_squeezed(4, 1.3))
    assert privacy_measure(Q4, average_direction(4)) == pytest.approx(0.25, abs=1e-15)
