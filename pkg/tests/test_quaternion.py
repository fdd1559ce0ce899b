import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_orthogonal, random_skew
from nilgeo.errors import DimensionMismatch, GapTooSmall
from nilgeo.quaternion import (
    BASIS_Q,
    BASIS_QHAT,
    QuaternionPair,
    eig_moduli_quaternionic,
    is_double,
    quaternion_split,
    reconstruct,
    versal_extract,
    versal_q,
    versal_rank_check,
)
from nilgeo.resonance import resonance_locate
from nilgeo.skew import block_diag_skew, eigen_moduli

seeds = st.integers(0, 2**32 - 1)
vec3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3)


def test_basis_orthonormal_and_commuting():
    basis = np.concatenate([BASIS_Q, BASIS_QHAT])
    gram = np.einsum("aij,bij->ab", basis, basis) / 4.0
    np.testing.assert_array_equal(gram, np.eye(6))
    for a in BASIS_Q:
        for b in BASIS_QHAT:
            np.testing.assert_array_equal(a @ b, b @ a)


def test_quaternion_relations():
    i, j, k = BASIS_Q
    np.testing.assert_array_equal(i @ i, -np.eye(4))
    np.testing.assert_array_equal(i @ j, k)
    ih, jh, kh = BASIS_QHAT
    np.testing.assert_array_equal(ih @ ih, -np.eye(4))
    np.testing.assert_array_equal(ih @ jh, kh)


@given(seeds)
def test_split_reconstruct_roundtrip(seed):
    a = random_skew(np.random.default_rng(seed), 4)
    pair = quaternion_split(a)
    np.testing.assert_allclose(pair.matrix(), a, atol=1e-14)
    assert pair.norm == pytest.approx(np.linalg.norm(a) / 2, rel=1e-13)


@given(vec3, vec3)
def test_eigenvalue_law(q, qh):
    pair = QuaternionPair(np.array(q), np.array(qh))
    hi, lo = eig_moduli_quaternionic(pair)
    w = eigen_moduli(reconstruct(q, qh)).moduli
    np.testing.assert_allclose([hi, lo], w, atol=1e-12 * (1 + hi))


def test_is_double():
    assert is_double(reconstruct([1, 2, 0], [0, 0, 0]))
    assert is_double(reconstruct([0, 0, 0], [0, 1, 1]))
    assert not is_double(reconstruct([1, 0, 0], [0, 1e-3, 0]))


def test_split_dimension_check():
    with pytest.raises(DimensionMismatch):
        quaternion_split(np.zeros((6, 6)))


@given(seeds)
def test_versal_extract_reconstructs_matrix(seed):
    rng = np.random.default_rng(seed)
    g = random_orthogonal(rng, 6)
    qhat = rng.normal(size=3)
    q = rng.normal(size=3)
    q *= 0.3 * np.linalg.norm(qhat) / np.linalg.norm(q)
    a = np.zeros((6, 6))
    a[:4, :4] = reconstruct(q, qhat)
    a[4:, 4:] = block_diag_skew(0.05 * np.linalg.norm(qhat))
    a = g @ a @ g.T
    v = versal_extract(a)
    f = v.frame
    np.testing.assert_allclose(f.T @ f, np.eye(6), atol=1e-12)
    np.testing.assert_allclose(f[:, :4].T @ a @ f[:, :4], v.top_block, atol=1e-12)
    w = eigen_moduli(a).moduli
    assert v.lam >= v.q_norm
    assert v.top_modulus == pytest.approx(w[0], rel=1e-12)
    assert v.lam - v.q_norm == pytest.approx(w[1], abs=1e-12)
    np.testing.assert_allclose(v.delta_moduli, w[2:], atol=1e-12)


def test_versal_extract_at_double_point_has_zero_q():
    a = block_diag_skew(2.0, 2.0, 0.5)
    v = versal_extract(a)
    assert v.q_norm < 1e-14
    assert v.lam == pytest.approx(2.0)


def test_versal_extract_gap_checks():
    with pytest.raises(GapTooSmall):
        versal_extract(block_diag_skew(1.0, 1.0, 1.0))
    with pytest.raises(GapTooSmall):
        versal_extract(np.zeros((4, 4)))
    with pytest.raises(DimensionMismatch):
        versal_extract(np.zeros((3, 3)))


def test_versal_q_is_continuous_with_reference_frame(families):
    fam = families["F_generic"]
    z = np.array([-0.5, 0.0, 0.5, 0.0])
    base = versal_q(fam, z)
    near = versal_q(fam, z + 1e-6, base.frame)
    assert np.linalg.norm(near.q - base.q) < 1e-5


def test_property_r_on_builtins(families):
    z = resonance_locate(families["F_generic"], [0.3, 0.1, 0.2, -0.1]).z
    rep = versal_rank_check(families["F_generic"], z)
    assert rep.rank == 3 and rep.property_r
    assert rep.jacobian.shape == (3, 4)
    deg = versal_rank_check(families["F_degenerate"], np.zeros(4))
    assert deg.rank == 1 and not deg.property_r
