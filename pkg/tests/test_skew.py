import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_orthogonal, random_skew
from nilgeo.errors import DimensionMismatch, NotSkewSymmetric
from nilgeo.skew import (
    J2,
    SkewMatrix,
    block_diag_skew,
    centralizer_dimension,
    eigen_moduli,
    hs_inner,
    max_modulus,
    model_matrix,
    multiplicity_at_top,
    orbit_codimension_report,
    skew_basis,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 9)


def eig_reference(a):
    w = np.sort(np.abs(np.linalg.eigvals(a).imag))[::-1]
    return w[: a.shape[0] // 2 * 2 : 2]


@given(seeds, dims)
def test_moduli_match_general_eigensolver(seed, p):
    a = random_skew(np.random.default_rng(seed), p)
    sd = eigen_moduli(a)
    assert len(sd.moduli) == p // 2
    assert np.all(np.diff(sd.moduli) <= 0)
    np.testing.assert_allclose(sd.moduli, eig_reference(a), atol=1e-12 * (1 + sd.moduli[0]))


@given(seeds, dims)
def test_block_frame_gives_real_normal_form(seed, p):
    a = random_skew(np.random.default_rng(seed), p)
    sd = eigen_moduli(a)
    g = sd.block_frame
    np.testing.assert_allclose(g.T @ g, np.eye(p), atol=1e-12)
    blocks = list(sd.moduli) + ([None] if p % 2 else [])
    np.testing.assert_allclose(g.T @ a @ g, block_diag_skew(*blocks), atol=1e-11)


@given(seeds, dims)
def test_hs_norm_is_sum_of_squared_moduli(seed, p):
    a = random_skew(np.random.default_rng(seed), p)
    w = eigen_moduli(a).moduli
    assert hs_inner(a, a) == pytest.approx(2 * np.sum(w**2) / p, rel=1e-12)


@given(seeds, st.integers(2, 8))
def test_moduli_invariant_under_orthogonal_conjugation(seed, p):
    rng = np.random.default_rng(seed)
    a = random_skew(rng, p)
    g = random_orthogonal(rng, p)
    b = g @ a @ g.T
    np.testing.assert_allclose(eigen_moduli(b).moduli, eigen_moduli(a).moduli, atol=1e-11)


def test_multiplicities_and_gap():
    sd = eigen_moduli(block_diag_skew(2.0, 2.0, 1.0, None))
    np.testing.assert_allclose(sd.moduli, [2.0, 2.0, 1.0])
    assert sd.multiplicities == (2, 1)
    assert sd.gap == pytest.approx(1.0)
    assert sd.top_gap == pytest.approx(0.0, abs=1e-14)
    assert multiplicity_at_top(block_diag_skew(3.0, 3.0, 3.0)) == 3
    assert multiplicity_at_top(block_diag_skew(3.0, 1.0)) == 1


def test_zero_matrix():
    sd = eigen_moduli(np.zeros((5, 5)))
    np.testing.assert_array_equal(sd.moduli, [0.0, 0.0])
    assert sd.multiplicities == (2,)
    assert sd.gap == math.inf
    assert max_modulus(np.zeros((4, 4))) == 0.0


def test_skew_matrix_validation():
    with pytest.raises(NotSkewSymmetric):
        SkewMatrix(np.eye(3))
    with pytest.raises(NotSkewSymmetric):
        SkewMatrix(np.zeros((2, 3)))
    with pytest.raises(NotSkewSymmetric):
        SkewMatrix([[0.0, np.nan], [-np.nan, 0.0]])
    m = SkewMatrix(J2)
    assert m.dim == 2
    with pytest.raises(ValueError):
        m.entries[0, 1] = 5.0
    assert m == SkewMatrix(J2.copy())
    assert hash(m) == hash(SkewMatrix(J2.copy()))


def test_hs_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        hs_inner(np.zeros((3, 3)), np.zeros((4, 4)))


def test_skew_basis_is_orthogonal():
    b = skew_basis(5)
    assert b.shape == (10, 5, 5)
    gram = np.einsum("aij,bij->ab", b, b)
    np.testing.assert_array_equal(gram, 2 * np.eye(10))


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_model_centralizer_dimensions(n):
    assert centralizer_dimension(model_matrix(n, "generic")) == n
    assert centralizer_dimension(model_matrix(n, "double")) == n + 2
    if n >= 3:
        assert centralizer_dimension(model_matrix(n, "triple")) == n + 6


@given(seeds, st.integers(2, 5))
def test_centralizer_of_random_element_is_a_torus(seed, n):
    a = random_skew(np.random.default_rng(seed), 2 * n)
    assert centralizer_dimension(a) == n


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_orbit_codimensions(n):
    rep = orbit_codimension_report(n)
    assert rep.line("double").codimension == 3
    assert rep.line("triple").codimension == 8
    assert rep.line("triple").centralizer_dim == n + 6
    with pytest.raises(KeyError):
        rep.line("quadruple")


def test_orbit_report_range():
    with pytest.raises(ValueError):
        orbit_codimension_report(7)
    assert [ln.kind for ln in orbit_codimension_report(2).lines] == ["double"]
