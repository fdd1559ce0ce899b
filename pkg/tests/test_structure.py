import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_orthogonal, random_skew
from nilgeo.errors import DependentPair, DimensionMismatch, FamilyParseError
from nilgeo.quaternion import QI, QI_HAT, QJ, QJ_HAT, QK
from nilgeo.skew import eigen_moduli, hs_inner
from nilgeo.structure import (
    BUILTIN_NAMES,
    StructureFamily,
    builtin,
    builtin_text,
    dumps_family,
    eval_family,
    hausdorff_dimension,
    load_family,
    loads_family,
    pencil,
    popp_normalize,
    save_family,
)

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(3, 8))
def test_popp_normalize_is_orthonormal(seed, p):
    rng = np.random.default_rng(seed)
    s = popp_normalize(random_skew(rng, p), random_skew(rng, p))
    assert hs_inner(s.L1, s.L1) == pytest.approx(1.0, rel=1e-12)
    assert hs_inner(s.L2, s.L2) == pytest.approx(1.0, rel=1e-12)
    assert abs(hs_inner(s.L1, s.L2)) < 1e-12
    assert hausdorff_dimension(s) == p + 4


@given(seeds, st.floats(0.1, 10.0))
def test_popp_normalize_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    a, b = random_skew(rng, 4), random_skew(rng, 4)
    s1, s2 = popp_normalize(a, b), popp_normalize(c * a, c * b)
    np.testing.assert_allclose(s1.L1, s2.L1, atol=1e-12)
    np.testing.assert_allclose(s1.L2, s2.L2, atol=1e-12)


def test_dependent_pair_and_dimensions():
    a = random_skew(np.random.default_rng(0), 4)
    with pytest.raises(DependentPair) as exc:
        popp_normalize(a, 2 * a, xi=[0.5])
    assert exc.value.xi == (0.5,)
    with pytest.raises(DependentPair):
        popp_normalize(a, np.zeros((4, 4)))
    with pytest.raises(DimensionMismatch):
        popp_normalize(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(DimensionMismatch):
        popp_normalize(a, np.zeros((5, 5)))


@given(seeds, st.floats(-math.pi, math.pi), st.floats(0, 2 * math.pi))
def test_rotated_shifts_pencil(seed, alpha, theta):
    rng = np.random.default_rng(seed)
    s = popp_normalize(random_skew(rng, 5), random_skew(rng, 5))
    np.testing.assert_allclose(s.rotated(alpha).pencil_matrix(theta), s.pencil_matrix(theta - alpha), atol=1e-12)


@given(seeds, st.floats(0, 2 * math.pi))
def test_conjugation_preserves_pencil_spectrum(seed, theta):
    rng = np.random.default_rng(seed)
    s = popp_normalize(random_skew(rng, 6), random_skew(rng, 6))
    t = s.conjugated(random_orthogonal(rng, 6))
    np.testing.assert_allclose(
        eigen_moduli(t.pencil_matrix(theta)).moduli, eigen_moduli(s.pencil_matrix(theta)).moduli, atol=1e-12
    )


def test_pencil_is_read_only():
    s = eval_family(builtin("F_generic"), [0.1, 0.2, 0.3])
    pc = pencil(s, 0.3, 2.0)
    np.testing.assert_allclose(pc.matrix, 2.0 * (math.cos(0.3) * s.L1 + math.sin(0.3) * s.L2))
    with pytest.raises(ValueError):
        pc.matrix[0, 1] = 1.0


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtins_roundtrip_bit_identically(name, tmp_path):
    text = builtin_text(name)
    fam = loads_family(text)
    assert dumps_family(fam) == text
    save_family(fam, tmp_path / "f.json")
    assert (tmp_path / "f.json").read_text() == text
    assert load_family(tmp_path / "f.json").canonical_text() == text
    s = eval_family(fam, np.full(fam.param_dim, 0.1))
    assert s.p == fam.p and fam.n == fam.p + 2


def test_generic_family_structure():
    fam = builtin("F_generic")
    l1, l2 = fam.raw([0.1, -0.2, 0.3])
    np.testing.assert_allclose(l1, QI_HAT + 0.1 * QI - 0.2 * QJ + 0.3 * QK)
    np.testing.assert_allclose(l2, QJ + 0.5 * QJ_HAT)


def test_scaled_family_normalizes_identically():
    fam = builtin("F_generic")
    big = fam.scaled(2.0)
    assert big.name == "F_generic_x2"
    xi = [0.2, -0.1, 0.4]
    a, b = eval_family(fam, xi), eval_family(big, xi)
    np.testing.assert_allclose(a.L1, b.L1, atol=1e-14)
    np.testing.assert_allclose(a.L2, b.L2, atol=1e-14)


def test_from_matrices():
    e = np.zeros((3, 3))
    e[0, 1], e[1, 0] = 1.0, -1.0
    f = np.zeros((3, 3))
    f[1, 2], f[2, 1] = 1.0, -1.0
    fam = StructureFamily.from_matrices("tiny", {(0,): e}, {(0,): f, (1,): e}, p=3, param_dim=1)
    l1, l2 = fam.raw([2.0])
    np.testing.assert_allclose(l2, f + 2.0 * e)
    assert loads_family(fam.canonical_text()).canonical_text() == fam.canonical_text()


def test_family_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        builtin("F_generic").raw([0.0, 0.0])


BAD_DOCS = [
    ('{"format": "nilgeo-family/1", "p": 4,\n "param_dim": 1,', None),
    ('{"format": "x", "p": 4, "param_dim": 0, "L1": [], "L2": []}', "format"),
    ('{"format": "nilgeo-family/1", "p": 4, "param_dim": 0, "L1": [], "L2": [], "extra": 1}', "extra"),
    ('{"format": "nilgeo-family/1", "p": 2, "param_dim": 0, "L1": [], "L2": []}', "p"),
    ('{"format": "nilgeo-family/1", "p": 4, "param_dim": 0, "L1": []}', "L2"),
    (
        '{"format": "nilgeo-family/1", "p": 4, "param_dim": 1, "L1": [{"monomial": [0, 1], "coeff": []}], "L2": []}',
        "L1[0].monomial",
    ),
    (
        '{"format": "nilgeo-family/1", "p": 4, "param_dim": 0, "L1": [{"monomial": [], "coeff": [[1, 0, 1.0]]}], '
        '"L2": []}',
        "L1[0].coeff[0]",
    ),
    (
        '{"format": "nilgeo-family/1", "p": 4, "param_dim": 0, "L1": [{"monomial": [], "coeff": '
        '[[0, 1, 1.0], [0, 1, 2.0]]}], "L2": []}',
        "L1[0].coeff[1]",
    ),
    (
        '{"format": "nilgeo-family/1", "p": 4, "param_dim": 0, "L1": [], "L2": [{"monomial": [], "coeff": '
        '[[0, 1, "a"]]}]}',
        "L2[0].coeff[0]",
    ),
    (
        '{"format": "nilgeo-family/1", "p": 4, "param_dim": 0, "L1": [], "L2": [{"monomial": [], "coeff": '
        '[[0, 1, 1e999]]}]}',
        "L2[0].coeff[0]",
    ),
]


@pytest.mark.parametrize("text,field", BAD_DOCS)
def test_parse_errors_carry_location(text, field):
    with pytest.raises(FamilyParseError) as exc:
        loads_family(text)
    if field is None:
        assert exc.value.line == 2
    else:
        assert exc.value.field == field


def test_unknown_builtin_and_missing_file(tmp_path):
    with pytest.raises(FamilyParseError):
        builtin("F_nothing")
    with pytest.raises(FamilyParseError):
        load_family(tmp_path / "missing.json")
