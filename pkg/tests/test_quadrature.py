import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gammaln

from nilgeo.quadrature import (
    ball_product_rule,
    ball_volume_euclidean,
    gauss_legendre,
    qmc_ball_points,
    radial_rule,
    sphere_area,
    sphere_rule,
)


def sphere_moment(alpha):
    """Exact integral of x^alpha over S^(p-1)."""
    alpha = np.asarray(alpha)
    if np.any(alpha % 2):
        return 0.0
    b = (alpha + 1) / 2.0
    return 2.0 * math.exp(np.sum(gammaln(b)) - gammaln(b.sum()))


def monomials(p, degree):
    for alpha in itertools.product(range(degree + 1), repeat=p):
        if sum(alpha) <= degree:
            yield alpha


def test_sphere_area_values():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert ball_volume_euclidean(3) == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("p", [2, 3, 4, 5])
@pytest.mark.parametrize("degree", [5, 7])
def test_sphere_rule_exact_to_degree(p, degree):
    x, w = sphere_rule(p, degree)
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-14)
    for alpha in monomials(p, degree):
        got = w @ np.prod(x ** np.array(alpha), axis=1)
        assert got == pytest.approx(sphere_moment(alpha), abs=1e-13)


@pytest.mark.parametrize("p", [6, 8])
def test_sphere_rule_high_dimension_even_moments(p):
    x, w = sphere_rule(p, 7)
    for alpha in ([2] + [0] * (p - 1), [4] + [0] * (p - 1), [2, 2] + [0] * (p - 2), [2, 2, 2] + [0] * (p - 3)):
        assert w @ np.prod(x ** np.array(alpha), axis=1) == pytest.approx(sphere_moment(alpha), rel=1e-12)


def test_sphere_rule_not_exact_beyond_degree():
    x, w = sphere_rule(3, 5)
    got = w @ x[:, 0] ** 8
    assert abs(got - sphere_moment([8, 0, 0])) > 1e-6


@given(st.integers(1, 9), st.integers(0, 14))
def test_radial_rule_moments(p, k):
    rho, w = radial_rule(p, 8)
    assert w @ rho**k == pytest.approx(1.0 / (p + k), rel=1e-13)


@pytest.mark.parametrize("p", [3, 4, 6])
def test_ball_product_rule(p):
    x, w = ball_product_rule(p, 7, 8)
    assert w.sum() == pytest.approx(ball_volume_euclidean(p), rel=1e-13)
    r2 = np.sum(x**2, axis=1)
    # int_B |x|^4 = area / (p + 4)
    assert w @ r2**2 == pytest.approx(sphere_area(p) / (p + 4), rel=1e-13)
    assert abs(w @ (x[:, 0] ** 3 * x[:, 1])) < 1e-14


def test_rules_are_read_only():
    x, w = sphere_rule(4, 7)
    with pytest.raises(ValueError):
        w[0] = 1.0
    nodes, _ = gauss_legendre(8)
    with pytest.raises(ValueError):
        nodes[0] = 1.0


@given(st.integers(0, 10))
def test_gauss_legendre_unit_interval(k):
    x, w = gauss_legendre(8)
    assert np.all((x > 0) & (x < 1))
    assert w @ x**k == pytest.approx(1.0 / (k + 1), rel=1e-13)


def test_qmc_points_uniform_in_ball():
    rng = np.random.default_rng(3)
    pts = qmc_ball_points(4, 4096, rng)
    assert pts.shape == (4096, 4)
    assert np.all(np.linalg.norm(pts, axis=1) <= 1.0)
    # E|x|^2 = p / (p + 2) for the uniform ball
    assert np.mean(np.sum(pts**2, axis=1)) == pytest.approx(4 / 6, rel=1e-2)
    np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=1e-2)
    again = qmc_ball_points(4, 4096, np.random.default_rng(3))
    np.testing.assert_array_equal(pts, again)
