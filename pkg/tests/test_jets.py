import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapehom.integrands import Integrand, eval_jet, large_p_ellipse, parse_integrand, pareto_objectives
from shapehom.jets import (DomainError, Jet2, directional_derivative, index, jet_mul, jet_powi,
                           jet_sqrt, n_coeffs)

from conftest import central_fd, observed_order


def xy(order, p=(0.0, 0.0)):
    return Jet2.variable(p[0], 0, order), Jet2.variable(p[1], 1, order)


def test_coefficient_count():
    assert [n_coeffs(k) for k in range(4)] == [1, 3, 6, 10]


def test_sqrt_binomial_series():
    x, _ = xy(2)
    s = jet_sqrt(x + 1.0)
    assert s.coeff(0, 0) == pytest.approx(1.0)
    assert s.coeff(1, 0) == pytest.approx(0.5)
    assert s.coeff(2, 0) == pytest.approx(-0.125)


def test_mul_of_coordinates():
    x, y = xy(2)
    c = jet_mul(x, y).c
    assert c[index(1, 1)] == 1.0
    assert np.count_nonzero(c) == 1


def test_powi_binomial():
    x, y = xy(3)
    c = jet_powi(x + y, 3).c
    assert [c[index(a, 3 - a)] for a in (3, 2, 1, 0)] == [1, 3, 3, 1]


def test_sqrt_rejects_nonpositive():
    x, _ = xy(2)
    with pytest.raises(DomainError):
        jet_sqrt(x - 1.0)


def test_clover_value_at_origin():
    f = Integrand.make("clover")
    assert eval_jet(f, (0.0, 0.0), 2).value == pytest.approx((-0.2) ** 4 - 0.01, abs=1e-15)


def test_ellipse_value_and_slope():
    f = Integrand.make("ellipse", a=1.25)
    j = eval_jet(f, (1.25, 0.0), 2)
    assert j.value == pytest.approx(0.0, abs=1e-15)
    assert j.partial(1, 0) == pytest.approx(1.6)


def test_p_ellipse_origin():
    assert eval_jet(large_p_ellipse(), (0.0, 0.0), 1).value == pytest.approx(-256.0)


def test_contraction_trivial_cases():
    x, _ = xy(3, (0.3, 0.2))
    j = x * x
    assert directional_derivative(j, []) == pytest.approx(0.09)
    assert directional_derivative(j, [np.array([1.0, 0]), np.array([1.0, 0])]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        directional_derivative(j, [np.array([1.0, 0])] * 4)


ALL = [Integrand.make("ellipse"), large_p_ellipse(), Integrand.make("clover"),
       Integrand.make("disk"), *pareto_objectives()[::2]]


@pytest.mark.parametrize("f", ALL, ids=lambda f: f.kind)
@pytest.mark.parametrize("m", range(1, 7))
def test_directional_derivative_matches_fd(f, m):
    p = np.array([0.37, -0.21])
    v = np.array([0.6, 0.8])
    exact = directional_derivative(f.jet(p, m), [v] * m)

    def g(s):
        return float(f(p + s * v))

    # FD of order m via repeated central differences, two-point refinement
    def fd(h):
        ks = np.arange(m + 1)
        coef = np.array([(-1) ** k * math.comb(m, k) for k in ks])
        return sum(c * g((m / 2 - k) * h) for c, k in zip(coef, ks)) / h ** m

    hs = [0.08, 0.04, 0.02]
    errs = [abs(fd(h) - exact) for h in hs]
    scale = max(abs(g(s)) for s in np.linspace(-m * hs[0], m * hs[0], 9))
    roundoff = [1e3 * np.finfo(float).eps * 2 ** m * scale / h ** m for h in hs]
    if all(e <= r for e, r in zip(errs, roundoff)):
        return  # low-degree polynomial: the stencil is exact up to round-off
    assert observed_order(errs, hs) >= 1.5


def test_clover_third_derivative_mixed_fd(rng):
    f = Integrand.make("clover")
    p = np.array([0.2, 0.1])
    v = rng.standard_normal((3, 2))
    exact = directional_derivative(f.jet(p, 3), list(v))
    # mixed derivative from the polarisation of s -> f(p + s w)
    h = 4e-3

    def third(w):
        # Richardson extrapolation of the O(h^2) central difference
        g = lambda s: float(f(p + s * w))
        return (4 * central_fd(g, h / 2, 3) - central_fd(g, h, 3)) / 3

    a, b, c = v
    approx = (third(a + b + c) - third(a + b) - third(a + c) - third(b + c)
              + third(a) + third(b) + third(c)) / 6
    assert approx == pytest.approx(exact, rel=1e-5)


def test_p_ellipse_polynomial_exact():
    f = large_p_ellipse()
    j = f.jet(np.array([0.0, 0.0]), 6)
    # (x/2)^4 + (y/0.5)^4 - 256
    assert j.coeff(4, 0) == pytest.approx(1 / 16)
    assert j.coeff(0, 4) == pytest.approx(16.0)
    assert j.coeff(0, 0) == pytest.approx(-256.0)
    others = [j.coeff(a, b) for a in range(7) for b in range(7 - a) if (a, b) not in [(4, 0), (0, 4), (0, 0)]]
    assert np.all(np.array(others) == 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_contraction_is_symmetric(vals):
    f = Integrand.make("clover")
    p = np.array([0.15, 0.4])
    v = np.array(vals[:6]).reshape(3, 2)
    j = f.jet(p, 3)
    base = directional_derivative(j, list(v))
    for perm in [(1, 0, 2), (2, 1, 0), (1, 2, 0)]:
        other = directional_derivative(j, [v[i] for i in perm])
        assert other == pytest.approx(base, rel=1e-13, abs=1e-13)


def test_parse_integrand_forms():
    assert parse_integrand("ellipse{a=1.25}") == Integrand.make("ellipse", a=1.25)
    assert parse_integrand("disk:r=2") == Integrand.make("disk", r=2)
    with pytest.raises(ValueError):
        parse_integrand("banana")
