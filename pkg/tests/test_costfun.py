import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from cgbias import (
    CalculusUnavailable,
    Capacity,
    DomainError,
    Identity,
    MeanVar,
    Override,
    Pessimism,
    Polynomial,
    ShiftedPower,
    TableCost,
    Tax,
    apply_bias,
    marginal,
    small_bias_factor,
)

coefs = st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=5)


@settings(max_examples=50, deadline=None)
@given(coefs, st.floats(0, 4))
def test_polynomial_calculus_matches_quadrature(c, x):
    p = Polynomial(c)
    assert p(x) == pytest.approx(np.polynomial.polynomial.polyval(x, c), rel=1e-12, abs=1e-12)
    assert p.integral(x) == pytest.approx(quad(p, 0, x)[0], rel=1e-9, abs=1e-9)
    h = 1e-6
    assert p.deriv(x + h) == pytest.approx((p(x + 2 * h) - p(x)) / (2 * h), rel=1e-4, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(coefs, st.floats(0, 4))
def test_marginal_cost(c, x):
    p = Polynomial(c)
    assert marginal(p)(x) == pytest.approx(p(x) + x * p.deriv(x), rel=1e-12, abs=1e-12)


def test_shifted_power():
    c = ShiftedPower(4.0, 3)
    assert c(0.5) == pytest.approx(0.5)
    assert c.to_polynomial()(0.7) == pytest.approx(c(0.7))
    assert c.integral(1.0) == pytest.approx(quad(c, 0, 1)[0])


def test_negative_load_rejected():
    with pytest.raises(DomainError):
        Polynomial([0, 1])(-1.0)


def test_table_cost_has_no_calculus():
    t = TableCost([0, 1, 2], [0, 1, 4])
    assert t(1.5) == pytest.approx(2.5)
    assert not t.has_calculus
    with pytest.raises(CalculusUnavailable):
        t.deriv(1.0)


def test_tax_and_pessimism_closed_forms():
    c = Polynomial([1, 2, 3])
    xs = np.linspace(0, 3, 7)
    tax = apply_bias(c, Tax(0.5)).perceived
    assert np.allclose(tax(xs), c(xs) + 0.5 * xs * c.deriv(xs))
    pes = apply_bias(c, Pessimism(2.0)).perceived
    assert np.allclose(pes(xs), c(2 * xs))
    assert apply_bias(c, Identity()).perceived is c
    assert apply_bias(c, Tax(1.0)).perceived == marginal(c)


def test_pessimism_on_shifted_power():
    c = ShiftedPower(8.0, 2, 0.25)
    pes = apply_bias(c, Pessimism(3.0)).perceived
    for x in (0.1, 0.5, 1.0):
        assert pes(x) == pytest.approx(c(3 * x))


def test_meanvar_and_override():
    c = Polynomial([1, 1])
    mv = apply_bias(c, MeanVar(2.0, Polynomial([0, 0.5]), kappa=0.5)).perceived
    assert mv(2.0) == pytest.approx(3 + 2 * 1.0)
    per_edge = MeanVar(1.0, {"e": Polynomial([0, 1])})
    assert apply_bias(c, per_edge, "e").perceived(1.0) == pytest.approx(3.0)
    assert apply_bias(c, per_edge, "other").perceived(1.0) == pytest.approx(2.0)
    ov = Override({"e": Polynomial([7])})
    assert apply_bias(c, ov, "e").perceived(3.0) == 7
    assert apply_bias(c, ov, "f").perceived(3.0) == 4


def test_meanvar_kappa_violation_warns():
    with pytest.warns(UserWarning):
        bc = apply_bias(Polynomial([0, 1]), MeanVar(1.0, Polynomial([1.0]), kappa=0.5))
    assert bc.kappa is None


def test_capacity_bias():
    c = Polynomial([0, 1])
    cap = Capacity(2.0, 0.5, 3.0)
    bc = apply_bias(c, cap).perceived
    xs = np.linspace(0, 4, 401)
    vals = bc(xs)
    assert np.all(vals >= c(xs) - 1e-12)
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.allclose(vals[xs <= 1.5], c(xs[xs <= 1.5]))
    assert bc(2.0) >= cap.M * c(2.0)


def test_bias_validation():
    with pytest.raises(ValueError):
        Tax(-0.1)
    with pytest.raises(ValueError):
        Pessimism(0.5)
    with pytest.raises(ValueError):
        Capacity(1.0, 2.0, 1.0)


def test_small_bias_factor():
    c = Polynomial([1, 1])
    assert small_bias_factor(c, apply_bias(c, Identity())) == 0
    eps = small_bias_factor(c, apply_bias(c, Tax(0.1)))
    assert eps == pytest.approx(0.1 * 10 / 11, rel=1e-9)
