import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracop.core_types import DiracTerm, Grid, SampledSource
from fracop.ell1 import (
    CLOSED_FORM,
    LAPLACE_NUMERIC,
    delta_difference,
    ell1_derivative,
    ell1_frac_derivative,
    ell1_linearity_check,
    ell1_second_derivative,
    regular_relative_difference,
)
from fracop.errors import InversionWarning

G = Grid(0.0, 2.0, 41)


def test_constant():
    out = ell1_derivative("3", G).value
    assert not out.regular.any()
    assert out.deltas == (DiracTerm(0.0, 0, 3.0), DiracTerm(0.0, 1, -3.0))
    out = ell1_derivative("-3", G).value
    assert out.deltas == (DiracTerm(0.0, 0, 3.0), DiracTerm(0.0, 1, -3.0))


def test_exponential_closed_form():
    out = ell1_derivative("exp(2*t)", G).value
    np.testing.assert_allclose(out.regular, 2 * np.exp(2 * G.points), rtol=1e-14)
    assert out.deltas == (DiracTerm(0.0, 0, 1.0), DiracTerm(0.0, 1, -1.0))


def test_exponential_numeric_path():
    res = ell1_derivative("exp(2*t)", G, LAPLACE_NUMERIC)
    assert res.path == LAPLACE_NUMERIC and res.status == "ok"
    t = G.points
    mask = t >= 0.2
    np.testing.assert_allclose(res.value.regular[mask], 2 * np.exp(2 * t[mask]), rtol=1e-3)
    assert res.value.delta_coefficient(0.0, 0) == pytest.approx(1.0, abs=1e-2)
    assert res.value.delta_coefficient(0.0, 1) == pytest.approx(-1.0, abs=1e-2)


def test_shifted_sine():
    out = ell1_derivative("sin(t) + 2", G).value
    np.testing.assert_allclose(out.regular, np.cos(G.points), rtol=1e-14)
    assert out.deltas == (DiracTerm(0.0, 0, 2.0), DiracTerm(0.0, 1, -2.0))


def test_sign_change_uses_right_limit():
    out = ell1_derivative("t-1", Grid(0.0, 2.0, 5)).value
    np.testing.assert_array_equal(out.regular, [-1, -1, 1, 1, 1])
    assert out.deltas == (DiracTerm(0.0, 0, 1.0), DiracTerm(0.0, 1, -1.0))


def test_jump_in_abs_gives_point_mass():
    # |f| jumps from 1 to 2 at t = 1
    out = ell1_derivative("1 + heaviside(t-1)", G).value
    assert out.delta_coefficient(1.0, 0) == pytest.approx(1.0)


@pytest.mark.parametrize("k", [1, 2])
def test_even_powers_drop_degree(k):
    out = ell1_derivative(f"t^{2 * k}", G).value
    t = G.points
    np.testing.assert_allclose(out.regular, 2 * k * t ** (2 * k - 1), rtol=1e-14)
    assert out.deltas == ()


def test_scaling_property():
    out = ell1_derivative("exp(2*t)", G).value
    ref = 2 * np.exp(2 * G.points)  # a f'(a t) with a = 2, f = e^t
    np.testing.assert_allclose(out.regular, ref, rtol=1e-14)


def test_nonnegative_zero_start_is_classical():
    out = ell1_derivative("t^2 + sin(t)^2", G).value
    t = G.points
    np.testing.assert_allclose(out.regular, 2 * t + np.sin(2 * t), rtol=1e-12, atol=1e-15)
    assert out.deltas == ()


def test_second_derivative_examples():
    out = ell1_second_derivative("t", G).value
    assert np.all(out.regular[1:] == 0)
    assert out.deltas == (DiracTerm(0.0, 0, 1.0),)
    out = ell1_second_derivative("exp(t)", G).value
    np.testing.assert_allclose(out.regular, np.exp(G.points), rtol=1e-14)
    assert out.deltas == (DiracTerm(0.0, 0, 1.0), DiracTerm(0.0, 1, 1.0), DiracTerm(0.0, 2, -1.0))
    out = ell1_second_derivative("0", G).value
    assert not out.regular.any() and out.deltas == ()


def test_second_derivative_interior_zero():
    out = ell1_second_derivative("t-1", G).value
    assert out.delta_coefficient(1.0, 0) == pytest.approx(2.0)
    assert out.delta_coefficient(0.0, 0) == pytest.approx(-1.0)


def test_second_derivative_paths_agree():
    g = Grid(0.0, 2.0, 21)
    a = ell1_second_derivative("exp(t)", g).value
    b = ell1_second_derivative("exp(t)", g, LAPLACE_NUMERIC).value
    assert regular_relative_difference(b, a, 0.2, 2.0) <= 1e-3
    assert delta_difference(a, b) <= 1e-2


def test_frac_examples():
    g = Grid(0.0, 1.0, 1001)
    t = g.points
    out = ell1_frac_derivative("t", 0.5, g).value
    mask = t >= 0.1
    np.testing.assert_allclose(out.regular[mask], 1.1283791671 * t[mask] ** 0.5, rtol=1e-2)
    out = ell1_frac_derivative("-2.5", 0.5, g).value
    assert not out.regular.any() and out.deltas == ()
    near = ell1_frac_derivative("sin(t) + 2", 0.999, g).value.regular
    first = ell1_derivative("sin(t) + 2", g).value.regular
    assert np.abs(near - first)[mask].max() <= 1e-2
    with pytest.raises(ValueError):
        ell1_frac_derivative("t", 1.0, g)


def test_frac_numeric_path():
    g = Grid(0.0, 1.0, 11)
    res = ell1_frac_derivative("t", 0.5, g, LAPLACE_NUMERIC)
    t = g.points
    np.testing.assert_allclose(res.value.regular[1:], 1.1283791671 * t[1:] ** 0.5, rtol=1e-4)
    assert res.value.deltas == ()


def test_frac_of_sign_changing_function():
    # |1 - t| has slope -1 then +1, so its Caputo derivative is
    # -g_{2-alpha}(t) + 2 g_{2-alpha}(t - 1)
    g = Grid(0.0, 2.0, 201)
    t = g.points
    out = ell1_frac_derivative("1-t", 0.5, g).value
    ref = (-2 * np.sqrt(t) + 4 * np.sqrt(np.clip(t - 1, 0, None))) / math.sqrt(math.pi)
    np.testing.assert_allclose(out.regular, ref, atol=1e-12)


def test_frac_of_kinked_function():
    g = Grid(0.0, 2.0, 201)
    t = g.points
    out = ell1_frac_derivative("abs(t-1) + 1", 0.5, g).value
    ref = (-2 * np.sqrt(t) + 4 * np.sqrt(np.clip(t - 1, 0, None))) / math.sqrt(math.pi)
    np.testing.assert_allclose(out.regular, ref, atol=1e-12)


@pytest.mark.parametrize("f", ["exp(2*t)", "sin(t)+2", "3"])
def test_path_agreement(f):
    g = Grid(0.0, 3.0, 61)
    a = ell1_derivative(f, g, CLOSED_FORM).value
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InversionWarning)
        res = ell1_derivative(f, g, LAPLACE_NUMERIC)
    assert res.status in ("ok", "divergence-warning")
    assert regular_relative_difference(res.value, a, 0.2, 3.0) <= 1e-3
    assert delta_difference(a, res.value) <= 1e-2


def test_numeric_path_reports_divergence():
    with pytest.warns(InversionWarning):
        res = ell1_derivative("sin(t)+2", Grid(0.0, 3.0, 61), LAPLACE_NUMERIC)
    assert res.status == "divergence-warning"


def test_linearity_examples():
    g = Grid(0.0, 1.0, 11)
    assert ell1_linearity_check(["2", "3"], [1, 1], g).value == 0.0
    assert ell1_linearity_check(["exp(t)"], [1], g).value == 0.0
    assert ell1_linearity_check(["exp(t)", "1"], [2, 0], g).value == pytest.approx(0.0, abs=1e-12)
    res = ell1_linearity_check(["t-0.5"], [1], g)
    assert res.status == "precondition-restricted" and math.isnan(float(res))
    assert ell1_linearity_check(["t"], [-1], g).status == "precondition-restricted"


@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=4))
def test_linearity_holds_for_nonnegative_combinations(cs):
    g = Grid(0.0, 1.0, 11)
    fs = ["exp(t)", "t^2 + 1", "2", "cos(t) + 1"][: len(cs)]
    res = ell1_linearity_check(fs, cs, g)
    assert res.status == "ok" and res.value <= 1e-12 * (1 + sum(cs))


def test_input_validation():
    with pytest.raises(ValueError):
        ell1_derivative("t", Grid(0.5, 1.0, 5))
    with pytest.raises(ValueError):
        ell1_derivative("t", G, "fast")
    with pytest.raises(TypeError):
        ell1_derivative(SampledSource([0, 1, 2], [0, 1, 2]), G)
