import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracop.core_types import ExprSource, Grid, max_regular_diff
from fracop.errors import DomainError
from fracop.gl import GLPlan, gl_derivative, gl_integral, gl_weights
from fracop.rl_caputo import power_rule_oracle, rl_derivative
from fracop.special import gen_binomial

H3 = Grid(0.0, 1.0, 1001)


def test_weights_recurrence_and_memory():
    w = gl_weights(0.5, 4)
    np.testing.assert_allclose(w, [1.0, -0.5, -0.125, -0.0625])
    plan = GLPlan.build(0.5, Grid(0.0, 1.0, 11), memory_length=0.3)
    assert np.count_nonzero(plan.coefficients) == 4
    with pytest.raises(ValueError):
        GLPlan.build(0.5, H3, memory_length=0.0)


@given(st.floats(-2.0, 2.0), st.integers(0, 50))
def test_partial_sums_match_binomial(alpha, K):
    w = gl_weights(alpha, K + 1)
    with mpmath.workdps(40):
        a = mpmath.mpf(alpha)
        direct = [float((-1) ** k * mpmath.fprod((a - j) / (j + 1) for j in range(k))) for k in range(K + 1)]
    np.testing.assert_allclose(w, direct, rtol=1e-10, atol=1e-300)
    ref = (-1) ** K * gen_binomial(alpha - 1, K)
    assert w.sum() == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_first_derivative_of_t_squared():
    val = gl_derivative("t^2", GLPlan.build(1.0, H3)).regular[-1]
    assert abs(val - 2.0) < 1e-2


def test_power_rule_example():
    val = gl_derivative("t", GLPlan.build(0.5, H3)).regular[-1]
    assert val == pytest.approx(1.1283791671, rel=2e-3)


def test_order_zero_is_identity():
    src = ExprSource("sin(t) + 2")
    out = gl_derivative(src, GLPlan.build(0.0, H3))
    np.testing.assert_array_equal(out.regular, src.samples(H3))
    assert out.deltas == ()


def test_integral_examples():
    out = gl_integral("1", GLPlan.build(-1.0, H3))
    np.testing.assert_allclose(out.regular, H3.points + H3.h, atol=0, rtol=1e-12)
    val = gl_integral("t", GLPlan.build(-0.5, H3)).regular[-1]
    assert val == pytest.approx(math.gamma(2) / math.gamma(2.5), rel=2e-3)
    assert not gl_integral("0", GLPlan.build(-0.5, H3)).regular.any()
    with pytest.raises(ValueError):
        gl_integral("t", GLPlan.build(0.5, H3))


def test_convergence_is_first_order():
    hs, errs = [], []
    ref = power_rule_oracle(0.0, 2.0, 0.5, 1.0)
    for k in range(6, 13):
        g = Grid(0.0, 1.0, 2**k + 1)
        hs.append(g.h)
        errs.append(abs(gl_derivative("t^2", GLPlan.build(0.5, g)).regular[-1] - ref))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 0.8 <= slope <= 1.2


def test_gl_approaches_rl():
    diffs = []
    for k in (6, 8, 10):
        g = Grid(0.0, 1.0, 2**k + 1)
        diffs.append(max_regular_diff(gl_derivative("t^2", GLPlan.build(0.5, g)), rl_derivative("t^2", 0.5, g), 0.1))
    assert diffs[0] > diffs[1] > diffs[2]


def test_domain_error_names_node():
    with pytest.raises(DomainError, match="grid node"):
        gl_derivative("(t-0.5)^0.5", GLPlan.build(0.5, Grid(0.0, 1.0, 11)))


def test_nonzero_start_uses_grid_start_as_base():
    g = Grid(1.0, 2.0, 1001)
    val = gl_derivative("(t-1)^2", GLPlan.build(0.5, g)).regular[-1]
    assert val == pytest.approx(power_rule_oracle(1.0, 2.0, 0.5, 2.0), rel=1e-2)
