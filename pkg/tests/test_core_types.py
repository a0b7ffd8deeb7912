import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracop.core_types import (
    DiracTerm,
    DistributionalSignal,
    ExprSource,
    FracOrder,
    Grid,
    SampledSource,
    as_source,
    distributional_add,
    from_csv,
    max_regular_diff,
    read_samples_csv,
    to_csv,
)
from fracop.ell1 import ell1_derivative
from fracop.errors import DeltaOrderError, DomainError, GridMismatchError

GRID = Grid(0.0, 1.0, 11)


def test_grid_points_and_step():
    g = Grid(0.0, 2.0, 5)
    assert g.h == 0.5
    np.testing.assert_array_equal(g.points, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert Grid.from_step(1.0, 1e-3).n_points == 1001


@pytest.mark.parametrize("args", [(-1.0, 1.0, 5), (1.0, 1.0, 5), (0.0, 1.0, 1), (0.0, 1.0, 2.5)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        Grid(*args)


def test_frac_order_ceiling():
    assert FracOrder(0.5).n == 1
    assert FracOrder(1.0).n == 1
    assert FracOrder(1.2).n == 2
    assert FracOrder(-0.5).n == 0
    assert FracOrder(2.0).is_integer


def test_dirac_term_validation():
    with pytest.raises(DeltaOrderError):
        DiracTerm(0.0, 3, 1.0)
    with pytest.raises(ValueError):
        DiracTerm(0.0, -1, 1.0)
    with pytest.raises(ValueError):
        DiracTerm(0.0, 0, math.inf)
    d = DiracTerm(np.float64(1.0), 1, 2)
    assert type(d.location) is float and type(d.coefficient) is float


def test_signal_normalises_deltas():
    sig = DistributionalSignal(
        GRID, np.zeros(11), (DiracTerm(1.0, 0, 1.0), DiracTerm(0.0, 1, 2.0), DiracTerm(0.0, 1, -2.0), DiracTerm(0.0, 0, 1.0))
    )
    assert sig.deltas == (DiracTerm(0.0, 0, 1.0), DiracTerm(1.0, 0, 1.0))
    assert sig.delta_coefficient(1.0, 0) == 1.0
    assert sig.delta_coefficient(1.0, 1) == 0.0
    with pytest.raises(ValueError):
        sig.regular[0] = 1.0
    with pytest.raises(ValueError):
        DistributionalSignal(GRID, np.zeros(10))


def test_distributional_add_examples():
    a = DistributionalSignal(GRID, np.zeros(11), (DiracTerm(0.0, 0, 3.0),))
    b = DistributionalSignal(GRID, np.zeros(11), (DiracTerm(0.0, 0, -3.0),))
    s = distributional_add(a, b)
    assert s.deltas == () and not s.regular.any()
    t = GRID.points
    s = distributional_add(DistributionalSignal(GRID, t), DistributionalSignal(GRID, 1 - t))
    np.testing.assert_allclose(s.regular, 1.0, rtol=0, atol=1e-15)
    with pytest.raises(GridMismatchError):
        distributional_add(a, DistributionalSignal(Grid(0.0, 2.0, 11), np.zeros(11)))


def test_distributional_add_of_ell1_constants():
    g = Grid(0.0, 1.0, 5)
    lhs = distributional_add(ell1_derivative("2", g).value, ell1_derivative("3", g).value)
    rhs = ell1_derivative("5", g).value
    assert lhs.deltas == rhs.deltas == (DiracTerm(0.0, 0, 5.0), DiracTerm(0.0, 1, -5.0))


_sig = st.lists(
    st.tuples(st.sampled_from([0.0, 0.5, 1.0]), st.integers(0, 2), st.integers(-8, 8).map(float)), max_size=5
).map(lambda ds: DistributionalSignal(GRID, np.zeros(11), tuple(DiracTerm(*d) for d in ds)))


@given(_sig, _sig, _sig)
def test_add_commutative_and_associative(a, b, c):
    assert distributional_add(a, b).deltas == distributional_add(b, a).deltas
    left = distributional_add(distributional_add(a, b), c)
    right = distributional_add(a, distributional_add(b, c))
    assert left.deltas == right.deltas


def test_max_regular_diff_examples():
    t = GRID.points
    a = DistributionalSignal(GRID, t)
    assert max_regular_diff(a, a, 0.0) == 0.0
    assert max_regular_diff(a, DistributionalSignal(GRID, t + GRID.h), 0.0) == pytest.approx(GRID.h, rel=1e-12)
    b = DistributionalSignal(GRID, np.where(t < 0.5, 10.0, t))
    assert max_regular_diff(a, b, 0.5) == 0.0
    with pytest.raises(ValueError):
        max_regular_diff(a, a, 2.0)


def test_expr_source_and_domain_error_node():
    src = ExprSource("(t-0.35)^0.5")
    with pytest.raises(DomainError) as info:
        src.samples(GRID)
    assert info.value.node_index == 0
    src = ExprSource("(0.35-t)^0.5")
    with pytest.raises(DomainError) as info:
        src.samples(GRID)
    assert info.value.node_index == 4
    assert "grid node 4" in str(info.value)


def test_sampled_source_interpolates():
    s = SampledSource([0.0, 1.0, 3.0], [0.0, 2.0, 0.0])
    np.testing.assert_allclose(s.value_at([0.5, 2.0, 5.0]), [1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        SampledSource([0.0, 0.0, 1.0], [1, 2, 3])
    assert isinstance(as_source("t"), ExprSource)
    with pytest.raises(TypeError):
        as_source(3.0)


@given(st.lists(st.floats(-1e300, 1e300), min_size=11, max_size=11))
def test_csv_roundtrip_is_bit_exact(vals):
    sig = DistributionalSignal(GRID, np.array(vals))
    back = from_csv(to_csv(sig))
    np.testing.assert_array_equal(back.regular, sig.regular)
    assert back.grid.n_points == GRID.n_points


def test_csv_delta_prologue():
    sig = DistributionalSignal(GRID, np.zeros(11), (DiracTerm(0.0, 1, -1.5),))
    text = to_csv(sig, digits=12)
    assert text.startswith("# delta,0,1,-1.5\nt,value\n")
    assert from_csv(text).deltas == sig.deltas


def test_csv_rejects_non_monotone_t():
    with pytest.raises(ValueError, match="strictly increasing"):
        read_samples_csv("t,value\n0,1\n0.5,2\n0.4,3\n")
    with pytest.raises(ValueError, match="header"):
        read_samples_csv("x,y\n0,1\n1,2\n")
