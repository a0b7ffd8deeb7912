"""The l1 derivative L^-1[s L|f|(s) - s |f(0)|] and its relatives.

Two independent routes are provided. ``closed_form`` writes the result as
sign(f) f' plus point masses at 0 directly from the expression.
``laplace_numeric`` forward-transforms |f| numerically, splits the
polynomial-in-s growth into point masses and inverts the rest with
Gaver–Stehfest.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import expression as ex
from .core_types import (
    DiracTerm,
    DistributionalSignal,
    ExprSource,
    Grid,
    SampledSource,
    as_source,
    distributional_add,
    max_regular_diff,
)
from .errors import InversionWarning, UnsupportedTransformError
from .laplace import LaplaceField, initial_value, invert_stehfest, split_polynomial
from .rl_caputo import _integral_samples, _l1_form
from .special import power_kernel

CLOSED_FORM = "closed_form"
LAPLACE_NUMERIC = "laplace_numeric"
PATHS = (CLOSED_FORM, LAPLACE_NUMERIC)
MAX_ZEROS = 1000


@dataclass(frozen=True)
class Ell1Result:
    """``status`` is "ok" or "divergence-warning" (numeric inversion unsettled)."""

    value: DistributionalSignal
    path: str
    status: str = "ok"


def _check(grid: Grid, path: str):
    if path not in PATHS:
        raise ValueError(f"path must be one of {PATHS}, got {path!r}")
    if grid.t_start != 0:
        raise ValueError("l1 derivatives are anchored at 0; grid must start at 0")


def _expr_of(src) -> ex.Expr:
    if not isinstance(src, ExprSource):
        raise TypeError("the closed-form path needs an expression source")
    return src.expr


def _right_sign(f: np.ndarray, df: np.ndarray, d2f=None) -> np.ndarray:
    """sign(f), with the right limit sign(f') (then sign(f'')) where f = 0."""
    s = np.sign(f)
    zero = s == 0
    if zero.any():
        alt = np.sign(df)
        if d2f is not None:
            alt = np.where(alt == 0, np.sign(d2f), alt)
        s = np.where(zero, np.where(alt == 0, 1.0, alt), s)
    return s


def _zeros(expr, grid: Grid):
    if not ex.contains_var(expr):
        return []  # a constant, including 0, has no sign changes
    zs = ex._roots(expr, grid.t_start, grid.t_end)
    if len(zs) > MAX_ZEROS:
        raise UnsupportedTransformError("f has too many zeros on the grid (accumulating zeros?)")
    return zs


def _derivatives(expr, order: int):
    out = [expr]
    for _ in range(order):
        out.append(ex.diff(out[-1], "t"))
    return out


def _regular_samples(expr, grid):
    return ExprSource(ex.regular_part(expr)).samples(grid)


def _jump_masses(expr, d_expr, grid: Grid):
    """Point masses from jumps of |f|: coefficient |f(z+)| - |f(z-)|."""
    out = []
    if not ex.contains_dirac(d_expr):
        return out
    for z, m, _ in ex.dirac_terms(d_expr, grid.t_start, grid.t_end):
        if m:
            raise UnsupportedTransformError("f must not contain point masses itself")
        eta = 1e-9 * max(1.0, abs(z))
        right = abs(float(ex.evaluate(expr, z)))
        left = abs(float(ex.evaluate(expr, z - eta)))
        out.append(DiracTerm(z, 0, right - left))
    return out


def _closed_first(expr, grid: Grid) -> DistributionalSignal:
    _zeros(expr, grid)
    f, d1 = _derivatives(expr, 1)
    fv = ExprSource(f).samples(grid)
    dv = _regular_samples(d1, grid)
    reg = _right_sign(fv, dv) * dv
    f0 = abs(float(ex.evaluate(expr, 0.0)))
    deltas = [DiracTerm(0.0, 0, f0), DiracTerm(0.0, 1, -f0)] + _jump_masses(expr, d1, grid)
    return DistributionalSignal(grid, reg, tuple(deltas))


def _closed_second(expr, grid: Grid) -> DistributionalSignal:
    zeros = _zeros(expr, grid)
    f, d1, d2 = _derivatives(expr, 2)
    if ex.contains_dirac(d1):
        raise UnsupportedTransformError("second l1 derivative needs a continuous f")
    fv = ExprSource(f).samples(grid)
    d1v = ExprSource(d1).samples(grid)
    d2v = _regular_samples(d2, grid)
    reg = _right_sign(fv, d1v, d2v) * d2v
    f0 = abs(float(ex.evaluate(f, 0.0)))
    df0 = float(ex.evaluate(d1, 0.0))
    d2f0 = float(ex.evaluate(ex.regular_part(d2), 0.0))
    slope0 = float(_right_sign(np.array([float(ex.evaluate(f, 0.0))]), np.array([df0]),
                               np.array([d2f0]))[0]) * df0
    deltas = [DiracTerm(0.0, 0, slope0), DiracTerm(0.0, 1, f0), DiracTerm(0.0, 2, -f0)]
    # a simple zero z > 0 turns into a kink of |f| with slope jump 2|f'(z)|
    for z in zeros:
        if z > 0:
            deltas.append(DiracTerm(z, 0, 2.0 * abs(float(ex.evaluate(d1, z)))))
    # kinks of f itself (point masses in f'') keep their sign under |.|
    if ex.contains_dirac(d2):
        for z, m, coef in ex.dirac_terms(d2, grid.t_start, grid.t_end):
            if m:
                raise UnsupportedTransformError("f' must be continuous up to jumps")
            sgn = 1.0 if float(ex.evaluate(f, z)) >= 0 else -1.0
            deltas.append(DiracTerm(z, 0, sgn * coef))
    return DistributionalSignal(grid, reg, tuple(deltas))


def _slope_jumps(expr, d1, d2, grid: Grid):
    """(z, J): jumps of (|f|)' at interior zeros of f and at kinks of f."""
    out = []
    for z in _zeros(expr, grid):
        if grid.t_start < z < grid.t_end:
            out.append((z, 2.0 * abs(float(ex.evaluate(ex.regular_part(d1), z)))))
    if ex.contains_dirac(d2):
        for z, m, coef in ex.dirac_terms(d2, grid.t_start, grid.t_end):
            if m == 0 and z < grid.t_end:
                sgn = 1.0 if float(ex.evaluate(expr, z)) >= 0 else -1.0
                out.append((z, sgn * coef))
    return [(z, j) for z, j in out if j != 0.0]


def _closed_frac(expr, alpha: float, grid: Grid) -> DistributionalSignal:
    f, d1 = _derivatives(expr, 1)
    t = grid.points
    fv = ExprSource(f).samples(grid)
    dv = _regular_samples(d1, grid)
    integrand = _right_sign(fv, dv) * dv
    # each jump J H(t - z) of the integrand is integrated exactly against
    # the kernel; the quadrature only sees the continuous remainder
    extra = np.zeros_like(t)
    reg_d1 = ex.regular_part(d1)
    for z, jump in _slope_jumps(expr, d1, ex.diff(reg_d1, "t"), grid):
        integrand = integrand - jump * (t >= z)
        extra += jump * power_kernel(2.0 - alpha, t - z)
    if np.all(np.isfinite(integrand)):
        reg = _integral_samples(integrand, 1.0 - alpha, grid)
    elif np.all(np.isfinite(integrand[1:])):
        if extra.any():
            raise ValueError("a singular f' at 0 cannot be combined with kinks of |f|")
        reg = _l1_form(np.abs(fv), 1.0 - alpha, grid.h)
    else:
        raise ValueError("f' is not finite inside the grid")
    for d in _jump_masses(expr, d1, grid):
        reg = reg + d.coefficient * power_kernel(1.0 - alpha, t - d.location)
    return DistributionalSignal(grid, reg + extra)


# --------------------------------------------------------------------------
# numeric route


def _abs_source(src):
    if isinstance(src, ExprSource):
        return ExprSource(ex.Call("abs", src.expr))
    return SampledSource(src.t, np.abs(src.values))


def _sign_changes(src, t_hi: float):
    if isinstance(src, ExprSource):
        return ex._roots(src.expr, 0.0, t_hi)
    v = src.values
    idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
    return list(src.t[idx]) + list(src.t[idx + 1])


def _numeric(src, grid: Grid, symbol: Callable) -> Ell1Result:
    """Invert symbol(s, L|f|(s), |f(0)|) with point masses split off at 0."""
    f0 = abs(float(np.asarray(src.value_at(0.0))))
    F = LaplaceField.from_source(
        _abs_source(src), t_end=grid.t_end, breakpoints=_sign_changes(src, 10.0 * grid.t_end)
    )
    split = split_polynomial(F.mapped(lambda s, v: symbol(s, v, f0)))
    deltas = tuple(DiracTerm(0.0, k, c) for k, c in split.coefficients)
    t = grid.points
    reg = np.zeros_like(t)
    status = "ok"
    if not split.remainder_is_zero:
        pos = t > 0
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            reg[pos] = invert_stehfest(split.remainder, t[pos])
        for w in caught:
            if issubclass(w.category, InversionWarning):
                status = "divergence-warning"
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        reg[~pos] = initial_value(split.remainder)
    return Ell1Result(DistributionalSignal(grid, reg, deltas), LAPLACE_NUMERIC, status)


# --------------------------------------------------------------------------
# public operators


def ell1_derivative(f, grid: Grid, path: str = CLOSED_FORM) -> Ell1Result:
    """L^-1[s L|f|(s) - s |f(0)|] = sign(f) f' + |f(0)| delta - |f(0)| delta'.

    At zeros of f the sign takes its right limit, sign(f').
    """
    _check(grid, path)
    src = as_source(f)
    if path == CLOSED_FORM:
        return Ell1Result(_closed_first(_expr_of(src), grid), CLOSED_FORM)
    return _numeric(src, grid, lambda s, F, f0: s * F - s * f0)


def ell1_second_derivative(f, grid: Grid, path: str = CLOSED_FORM) -> Ell1Result:
    """L^-1[s^2 L|f|(s) - s^2 |f(0)|].

    Regular part |f|''; point masses |f|'(0+) delta + |f(0)| delta'
    - |f(0)| delta'' at 0 and 2|f'(z)| delta(t - z) at interior simple zeros.
    """
    _check(grid, path)
    src = as_source(f)
    if path == CLOSED_FORM:
        return Ell1Result(_closed_second(_expr_of(src), grid), CLOSED_FORM)
    return _numeric(src, grid, lambda s, F, f0: s * s * F - s * s * f0)


def ell1_frac_derivative(f, alpha: float, grid: Grid, path: str = CLOSED_FORM) -> Ell1Result:
    """Order-alpha Caputo derivative of |f| from base 0, 0 < alpha < 1.

    Closed form: g_{1-alpha} * (|f|)' by product integration. Numeric:
    L^-1[s^alpha (L|f|(s) - |f(0)|/s)].
    """
    if not 0 < alpha < 1:
        raise ValueError("ell1_frac_derivative needs 0 < alpha < 1")
    _check(grid, path)
    src = as_source(f)
    if path == CLOSED_FORM:
        return Ell1Result(_closed_frac(_expr_of(src), alpha, grid), CLOSED_FORM)
    return _numeric(src, grid, lambda s, F, f0: s**alpha * (F - f0 / s))


# --------------------------------------------------------------------------
# checks


def delta_difference(a: DistributionalSignal, b: DistributionalSignal) -> float:
    keys = {(d.location, d.order) for d in a.deltas + b.deltas}
    return max((abs(a.delta_coefficient(*k) - b.delta_coefficient(*k)) for k in keys), default=0.0)


def regular_relative_difference(a: DistributionalSignal, b: DistributionalSignal,
                                t_min: float, t_max: float) -> float:
    """max over nodes in [t_min, t_max] of |a - b| / max(|b|, 1)."""
    t = a.grid.points
    slack = 1e-9 * a.grid.h
    mask = (t >= t_min - slack) & (t <= t_max + slack)
    if not mask.any():
        raise ValueError("no grid nodes inside the comparison window")
    diff = np.abs(a.regular[mask] - b.regular[mask]) / np.maximum(np.abs(b.regular[mask]), 1.0)
    return float(np.max(diff))


@dataclass(frozen=True)
class LinearityResult:
    """``status`` is "ok" or "precondition-restricted"; ``value`` is NaN in the latter case."""

    status: str
    value: float
    detail: str = ""

    def __float__(self):
        return self.value


def ell1_linearity_check(fs: Sequence, cs: Sequence[float], grid: Grid) -> LinearityResult:
    """Compare l1D(sum c_k f_k) with sum c_k l1D(f_k) (closed form).

    Only meaningful when every c_k >= 0 and every f_k >= 0, where
    |c_k f_k| = c_k |f_k|; otherwise the restricted status is returned.
    """
    if len(fs) != len(cs) or not fs:
        raise ValueError("need matching, non-empty lists of functions and coefficients")
    srcs = [as_source(f) for f in fs]
    for c in cs:
        if not c >= 0:
            return LinearityResult("precondition-restricted", math.nan, f"coefficient {c} < 0")
    for k, s in enumerate(srcs):
        vals = s.samples(grid)
        if np.any(vals < 0) or float(np.asarray(s.value_at(0.0))) < 0:
            return LinearityResult("precondition-restricted", math.nan, f"f_{k} takes negative values")
    combo = ex.Num(0.0)
    for c, s in zip(cs, srcs):
        combo = ex.add(combo, ex.mul(ex.Num(float(c)), _expr_of(s)))
    lhs = ell1_derivative(ExprSource(combo), grid).value
    rhs = None
    for c, s in zip(cs, srcs):
        part = ell1_derivative(s, grid).value.scaled(float(c))
        rhs = part if rhs is None else distributional_add(rhs, part)
    reg = max_regular_diff(lhs, rhs, grid.t_start)
    return LinearityResult("ok", max(reg, delta_difference(lhs, rhs)))
