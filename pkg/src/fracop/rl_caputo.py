"""Riemann–Liouville and Caputo operators by product integration.

The weakly singular kernel (t - s)^mu is integrated exactly against the
piecewise-linear interpolant of the data (product trapezoid rule), which is
first order for smooth data and exact for linear data.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import expression as ex
from .core_types import (
    DistributionalSignal,
    ExprSource,
    FracOrder,
    Grid,
    SampledSource,
    as_source,
    max_regular_diff,
)
from .errors import AccuracyWarning, DomainError, PoleError
from .special import gamma_fn, power_kernel


def _as_order(alpha) -> FracOrder:
    return alpha if isinstance(alpha, FracOrder) else FracOrder(float(alpha))


@dataclass(frozen=True, eq=False)
class SingularQuadrature:
    """Product-trapezoid weights for int_{t_0}^{t_j} (t_j - s)^mu p(s) ds.

    With q = mu + 1, node j receives
    h^q / (q (q+1)) * [a_j p_0 + sum_{k=1}^{j-1} c_{j-k} p_k + p_j], where
    a_j = (j-1)^(q+1) - (j-1-q) j^q and
    c_m = (m+1)^(q+1) - 2 m^(q+1) + (m-1)^(q+1).
    """

    grid: Grid
    exponent: float
    interior: np.ndarray  # c_m, with c_0 = 1 standing in for the p_j weight
    first: np.ndarray  # a_j

    @classmethod
    def build(cls, grid: Grid, exponent: float) -> "SingularQuadrature":
        if not -1 < exponent < 1:
            raise ValueError("kernel exponent must lie in (-1, 1)")
        q = exponent + 1.0
        n = grid.n_points
        m = np.arange(1, n, dtype=float)
        # m^(q+1) [(1+1/m)^(q+1) - 2 + (1-1/m)^(q+1)], with expm1/log1p to keep
        # the second difference from cancelling badly at large m
        up = np.expm1((q + 1) * np.log1p(1.0 / m))
        with np.errstate(divide="ignore"):
            dn = np.expm1((q + 1) * np.log1p(-1.0 / m))
        c = np.empty(n)
        c[0] = 1.0
        c[1:] = m ** (q + 1) * (up + dn)
        c[1] = 2.0 ** (q + 1) - 2.0
        j = np.arange(n, dtype=float)
        a = np.zeros(n)
        a[1:] = (j[1:] - 1) ** (q + 1) - (j[1:] - 1 - q) * j[1:] ** q
        for arr in (c, a):
            arr.setflags(write=False)
        return cls(grid, float(exponent), c, a)

    @property
    def scale(self) -> float:
        q = self.exponent + 1.0
        return self.grid.h**q / (q * (q + 1))

    def apply(self, p: np.ndarray) -> np.ndarray:
        """int (t_j - s)^mu p(s) ds for every node j, p given at the nodes."""
        p = np.asarray(p, dtype=float)
        n = self.grid.n_points
        acc = np.convolve(p, self.interior)[:n]
        acc += (self.first - self.interior) * p[0]
        acc[0] = 0.0
        return self.scale * acc


def _integral_samples(vals: np.ndarray, order: float, grid: Grid) -> np.ndarray:
    if order == 0:
        return np.array(vals, dtype=float)
    quad = SingularQuadrature.build(grid, order - 1.0)
    return quad.apply(vals) / gamma_fn(order)


def _repeat_gradient(vals: np.ndarray, n: int, h: float) -> np.ndarray:
    if vals.size < n + 1:
        raise ValueError(f"an order-{n} difference needs at least {n + 1} nodes")
    edge = 2 if vals.size >= 3 else 1
    for _ in range(n):
        vals = np.gradient(vals, h, edge_order=edge)
    return vals


def rl_integral(f, alpha, grid: Grid) -> DistributionalSignal:
    """(1/Gamma(alpha)) int_a^t (t - s)^(alpha-1) f(s) ds with a = grid.t_start.

    Orders above 1 are split into integer repeats plus a fractional part.
    """
    order = _as_order(alpha)
    if not order.alpha > 0:
        raise ValueError("rl_integral needs a positive order")
    vals = as_source(f).samples(grid)
    return DistributionalSignal(grid, _rl_integral_array(vals, order.alpha, grid))


def _rl_integral_array(vals, alpha, grid):
    out = vals
    rest = alpha
    while rest > 1:
        out = _integral_samples(out, 1.0, grid)
        rest -= 1.0
    return _integral_samples(out, rest, grid)


def _rl_derivative_array(vals, alpha, grid):
    n = FracOrder(alpha).n
    inner = _rl_integral_array(vals, n - alpha, grid) if n - alpha > 0 else vals
    return _repeat_gradient(inner, n, grid.h)


def rl_derivative(f, alpha, grid: Grid, side: str = "left") -> DistributionalSignal:
    """D^n I^(n-alpha) f with n = ceil(alpha).

    ``side="right"`` uses the upper terminal ``grid.t_end`` and kernel
    (s - t)^(n-alpha-1), with the (-1)^n sign of the right-sided operator.
    It is computed by mirroring the data, so it is the exact reflection of
    the left-sided scheme.
    """
    order = _as_order(alpha)
    if not order.alpha > 0:
        raise ValueError("rl_derivative needs a positive order")
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    vals = as_source(f).samples(grid)
    if side == "left":
        out = _rl_derivative_array(vals, order.alpha, grid)
    else:
        out = _rl_derivative_array(vals[::-1].copy(), order.alpha, grid)[::-1]
    return DistributionalSignal(grid, out)


def _kink_warning(expr: ex.Expr, grid: Grid):
    try:
        kinks = ex.dirac_terms(ex.diff(expr, "t"), grid.t_start, grid.t_end)
    except DomainError:
        kinks = [None]
    if kinks:
        warnings.warn(
            "integrand of the Caputo integral is not smooth on the grid; expect reduced accuracy",
            AccuracyWarning,
        )


def _l1_form(g: np.ndarray, order: float, h: float) -> np.ndarray:
    """I^order g' with g' piecewise constant: sum_k b_k (g_{j-k} - g_{j-k-1})."""
    n = g.size
    k = np.arange(n - 1, dtype=float)
    b = (k + 1) ** order - k**order
    out = np.zeros(n)
    out[1:] = np.convolve(np.diff(g), b)[: n - 1]
    return out * h ** (order - 1) / gamma_fn(order + 1)


def caputo_derivative(f, alpha, grid: Grid) -> DistributionalSignal:
    """I^(n-alpha) f^(n), n = ceil(alpha), with base point grid.t_start.

    Expression sources are differentiated symbolically; point masses that
    appear in f^(n) are integrated exactly against the power kernel. Sampled
    sources use second-order differences and are limited to n = 1.
    """
    order = _as_order(alpha)
    a = order.alpha
    if a < 0:
        raise ValueError("caputo_derivative needs a non-negative order")
    n = order.n
    src = as_source(f)
    t = grid.points
    if isinstance(src, SampledSource):
        if n > 1:
            raise ValueError("Caputo of order above 1 needs an expression source")
        fn = src.nth_derivative(n).value_at(t) if n else src.value_at(t)
        return DistributionalSignal(grid, _integral_samples(np.asarray(fn, float), n - a, grid))

    expr = src.expr
    dn = expr
    for _ in range(n):
        dn = ex.diff(dn, "t")
    kernel_extra = np.zeros_like(t)
    if ex.contains_dirac(dn):
        # delta^(m)(t - z) convolved with g_(n-alpha) is g_(n-alpha-m)(t - z)
        for z, m, coef in ex.dirac_terms(dn, grid.t_start, grid.t_end):
            if n - a - m <= 0 and float(n - a - m).is_integer():
                raise PoleError("point mass meets a kernel of non-positive integer order")
            kernel_extra += coef * power_kernel(n - a - m, t - z)
        dn = ex.regular_part(dn)
    _kink_warning(dn, grid)
    vals = ExprSource(dn).samples(grid) if n else src.samples(grid)
    bad = ~np.isfinite(vals)
    if bad.any():
        if bad[1:].any():
            raise DomainError("f^(n) is not finite inside the grid", int(np.argmax(bad)))
        # integrable singularity at the terminal: integrate the kernel exactly
        # against panel mean slopes of f^(n-1) instead (L1 form)
        lower = expr
        for _ in range(n - 1):
            lower = ex.diff(lower, "t")
        g = ExprSource(lower).samples(grid)
        return DistributionalSignal(grid, _l1_form(g, n - a, grid.h) + kernel_extra)
    if n - a == 0:
        out = vals
    else:
        out = _integral_samples(vals, n - a, grid)
    return DistributionalSignal(grid, out + kernel_extra)


def power_rule_oracle(c: float, gamma: float, alpha: float, t) -> float:
    """Gamma(gamma+1) / Gamma(gamma-alpha+1) * (t - c)^(gamma-alpha).

    Raises :class:`PoleError` when gamma - alpha + 1 is a non-positive
    integer; there the closed form degenerates (the derivative is 0).
    """
    if not gamma > -1:
        raise ValueError("power rule needs gamma > -1")
    t = np.asarray(t, dtype=float)
    if np.any(t <= c):
        raise ValueError("power rule is evaluated for t > c only")
    out = gamma_fn(gamma + 1) / gamma_fn(gamma - alpha + 1) * (t - c) ** (gamma - alpha)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class SemigroupResult:
    """``status`` is "ok" or "precondition-violated"; ``max_diff`` is NaN in the latter case."""

    status: str
    max_diff: float
    detail: str = ""

    def __float__(self):
        return self.max_diff


def _rl_power(vals, order, grid):
    # positive order: RL derivative; negative: RL integral; zero: identity
    if order > 0:
        return _rl_derivative_array(vals, order, grid)
    if order < 0:
        return _rl_integral_array(vals, -order, grid)
    return np.array(vals, dtype=float)


def semigroup_check(f, alpha: float, beta: float, grid: Grid, t_min: float = 0.1,
                    tol: float = 1e-8) -> SemigroupResult:
    """Compare RL^alpha(RL^beta f) with RL^(alpha+beta) f for t >= t_min.

    The identity needs f^(k)(a) = 0 for k = 0..max(ceil alpha, ceil beta);
    that is checked at the terminal first and a violation is reported as a
    status, not raised.
    """
    src = as_source(f)
    kmax = max(FracOrder(abs(alpha)).n, FracOrder(abs(beta)).n)
    a = grid.t_start
    d = src
    for k in range(kmax + 1):
        v = float(np.asarray(d.value_at(np.array([a])))[0])
        if not abs(v) <= tol:
            return SemigroupResult(
                "precondition-violated", math.nan, f"f^({k})({a}) = {v:.6g} is not 0"
            )
        d = d.derivative()
    vals = src.samples(grid)
    inner = _rl_power(vals, beta, grid)
    lhs = DistributionalSignal(grid, _rl_power(inner, alpha, grid))
    rhs = DistributionalSignal(grid, _rl_power(vals, alpha + beta, grid))
    return SemigroupResult("ok", max_regular_diff(lhs, rhs, t_min))
