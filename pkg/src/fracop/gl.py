"""Grünwald–Letnikov differintegrals on a uniform grid."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core_types import DistributionalSignal, FracOrder, Grid, as_source


def gl_weights(alpha: float, n: int) -> np.ndarray:
    """w_0 = 1, w_k = w_{k-1} (k - 1 - alpha) / k, i.e. (-1)^k binom(alpha, k)."""
    w = np.empty(n)
    w[0] = 1.0
    for k in range(1, n):
        w[k] = w[k - 1] * (k - 1 - alpha) / k
    return w


@dataclass(frozen=True, eq=False)
class GLPlan:
    """Precomputed weights for one (order, grid) pair.

    ``memory_length`` enables the short-memory principle: only the
    ``floor(L/h)`` most recent history terms (plus the current node) are kept.
    """

    order: FracOrder
    grid: Grid
    coefficients: np.ndarray
    memory_length: Optional[float] = None

    @classmethod
    def build(cls, order, grid: Grid, memory_length: Optional[float] = None) -> "GLPlan":
        if not isinstance(order, FracOrder):
            order = FracOrder(float(order))
        if memory_length is not None and not memory_length > 0:
            raise ValueError("memory_length must be positive")
        w = gl_weights(order.alpha, grid.n_points)
        if memory_length is not None:
            keep = int(np.floor(memory_length / grid.h + 1e-9)) + 1
            w[keep:] = 0.0
        w.setflags(write=False)
        return cls(order, grid, w, memory_length)


def _apply(f, plan: GLPlan) -> DistributionalSignal:
    g = plan.grid
    vals = as_source(f).samples(g)
    acc = np.convolve(vals, plan.coefficients)[: g.n_points]
    return DistributionalSignal(g, acc * g.h ** (-plan.order.alpha))


def gl_derivative(f, plan: GLPlan) -> DistributionalSignal:
    """h^-alpha sum_{k=0}^{j} w_k f(t_j - k h), base point ``grid.t_start``.

    Pointwise scheme: the result never carries delta terms.
    """
    return _apply(f, plan)


def gl_integral(f, plan: GLPlan) -> DistributionalSignal:
    """Fractional integral of order -alpha via the same sum (alpha < 0)."""
    if not plan.order.alpha < 0:
        raise ValueError("gl_integral needs a plan with negative order")
    return _apply(f, plan)
