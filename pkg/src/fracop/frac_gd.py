"""Gradient descent with the gradient replaced by per-coordinate Caputo derivatives.

For J(x) = 1/2 x'Ax - b'x + lam |x|_1, coordinate i of the fractional
gradient is the order-alpha Caputo derivative of the 1-D slice
t -> J(x_1, .., t, .., x_d), taken from the terminal x_i - base_offset and
evaluated at t = x_i. At alpha = 1 this is the classical partial derivative.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from . import expression as ex
from .core_types import ExprSource, Grid
from .errors import AccuracyWarning, DomainError
from .rl_caputo import caputo_derivative


@dataclass(frozen=True, eq=False)
class Objective:
    """1/2 x'Ax - b'x + lam * |x|_1 with A symmetric positive definite."""

    A: np.ndarray
    b: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.size:
            raise ValueError("A must be d x d and b of length d")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("A must be symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise ValueError("A must be positive definite") from None
        if not self.lam >= 0:
            raise ValueError("lam must be non-negative")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dimension(self) -> int:
        return self.b.size

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.A @ x - self.b @ x + self.lam * np.abs(x).sum())

    def gradient(self, x) -> np.ndarray:
        """Ax - b + lam*sign(x), with sign(0) = +1."""
        x = np.asarray(x, dtype=float)
        return self.A @ x - self.b + self.lam * np.where(x >= 0, 1.0, -1.0)

    def max_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.A)[-1])


@dataclass(frozen=True)
class DescentConfig:
    alpha: float = 1.0
    step: float = 0.1
    max_iters: int = 100
    tolerance: float = 1e-10
    base_offset: float = 1.0
    n_nodes: int = 129

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.max_iters < 0 or int(self.max_iters) != self.max_iters:
            raise ValueError("max_iters must be a non-negative integer")
        if not self.base_offset > 0:
            raise ValueError("base_offset must be positive")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")


def _slice_expr(obj: Objective, x: np.ndarray, i: int) -> ex.Expr:
    # J restricted to coordinate i, dropping terms that do not depend on it
    a_ii = obj.A[i, i]
    lin = float(obj.A[i] @ x - a_ii * x[i] - obj.b[i])
    t = ex.Var("t")
    phi = ex.add(ex.mul(ex.Num(0.5 * a_ii), ex.power(t, 2.0)), ex.mul(ex.Num(lin), t))
    if obj.lam:
        phi = ex.add(phi, ex.mul(ex.Num(obj.lam), ex.Call("abs", t)))
    return phi


def _coordinate(obj: Objective, x: np.ndarray, i: int, cfg: DescentConfig) -> float:
    a = x[i] - cfg.base_offset
    shifted = ex.substitute(_slice_expr(obj, x, i), "t", ex.add(ex.Var("t"), ex.Num(a)))
    grid = Grid(0.0, cfg.base_offset, cfg.n_nodes)
    val = caputo_derivative(ExprSource(shifted), cfg.alpha, grid).regular[-1]
    if not math.isfinite(val):
        raise DomainError(f"fractional gradient is not finite in coordinate {i}")
    return float(val)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FRACOP_THREADS", "1")))
    except ValueError:
        return 1


def fractional_gradient(obj: Objective, x, cfg: DescentConfig) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.dimension,) or not np.all(np.isfinite(x)):
        raise ValueError("x must be a finite vector of the objective's dimension")
    idx = range(obj.dimension)
    with warnings.catch_warnings():
        # the |.| kink is part of the objective; its accuracy caveat is known
        warnings.simplefilter("ignore", AccuracyWarning)
        workers = min(_threads(), obj.dimension)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda i: _coordinate(obj, x, i, cfg), idx))
        else:
            parts = [_coordinate(obj, x, i, cfg) for i in idx]
    return np.array(parts)


@dataclass(frozen=True, eq=False)
class DescentTrace:
    """Iterates and objective values, one entry per iteration (x0 included).

    ``status`` is "converged", "max-iters" or "diverged".
    """

    iterates: Tuple[np.ndarray, ...]
    values: Tuple[float, ...]
    status: str
    config: DescentConfig = field(default_factory=DescentConfig)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def to_csv(self, digits: int = 12) -> str:
        d = self.iterates[0].size
        rows = ["iter,objective," + ",".join(f"x{k}" for k in range(d))]
        for k, (x, v) in enumerate(zip(self.iterates, self.values)):
            rows.append(",".join([str(k), f"{v:.{digits}g}"] + [f"{c:.{digits}g}" for c in x]))
        return "\n".join(rows) + "\n"


DIVERGENCE_RUN = 10


def descend(obj: Objective, x0, cfg: DescentConfig) -> DescentTrace:
    """x <- x - step * fractional_gradient(x) until the update is below tolerance.

    Stops early with status "diverged" once the objective has increased for
    10 consecutive iterations (or stopped being finite).
    """
    x = np.array(x0, dtype=float)
    xs, vals = [x.copy()], [obj.value(x)]
    rising = 0
    status = "max-iters"
    for _ in range(cfg.max_iters):
        x_new = x - cfg.step * fractional_gradient(obj, x, cfg)
        v = obj.value(x_new)
        xs.append(x_new.copy())
        vals.append(v)
        if not math.isfinite(v):
            status = "diverged"
            break
        rising = rising + 1 if v > vals[-2] else 0
        if rising >= DIVERGENCE_RUN:
            status = "diverged"
            break
        if np.linalg.norm(x_new - x) < cfg.tolerance:
            status = "converged"
            x = x_new
            break
        x = x_new
    return DescentTrace(tuple(xs), tuple(vals), status, cfg)


def random_problem(dim: int, seed: int, lam: float = 0.0) -> Objective:
    """Seeded symmetric, strictly diagonally dominant (hence SPD) problem."""
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = np.random.default_rng(seed)
    m = rng.uniform(-1.0, 1.0, size=(dim, dim))
    A = 0.5 * (m + m.T)
    off = np.abs(A).sum(axis=1) - np.abs(np.diag(A))
    A[np.diag_indices(dim)] = off + 1.0 + rng.uniform(0.0, 1.0, size=dim)
    b = rng.uniform(-1.0, 1.0, size=dim)
    return Objective(A, b, lam)
