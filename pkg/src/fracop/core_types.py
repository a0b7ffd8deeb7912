"""Value types shared by every operator, and the distributional result model.

A :class:`DistributionalSignal` keeps the pointwise part of a result on a
uniform :class:`Grid` and tracks point masses symbolically as
:class:`DiracTerm` entries; delta terms are never sampled.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import expression as ex
from .errors import DeltaOrderError, DomainError, GridMismatchError

MAX_DIRAC_ORDER = 2


@dataclass(frozen=True)
class Grid:
    """Uniform lattice t_k = t_start + k*h, k = 0..n_points-1."""

    t_start: float
    t_end: float
    n_points: int

    def __post_init__(self):
        if not (self.t_start >= 0):
            raise ValueError(f"t_start must be >= 0, got {self.t_start}")
        if not (self.t_end > self.t_start):
            raise ValueError("t_end must exceed t_start")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError("n_points must be an integer >= 2")

    @classmethod
    def from_step(cls, t_end: float, h: float, t_start: float = 0.0) -> "Grid":
        n = round((t_end - t_start) / h)
        if not math.isclose(n * h, t_end - t_start, rel_tol=1e-9):
            raise ValueError(f"step {h} does not divide [{t_start}, {t_end}]")
        return cls(t_start, t_end, n + 1)

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.t_start + np.arange(self.n_points) * self.h


@dataclass(frozen=True)
class FracOrder:
    """Real order alpha; ``n`` is the integer ceiling used by RL/Caputo."""

    alpha: float

    @property
    def n(self) -> int:
        return math.ceil(self.alpha) if self.alpha > 0 else 0

    @property
    def is_integer(self) -> bool:
        return float(self.alpha).is_integer()


@dataclass(frozen=True)
class DiracTerm:
    """``coefficient * delta^(order)(t - location)``."""

    location: float
    order: int
    coefficient: float

    def __post_init__(self):
        if self.order < 0 or int(self.order) != self.order:
            raise ValueError("Dirac order must be a non-negative integer")
        if self.order > MAX_DIRAC_ORDER:
            raise DeltaOrderError(
                f"delta^({self.order}) exceeds the supported order {MAX_DIRAC_ORDER}"
            )
        if not math.isfinite(self.coefficient):
            raise ValueError("Dirac coefficient must be finite")
        object.__setattr__(self, "location", float(self.location))
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "coefficient", float(self.coefficient))


def _normalise_deltas(terms: Iterable[DiracTerm]) -> tuple:
    acc = {}
    for d in terms:
        key = (d.location, d.order)
        acc[key] = acc.get(key, 0.0) + d.coefficient
    return tuple(DiracTerm(loc, order, c) for (loc, order), c in sorted(acc.items()) if c != 0.0)


@dataclass(frozen=True, eq=False)
class DistributionalSignal:
    """Regular samples on ``grid`` plus symbolic point masses."""

    grid: Grid
    regular: np.ndarray
    deltas: tuple = ()

    def __post_init__(self):
        reg = np.array(self.regular, dtype=float)
        if reg.shape != (self.grid.n_points,):
            raise ValueError(
                f"regular part has shape {reg.shape}, grid needs ({self.grid.n_points},)"
            )
        reg.setflags(write=False)
        object.__setattr__(self, "regular", reg)
        object.__setattr__(self, "deltas", _normalise_deltas(self.deltas))

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def scaled(self, c: float) -> "DistributionalSignal":
        return DistributionalSignal(
            self.grid,
            c * self.regular,
            tuple(DiracTerm(d.location, d.order, c * d.coefficient) for d in self.deltas),
        )

    def delta_coefficient(self, location: float, order: int) -> float:
        for d in self.deltas:
            if d.location == location and d.order == order:
                return d.coefficient
        return 0.0


def _check_same_grid(a: DistributionalSignal, b: DistributionalSignal):
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


def distributional_add(a: DistributionalSignal, b: DistributionalSignal) -> DistributionalSignal:
    """Pointwise sum of regular parts; delta coefficients summed per (location, order)."""
    _check_same_grid(a, b)
    return DistributionalSignal(a.grid, a.regular + b.regular, a.deltas + b.deltas)


def max_regular_diff(a: DistributionalSignal, b: DistributionalSignal, t_min: float) -> float:
    """Max |a - b| of the regular parts over nodes with t >= t_min."""
    _check_same_grid(a, b)
    g = a.grid
    if not (g.t_start <= t_min <= g.t_end):
        raise ValueError(f"t_min={t_min} lies outside [{g.t_start}, {g.t_end}]")
    # slack so a t_min sitting on a node (up to rounding) includes that node
    mask = g.points >= t_min - 1e-9 * g.h
    return float(np.max(np.abs(a.regular[mask] - b.regular[mask])))


# --------------------------------------------------------------------------
# signal sources


class SignalSource:
    """A function of t on [0, T]: either an expression or sampled data."""

    expr: Optional[ex.Expr] = None

    def value_at(self, t) -> np.ndarray:
        raise NotImplementedError

    def derivative(self) -> "SignalSource":
        raise NotImplementedError

    def nth_derivative(self, n: int) -> "SignalSource":
        src = self
        for _ in range(n):
            src = src.derivative()
        return src

    def samples(self, grid: Grid) -> np.ndarray:
        t = grid.points
        try:
            vals = np.asarray(self.value_at(t), dtype=float) * np.ones_like(t)
        except DomainError as err:
            bad = _first_bad_node(self, t)
            raise DomainError(str(err), node_index=bad) from None
        return vals


def _first_bad_node(src, t):
    for i, ti in enumerate(t):
        try:
            src.value_at(ti)
        except DomainError:
            return i
    return None


class ExprSource(SignalSource):
    """Source backed by an expression tree in the variable ``t``."""

    def __init__(self, expr: ex.Expr | str):
        if isinstance(expr, str):
            expr = ex.parse(expr, var="t")
        self.expr = expr

    def __repr__(self):
        return f"ExprSource({ex.to_str(self.expr)!r})"

    def value_at(self, t):
        return ex.evaluate(self.expr, t)

    def value_mp(self, t):
        return ex.evaluate_mp(self.expr, t)

    def derivative(self) -> "ExprSource":
        return ExprSource(ex.diff(self.expr, "t"))

    @property
    def has_dirac(self) -> bool:
        return ex.contains_dirac(self.expr)


class SampledSource(SignalSource):
    """Piecewise-linear interpolant through strictly increasing nodes.

    Outside the data range the end values are held constant.
    """

    def __init__(self, t: Sequence[float], values: Sequence[float]):
        t = np.array(t, dtype=float)
        v = np.array(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("sampled source needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample abscissae must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        self.t = t
        self.values = v

    @classmethod
    def from_signal(cls, sig: DistributionalSignal) -> "SampledSource":
        return cls(sig.grid.points, sig.regular)

    def __repr__(self):
        return f"SampledSource(n={self.t.size}, t=[{self.t[0]}, {self.t[-1]}])"

    def value_at(self, t):
        return np.interp(t, self.t, self.values)

    def derivative(self) -> "SampledSource":
        # second-order differences on the source's own nodes
        edge = 2 if self.t.size >= 3 else 1
        return SampledSource(self.t, np.gradient(self.values, self.t, edge_order=edge))


def as_source(f) -> SignalSource:
    if isinstance(f, SignalSource):
        return f
    if isinstance(f, (str, ex.Num, ex.Var, ex.Neg, ex.BinOp, ex.Pow, ex.Call)):
        return ExprSource(f)
    raise TypeError(f"cannot interpret {f!r} as a signal source")


# --------------------------------------------------------------------------
# CSV


def to_csv(sig: DistributionalSignal, digits: Optional[int] = None) -> str:
    """Serialise as ``t,value`` rows after a ``# delta,...`` comment prologue.

    With ``digits=None`` floats are written with ``repr`` so the regular part
    round-trips exactly; otherwise ``digits`` significant digits are used.
    """
    fmt = repr if digits is None else (lambda x: f"{x:.{digits}g}")
    buf = io.StringIO()
    for d in sig.deltas:
        buf.write(f"# delta,{fmt(float(d.location))},{d.order},{fmt(float(d.coefficient))}\n")
    buf.write("t,value\n")
    for t, v in zip(sig.grid.points, sig.regular):
        buf.write(f"{fmt(float(t))},{fmt(float(v))}\n")
    return buf.getvalue()


def read_samples_csv(text: str):
    """Parse ``t,value`` CSV text into (t, values, deltas); t must increase strictly."""
    t, v, deltas = [], [], []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("delta,"):
                _, loc, order, coef = body.split(",")
                deltas.append(DiracTerm(float(loc), int(order), float(coef)))
            continue
        if not header_seen:
            cols = [c.strip() for c in line.split(",")]
            if cols != ["t", "value"]:
                raise ValueError(f"line {lineno}: expected header 't,value'")
            header_seen = True
            continue
        a, b = line.split(",")
        t.append(float(a))
        v.append(float(b))
    t = np.array(t)
    if t.size < 2:
        raise ValueError("CSV needs at least two data rows")
    bad = np.nonzero(np.diff(t) <= 0)[0]
    if bad.size:
        raise ValueError(f"t column is not strictly increasing at row {bad[0] + 2}")
    return t, np.array(v), deltas


def from_csv(text: str) -> DistributionalSignal:
    """Inverse of :func:`to_csv`; the t column must be a uniform grid."""
    t, v, deltas = read_samples_csv(text)
    grid = Grid(float(t[0]), float(t[-1]), t.size)
    if not np.allclose(t, grid.points, rtol=1e-9, atol=1e-12 * max(1.0, abs(t[-1]))):
        raise ValueError("t column is not a uniform grid")
    return DistributionalSignal(grid, v, tuple(deltas))
