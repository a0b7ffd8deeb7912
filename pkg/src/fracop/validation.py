"""Oracle suites run by ``fracop validate``.

Each suite returns a list of :class:`Check` rows; a suite passes when every
row does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List

from .core_types import ExprSource, Grid, max_regular_diff
from .ell1 import delta_difference, ell1_derivative, regular_relative_difference
from .gl import GLPlan, gl_derivative
from .laplace import (
    LaplaceField,
    convolution_form,
    invert_stehfest,
    invert_talbot,
    lt_derivative,
)
from .rl_caputo import caputo_derivative, power_rule_oracle, rl_derivative, semigroup_check


@dataclass(frozen=True)
class Check:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


POWER_GAMMAS = (0.5, 1.0, 2.0)
POWER_ALPHAS = (0.25, 0.5, 0.75)


def power_rule(h: float = 1e-3) -> List[Check]:
    grid = Grid(0.0, 1.0, round(1.0 / h) + 1)
    methods = {
        "gl": lambda f, a: gl_derivative(f, GLPlan.build(a, grid)),
        "rl": lambda f, a: rl_derivative(f, a, grid),
        "caputo": lambda f, a: caputo_derivative(f, a, grid),
        "laplace": lambda f, a: lt_derivative(f, a, grid),
        "conv": lambda f, a: convolution_form(f, a, grid),
    }
    rows = []
    for g in POWER_GAMMAS:
        f = ExprSource(f"t^{g!r}")
        for a in POWER_ALPHAS:
            ref = power_rule_oracle(0.0, g, a, 1.0)
            for name, op in methods.items():
                val = op(f, a).regular[-1]
                rows.append(Check(f"{name} gamma={g:g} alpha={a:g}", abs(val / ref - 1), 1e-2))
    return rows


def semigroup(alpha: float = 0.3, beta: float = 0.4, f: str = "t^2", h: float = 1e-3) -> List[Check]:
    grid = Grid(0.0, 1.0, round(1.0 / h) + 1)
    res = semigroup_check(ExprSource(f), alpha, beta, grid)
    err = res.max_diff if res.status == "ok" else math.inf
    return [Check(f"RL^{alpha:g} RL^{beta:g} {f} vs RL^{alpha + beta:g} ({res.status})", err, 1e-2)]


def gl_vs_rl(f: str = "t^2", alpha: float = 0.5) -> List[Check]:
    src = ExprSource(f)
    diffs = []
    for k in (8, 9, 10):
        grid = Grid(0.0, 1.0, 2**k + 1)
        diffs.append(max_regular_diff(gl_derivative(src, GLPlan.build(alpha, grid)),
                                      rl_derivative(src, alpha, grid), 0.1))
    rows = []
    for k, (coarse, fine) in enumerate(zip(diffs, diffs[1:]), 8):
        ratio = fine / coarse
        rows.append(Check(f"diff ratio h=2^-{k + 1} / 2^-{k} (ratio {ratio:.4f})", abs(ratio - 0.5), 0.1))
    return rows


def laplace_roundtrip() -> List[Check]:
    rows = []
    cases = {
        "1/s": lambda t: 1.0,
        "1/s^2": lambda t: t,
        "1/(s+1)": lambda t: math.exp(-t),
    }
    for src, ref in cases.items():
        F = LaplaceField.from_expression(src)
        for t in (0.5, 1.0, 2.0):
            for name, inv in (("stehfest", invert_stehfest), ("talbot", invert_talbot)):
                rows.append(Check(f"{name} {src} t={t:g}", abs(inv(F, t) / ref(t) - 1), 1e-6))
    F = LaplaceField.from_expression("s^(-1.5)")
    rows.append(Check("talbot s^-1.5 t=1", abs(invert_talbot(F, 1.0) - 1 / math.gamma(1.5)), 1e-4))
    G = LaplaceField.from_source(ExprSource("exp(-t)"), t_end=3.0)
    for t in (0.5, 1.0, 2.0, 3.0):
        rows.append(Check(f"forward+stehfest exp(-t) t={t:g}",
                          abs(invert_stehfest(G, t) / math.exp(-t) - 1), 1e-4))
    return rows


ELL1_FUNCTIONS = ("exp(2*t)", "sin(t)+2", "3")


def ell1_paths(n_points: int = 61) -> List[Check]:
    grid = Grid(0.0, 3.0, n_points)
    rows = []
    for f in ELL1_FUNCTIONS:
        a = ell1_derivative(ExprSource(f), grid, "closed_form").value
        b = ell1_derivative(ExprSource(f), grid, "laplace_numeric").value
        rows.append(Check(f"{f} regular", regular_relative_difference(b, a, 0.2, 3.0), 1e-3))
        rows.append(Check(f"{f} deltas", delta_difference(a, b), 1e-2))
    return rows


SUITES: Dict[str, Callable[[], List[Check]]] = {
    "power-rule": power_rule,
    "semigroup": semigroup,
    "gl-vs-rl": gl_vs_rl,
    "laplace-roundtrip": laplace_roundtrip,
    "ell1-paths": ell1_paths,
}


def format_table(rows: List[Check]) -> str:
    width = max(len(r.name) for r in rows)
    lines = [f"{'check':<{width}}  {'max error':>12}  {'tol':>8}  result"]
    for r in rows:
        lines.append(
            f"{r.name:<{width}}  {r.error:>12.4e}  {r.tolerance:>8.1e}  {'PASS' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)

