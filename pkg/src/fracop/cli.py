"""``fracop`` command-line front end.

Exit codes: 0 success, 1 computation error, 2 usage error, 3 validation failure.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .core_types import DistributionalSignal, ExprSource, Grid, SampledSource, read_samples_csv, to_csv
from .ell1 import (
    CLOSED_FORM,
    LAPLACE_NUMERIC,
    ell1_derivative,
    ell1_frac_derivative,
    ell1_second_derivative,
)
from .errors import FracopError
from .frac_gd import DescentConfig, descend, random_problem
from .gl import GLPlan, gl_derivative
from .laplace import (
    LaplaceField,
    convolution_form,
    exponential_kernel_operator,
    invert_stehfest,
    invert_talbot,
    kernel_derivative,
    lt_derivative,
    power_kernel_operator,
)
from .rl_caputo import caputo_derivative, rl_derivative
from .special import MLParams, mittag_leffler
from .validation import SUITES, format_table
from . import validation

MAX_POINTS = 10**7
DIGITS = 12
METHODS = ("gl", "rl", "caputo", "laplace", "conv", "kernel-power", "kernel-exp", "ell1")


def _fmt(x: float) -> str:
    return f"{x:.{DIGITS}g}"


def _load_config(ctx: click.Context, _param, path):
    """Parse ``key = value`` lines into the command's default map; flags still win."""
    if not path:
        return path
    # keys are flag names (``f``, ``lambda``, ``t0``); map them to parameter names
    flag_names = {}
    for p in ctx.command.params:
        for opt in getattr(p, "opts", []):
            flag_names[opt.lstrip("-")] = p.name
            flag_names[opt.lstrip("-").replace("-", "_")] = p.name
    defaults = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise click.BadParameter(str(err)) from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.BadParameter(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        name = flag_names.get(key.lstrip("-"))
        if name is None:
            raise click.BadParameter(f"line {lineno}: unknown key {key!r}")
        defaults[name] = value
    ctx.default_map = {**(ctx.default_map or {}), **defaults}
    return path


config_option = click.option(
    "--config",
    type=click.Path(dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="File of 'key = value' defaults; explicit flags win.",
)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _source(expr, csv_path, grid: Grid):
    if (expr is None) == (csv_path is None):
        raise click.UsageError("give exactly one of --f and --csv")
    if expr is not None:
        return ExprSource(expr)
    t, v, _ = read_samples_csv(Path(csv_path).read_text())
    if t[0] > grid.t_start or t[-1] < grid.t_end:
        raise click.UsageError(f"CSV covers [{t[0]}, {t[-1]}], narrower than [{grid.t_start}, {grid.t_end}]")
    # resampled to the uniform grid by linear interpolation
    return SampledSource(grid.points, np.interp(grid.points, t, v))


def _deriv(method, src, alpha, grid, side, path, memory) -> DistributionalSignal:
    needs_alpha = method != "ell1"
    if needs_alpha and alpha is None:
        raise click.UsageError(f"--alpha is required for --method {method}")
    if method == "gl":
        return gl_derivative(src, GLPlan.build(alpha, grid, memory_length=memory))
    if method == "rl":
        return rl_derivative(src, alpha, grid, side=side)
    if method == "caputo":
        return caputo_derivative(src, alpha, grid)
    if method == "laplace":
        return lt_derivative(src, alpha, grid)
    if method == "conv":
        return convolution_form(src, alpha, grid)
    if method == "kernel-power":
        return kernel_derivative(src, power_kernel_operator(), alpha, grid)
    if method == "kernel-exp":
        return kernel_derivative(src, exponential_kernel_operator(), alpha, grid)
    ell_path = CLOSED_FORM if path == "closed" else LAPLACE_NUMERIC
    if alpha is None or alpha == 1:
        return ell1_derivative(src, grid, ell_path).value
    if alpha == 2:
        return ell1_second_derivative(src, grid, ell_path).value
    return ell1_frac_derivative(src, alpha, grid, ell_path).value


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def fracop():
    """Fractional derivatives, Laplace inversion and fractional gradient descent."""


@fracop.command()
@config_option
@click.option("--method", type=click.Choice(METHODS), required=True)
@click.option("--alpha", type=float, default=None, help="Order; for ell1 omit (first), 2 (second) or (0,1).")
@click.option("--f", "expr", default=None, help="Expression in t.")
@click.option("--csv", "csv_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Input CSV with header t,value.")
@click.option("--t0", type=float, default=0.0, show_default=True)
@click.option("--t1", type=float, default=1.0, show_default=True)
@click.option("--n", "n_points", type=click.IntRange(2, MAX_POINTS), default=1001, show_default=True)
@click.option("--side", type=click.Choice(["left", "right"]), default="left", show_default=True)
@click.option("--path", type=click.Choice(["closed", "laplace"]), default="closed", show_default=True)
@click.option("--memory", type=float, default=None, help="GL memory length.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def deriv(method, alpha, expr, csv_path, t0, t1, n_points, side, path, memory, out):
    """Differentiate a signal on a uniform grid and write CSV."""
    grid = Grid(t0, t1, n_points)
    src = _source(expr, csv_path, grid)
    sig = _deriv(method, src, alpha, grid, side, path, memory)
    _emit(to_csv(sig, digits=DIGITS), out)


@fracop.command()
@config_option
@click.option("--beta", type=float, required=True)
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--z", type=float, required=True)
def ml(beta, gamma, z):
    """Two-parameter Mittag-Leffler function E_{beta,gamma}(z)."""
    click.echo(_fmt(mittag_leffler(MLParams(beta, gamma), z)))


@fracop.command()
@config_option
@click.option("--F", "F_expr", required=True, help="Transform as an expression in s.")
@click.option("--method", type=click.Choice(["talbot", "stehfest"]), default="talbot", show_default=True)
@click.option("--t", "times", type=float, multiple=True, required=True)
@click.option("--nodes", type=int, default=None, help="Talbot nodes or Stehfest terms.")
@click.option("--abscissa", type=float, default=0.0, show_default=True)
def invlap(F_expr, method, times, nodes, abscissa):
    """Numerically invert a Laplace transform at the given times."""
    F = LaplaceField.from_expression(F_expr, abscissa)
    t = np.array(times)
    if method == "talbot":
        vals = invert_talbot(F, t, **({"n_nodes": nodes} if nodes else {}))
    else:
        vals = invert_stehfest(F, t, n_terms=nodes)
    click.echo("t,value")
    for ti, v in zip(t, np.atleast_1d(vals)):
        click.echo(f"{_fmt(ti)},{_fmt(v)}")


@fracop.command()
@config_option
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True)
@click.option("--dim", type=click.IntRange(1), default=2, show_default=True)
@click.option("--step", type=float, default=None, help="Step size; default 1/lambda_max(A).")
@click.option("--iters", type=click.IntRange(0), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--offset", type=float, default=1.0, show_default=True, help="Caputo base offset.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def optimize(alpha, lam, dim, step, iters, seed, offset, tol, out):
    """Fractional gradient descent on a seeded quadratic plus l1 problem."""
    obj = random_problem(dim, seed, lam)
    step = 1.0 / obj.max_eigenvalue() if step is None else step
    cfg = DescentConfig(alpha=alpha, step=step, max_iters=iters, tolerance=tol, base_offset=offset)
    trace = descend(obj, np.zeros(dim), cfg)
    _emit(trace.to_csv(DIGITS), out)
    click.echo(f"status: {trace.status}", err=True)


@fracop.command()
@config_option
@click.argument("suite", type=click.Choice(sorted(SUITES)))
@click.option("--alpha", type=float, default=None, help="semigroup: first order.")
@click.option("--beta", type=float, default=None, help="semigroup: second order.")
@click.option("--f", "expr", default=None, help="semigroup / gl-vs-rl: test function.")
def validate(suite, alpha, beta, expr):
    """Run an oracle suite and print a PASS/FAIL table."""
    kwargs = {}
    if suite == "semigroup":
        kwargs = {k: v for k, v in (("alpha", alpha), ("beta", beta), ("f", expr)) if v is not None}
    elif suite == "gl-vs-rl":
        kwargs = {k: v for k, v in (("alpha", alpha), ("f", expr)) if v is not None}
    elif any(v is not None for v in (alpha, beta, expr)):
        raise click.UsageError(f"suite {suite} takes no parameters")
    rows = getattr(validation, suite.replace("-", "_"))(**kwargs)
    click.echo(format_table(rows))
    passed = all(r.passed for r in rows)
    click.echo(f"{suite}: {'PASS' if passed else 'FAIL'}")
    if not passed:
        sys.exit(3)


def main(argv=None) -> int:
    """Run the CLI and return its exit status."""
    try:
        fracop.main(args=argv, prog_name="fracop", standalone_mode=False)
    except click.UsageError as err:
        err.show()
        return 2
    except click.exceptions.Abort:
        return 1
    except click.ClickException as err:
        err.show()
        return 1
    except SystemExit as err:
        return int(err.code or 0)
    except (FracopError, ValueError, ArithmeticError, OSError) as err:
        click.echo(f"error: {err}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
