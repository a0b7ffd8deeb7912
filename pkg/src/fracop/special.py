"""Gamma/Beta machinery, generalized binomials, the power kernel g_c and the
two-parameter Mittag-Leffler function."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import ConvergenceWarning, PoleError

# Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
_LANCZOS_G = 7.0
_LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _sinpi(x: float) -> float:
    """sin(pi*x) with exact argument reduction."""
    r = math.fmod(x, 2.0)
    if r < 0:
        r += 2.0
    sign = 1.0
    if r > 1.0:
        r -= 1.0
        sign = -1.0
    if r > 0.5:
        r = 1.0 - r
    return sign * math.sin(math.pi * r)


def _lanczos(x: float) -> float:
    # valid for x >= 0.5
    x -= 1.0
    a = _LANCZOS_P[0]
    for i in range(1, len(_LANCZOS_P)):
        a += _LANCZOS_P[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    # split the power so t^(x+1/2) does not overflow before e^-t brings it down
    half = math.pow(t, 0.5 * (x + 0.5))
    return _SQRT_2PI * half * math.exp(-t) * half * a


def gamma_fn(x: float) -> float:
    """Gamma function; reflection handles x < 1/2.

    Raises :class:`PoleError` at non-positive integers.
    """
    x = float(x)
    if x <= 0 and x.is_integer():
        raise PoleError(f"Gamma has a pole at {x:g}")
    if x.is_integer() and x <= 30:
        return float(math.factorial(int(x) - 1))
    if x < 0.5:
        return math.pi / (_sinpi(x) * gamma_fn(1.0 - x))
    if x > 171.7:
        return math.inf
    return _lanczos(x)


def beta_fn(a: float, b: float) -> float:
    """B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b) for a, b > 0."""
    if not (a > 0 and b > 0):
        raise ValueError(f"beta_fn needs positive arguments, got ({a}, {b})")
    if a + b < 170:
        return gamma_fn(a) * gamma_fn(b) / gamma_fn(a + b)
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def gen_binomial(alpha: float, k: int) -> float:
    """alpha (alpha-1) ... (alpha-k+1) / k! by the product recurrence."""
    if k < 0:
        return 0.0
    c = 1.0
    for j in range(k):
        c *= (alpha - j) / (j + 1)
    return c


def power_kernel(c: float, t):
    """g_c(t) = t^(c-1) H(t) / Gamma(c); zero for t <= 0."""
    g = gamma_fn(c)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(t > 0, np.power(np.where(t > 0, t, 1.0), c - 1.0) / g, 0.0)
    return vals if vals.ndim else float(vals)


# --------------------------------------------------------------------------
# Mittag-Leffler

ML_SWITCH = 10.0
ML_MAX_TERMS = 10_000
_ML_TERM_TOL = 1e-15


@dataclass(frozen=True)
class MLParams:
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("Mittag-Leffler series needs beta > 0")
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")


def _ml_series(p: MLParams, z: float):
    """Partial sums in extended precision; returns (value, converged)."""
    az = abs(z)
    # the largest term is about exp(|z|^(1/beta)); carry enough digits to
    # absorb cancellation between terms of that size
    lost = (az ** (1.0 / p.beta) / math.log(10.0)) if az > 0 else 0.0
    dps = 20 + int(math.ceil(lost))
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        b, g = mpmath.mpf(p.beta), mpmath.mpf(p.gamma)
        total = mpmath.mpf(0)
        prev = None
        zk = mpmath.mpf(1)
        for k in range(ML_MAX_TERMS):
            term = zk * mpmath.rgamma(b * k + g)
            total += term
            mag = abs(term)
            if (
                p.beta * k + p.gamma > 1
                and prev is not None
                and mag <= prev
                and mag < _ML_TERM_TOL * (1 + abs(total))
            ):
                return float(total), True
            prev = mag
            zk *= zz
        return float(total), False


def _ml_asymptotic(p: MLParams, z: float):
    """Large-|z| expansion; returns (value, error estimate)."""
    b, g = p.beta, p.gamma
    with mpmath.workdps(30):
        zz = mpmath.mpc(z)
        r = abs(zz)
        arg = float(mpmath.arg(zz))
        total = mpmath.mpc(0)
        # saddle contributions with arg(z) + 2 pi m in (-beta pi, beta pi]
        m_lo = math.ceil((-b * math.pi - arg) / (2 * math.pi) - 1)
        m_hi = math.floor((b * math.pi - arg) / (2 * math.pi) + 1)
        # an excluded saddle still close to its Stokes line (|arg zeta| < 3 pi / 2)
        # is only partly switched off; its size bounds the error of dropping it
        saddle_err = mpmath.mpf(0)
        for m in range(m_lo - 1, m_hi + 2):
            theta = arg + 2 * math.pi * m
            zeta = mpmath.power(r, 1 / mpmath.mpf(b)) * mpmath.expj(theta / b)
            contribution = mpmath.power(zeta, 1 - g) * mpmath.exp(zeta) / b
            if -b * math.pi < theta <= b * math.pi + 1e-14:
                total += contribution
            elif abs(theta / b) < 1.5 * math.pi:
                saddle_err += abs(contribution)
        # algebraic tail, truncated at its smallest term
        tail_err = mpmath.mpf(0)
        prev = None
        for k in range(1, 400):
            term = mpmath.power(zz, -k) * mpmath.rgamma(g - b * k)
            mag = abs(term)
            if mag == 0:
                continue  # 1/Gamma vanishes at poles
            if prev is not None and mag > prev:
                tail_err = prev
                break
            total -= term
            if mag < 1e-17 * abs(total):
                tail_err = mag
                break
            prev = mag
        return float(mpmath.re(total)), float(tail_err + saddle_err)


def mittag_leffler(p: MLParams, z: float) -> float:
    """E_{beta,gamma}(z) = sum_k z^k / Gamma(beta k + gamma) for real z.

    The series is summed for |z| <= 10; beyond that the exponential/algebraic
    asymptotic expansion is used, falling back to the series whenever the
    expansion's own error estimate is too large. A
    :class:`~fracop.errors.ConvergenceWarning` flags results where neither
    representation reached tolerance.
    """
    z = float(z)
    if abs(z) <= ML_SWITCH:
        value, ok = _ml_series(p, z)
        if not ok:
            warnings.warn(f"E_{{{p.beta},{p.gamma}}}({z}) series did not converge", ConvergenceWarning)
        return value
    value, err = _ml_asymptotic(p, z)
    if err <= 1e-13 * max(abs(value), 1e-300):
        return value
    series, ok = _ml_series(p, z)
    if ok:
        return series
    warnings.warn(
        f"E_{{{p.beta},{p.gamma}}}({z}): asymptotic error {err:.2e}, series did not converge",
        ConvergenceWarning,
    )
    return value
