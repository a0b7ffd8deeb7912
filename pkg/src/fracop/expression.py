"""A small expression language for f(t) and F(s).

Grammar (whitespace is insignificant, no implicit multiplication)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := primary ('^' unary)?          # right associative
    primary  := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Exponents must fold to a real constant. Recognised names are the free
variable (``t`` by default), ``pi`` and the functions ``abs``, ``exp``,
``sin``, ``cos``, ``sqrt``, ``sign`` and ``heaviside``.

Conventions at non-smooth points: ``sign(0) = +1`` and ``heaviside(0) = 1``.
Differentiating ``heaviside`` or ``sign`` produces a :class:`Dirac` marker
node. Markers evaluate to zero; :func:`dirac_terms` resolves them into
located point masses.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import mpmath
import numpy as np

from .errors import DomainError, ParseError

MAX_DEPTH = 64
FUNCTIONS = ("abs", "exp", "sin", "cos", "sign", "heaviside")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


@dataclass(frozen=True)
class Dirac:
    """Marker for delta^(order)(arg); produced only by :func:`diff`."""

    arg: "Expr"
    order: int = 0


Expr = Union[Num, Var, Neg, BinOp, Pow, Call, Dirac]


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = len(src) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, var):
        self.src = src
        self.var = var
        self.tokens = _tokenize(src)
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", off)

    def _enter(self, offset):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError(f"expression nested deeper than {MAX_DEPTH}", offset)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", off)
        return node

    def expr(self):
        self._enter(self.peek()[2])
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        self.depth -= 1
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, text, off = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            self._enter(off)
            arg = self.unary()
            self.depth -= 1
            return Neg(arg) if text == "-" else arg
        return self.power()

    def power(self):
        base = self.primary()
        kind, text, off = self.peek()
        if kind == "op" and text == "^":
            self.take()
            self._enter(off)
            exp_off = self.peek()[2]
            exponent = self.unary()
            self.depth -= 1
            value = _constant_value(exponent)
            if value is None:
                raise ParseError("exponent must be a real constant", exp_off)
            return Pow(base, value)
        return base

    def primary(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == self.var:
                return Var(text)
            if text == "pi":
                return Num(math.pi)
            if text in FUNCTIONS or text == "sqrt":
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                if text == "sqrt":
                    return Pow(arg, 0.5)
                return Call(text, arg)
            raise ParseError(f"unknown identifier {text!r}", off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {text or 'end of input'!r}", off)


def parse(src: str, var: str = "t") -> Expr:
    """Parse ``src`` into an expression tree over the variable ``var``."""
    node = _Parser(src, var).parse()
    if depth(node) > MAX_DEPTH:
        raise ParseError(f"expression nested deeper than {MAX_DEPTH}", 0)
    return node


def depth(node: Expr) -> int:
    if isinstance(node, (Num, Var)):
        return 1
    if isinstance(node, BinOp):
        return 1 + max(depth(node.left), depth(node.right))
    if isinstance(node, Pow):
        return 1 + depth(node.base)
    return 1 + depth(node.arg)


def _constant_value(node):
    if contains_var(node):
        return None
    return float(evaluate(node, 0.0))


def contains_var(node: Expr) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, BinOp):
        return contains_var(node.left) or contains_var(node.right)
    if isinstance(node, Pow):
        return contains_var(node.base)
    return contains_var(node.arg)


def contains_dirac(node: Expr) -> bool:
    if isinstance(node, Dirac):
        return True
    if isinstance(node, (Num, Var)):
        return False
    if isinstance(node, BinOp):
        return contains_dirac(node.left) or contains_dirac(node.right)
    if isinstance(node, Pow):
        return contains_dirac(node.base)
    return contains_dirac(node.arg)


def to_str(node: Expr) -> str:
    """Fully parenthesised source text; ``parse(to_str(e)) == e`` for parsed trees."""
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"(-{repr(-node.value)})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_str(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_str(node.left)} {node.op} {to_str(node.right)})"
    if isinstance(node, Pow):
        return f"({to_str(node.base)}^{node.exponent!r})"
    if isinstance(node, Call):
        return f"{node.fn}({to_str(node.arg)})"
    return f"dirac{node.order}({to_str(node.arg)})"


# --------------------------------------------------------------------------
# evaluation


def _is_integer(x: float) -> bool:
    return float(x).is_integer()


def evaluate(node: Expr, x):
    """Evaluate with numpy semantics; ``x`` may be a float, array or complex.

    Real inputs raise :class:`DomainError` for a negative base under a
    non-integer exponent. Overflow gives signed infinities.
    """
    with np.errstate(all="ignore"):
        return _eval_np(node, np.asarray(x) if not np.isscalar(x) else x)


def _eval_np(node, x):
    if isinstance(node, Num):
        return node.value + 0 * x
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval_np(node.arg, x)
    if isinstance(node, BinOp):
        a = _eval_np(node.left, x)
        b = _eval_np(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return np.true_divide(a, b)
    if isinstance(node, Pow):
        base = _eval_np(node.base, x)
        p = node.exponent
        if np.iscomplexobj(base):
            return np.power(base, p)
        base = np.asarray(base, dtype=float)
        if not _is_integer(p) and np.any(base < 0):
            raise DomainError(f"negative base raised to non-integer power {p!r}")
        return np.power(base, p)
    if isinstance(node, Call):
        u = _eval_np(node.arg, x)
        fn = node.fn
        if fn == "exp":
            return np.exp(u)
        if fn == "sin":
            return np.sin(u)
        if fn == "cos":
            return np.cos(u)
        if np.iscomplexobj(u):
            if fn == "abs":
                raise DomainError("abs() is not analytic in the complex plane")
            raise DomainError(f"{fn}() is only defined for real arguments")
        if fn == "abs":
            return np.abs(u)
        if fn == "sign":
            return np.where(u >= 0, 1.0, -1.0)
        return np.where(u >= 0, 1.0, 0.0)
    # Dirac markers carry no regular part.
    return 0.0 * _eval_np(node.arg, x)


def evaluate_mp(node: Expr, x):
    """Evaluate at an mpmath number (real or complex) in the current precision."""
    if isinstance(node, Num):
        return mpmath.mpf(node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -evaluate_mp(node.arg, x)
    if isinstance(node, BinOp):
        a = evaluate_mp(node.left, x)
        b = evaluate_mp(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        base = evaluate_mp(node.base, x)
        p = node.exponent
        if _is_integer(p):
            return base ** int(p)
        if isinstance(base, mpmath.mpf) and base < 0:
            raise DomainError(f"negative base raised to non-integer power {p!r}")
        return mpmath.power(base, mpmath.mpf(p))
    if isinstance(node, Call):
        u = evaluate_mp(node.arg, x)
        fn = node.fn
        if fn == "exp":
            return mpmath.exp(u)
        if fn == "sin":
            return mpmath.sin(u)
        if fn == "cos":
            return mpmath.cos(u)
        if isinstance(u, mpmath.mpc):
            raise DomainError(f"{fn}() is only defined for real arguments")
        if fn == "abs":
            return abs(u)
        if fn == "sign":
            return mpmath.mpf(1) if u >= 0 else mpmath.mpf(-1)
        return mpmath.mpf(1) if u >= 0 else mpmath.mpf(0)
    return mpmath.mpf(0)


# --------------------------------------------------------------------------
# construction helpers with light constant folding


def _num(node):
    return node.value if isinstance(node, Num) else None


def add(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0:
        return b
    if vb == 0:
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0:
        return a
    if va == 0:
        return neg(b)
    return BinOp("-", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0 or vb == 0:
        return Num(0.0)
    if va == 1:
        return b
    if vb == 1:
        return a
    if vb is not None:
        # keep numeric factors on the left: 2.5*t^1.5 rather than t^1.5*2.5
        return BinOp("*", b, a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0:
        return Num(va / vb)
    if va == 0:
        return Num(0.0)
    if vb == 1:
        return a
    return BinOp("/", a, b)


def power(base: Expr, p: float) -> Expr:
    if p == 0:
        return Num(1.0)
    if p == 1:
        return base
    vb = _num(base)
    if vb is not None and (vb >= 0 or _is_integer(p)):
        return Num(vb**p)
    return Pow(base, p)


def diff(node: Expr, var: str = "t") -> Expr:
    """Symbolic derivative with respect to ``var``."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return neg(diff(node.arg, var))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = diff(a, var), diff(b, var)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        # quotient rule
        return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))
    if isinstance(node, Pow):
        p = node.exponent
        return mul(mul(Num(p), power(node.base, p - 1.0)), diff(node.base, var))
    du = diff(node.arg, var)
    u = node.arg
    if isinstance(node, Dirac):
        return mul(Dirac(u, node.order + 1), du)
    fn = node.fn
    if fn == "exp":
        inner = Call("exp", u)
    elif fn == "sin":
        inner = Call("cos", u)
    elif fn == "cos":
        inner = neg(Call("sin", u))
    elif fn == "abs":
        inner = Call("sign", u)
    elif fn == "sign":
        inner = mul(Num(2.0), Dirac(u, 0))
    else:  # heaviside
        inner = Dirac(u, 0)
    return mul(inner, du)


def substitute(node: Expr, var: str, replacement: Expr) -> Expr:
    """Replace every occurrence of ``var`` by ``replacement``."""
    if isinstance(node, Var):
        return replacement if node.name == var else node
    if isinstance(node, Num):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, var, replacement))
    if isinstance(node, BinOp):
        return BinOp(
            node.op,
            substitute(node.left, var, replacement),
            substitute(node.right, var, replacement),
        )
    if isinstance(node, Pow):
        return Pow(substitute(node.base, var, replacement), node.exponent)
    if isinstance(node, Dirac):
        return Dirac(substitute(node.arg, var, replacement), node.order)
    return Call(node.fn, substitute(node.arg, var, replacement))


def affine(node: Expr):
    """Return ``(k, b)`` when ``node`` is structurally ``k*var + b``, else None."""
    if isinstance(node, Num):
        return 0.0, node.value
    if isinstance(node, Var):
        return 1.0, 0.0
    if isinstance(node, Neg):
        r = affine(node.arg)
        return None if r is None else (-r[0], -r[1])
    if isinstance(node, BinOp):
        left, right = affine(node.left), affine(node.right)
        if left is None or right is None:
            return None
        if node.op == "+":
            return left[0] + right[0], left[1] + right[1]
        if node.op == "-":
            return left[0] - right[0], left[1] - right[1]
        if node.op == "*":
            if left[0] == 0:
                return left[1] * right[0], left[1] * right[1]
            if right[0] == 0:
                return right[1] * left[0], right[1] * left[1]
            return None
        if right[0] == 0 and right[1] != 0:
            return left[0] / right[1], left[1] / right[1]
        return None
    if isinstance(node, Pow):
        r = affine(node.base)
        if r is not None and r[0] == 0:
            return 0.0, r[1] ** node.exponent
        if r is not None and node.exponent == 1:
            return r
        return None
    if isinstance(node, Call) and not contains_var(node.arg):
        return 0.0, float(evaluate(node, 0.0))
    return None


# --------------------------------------------------------------------------
# Dirac markers


def _additive_terms(node, sign=1.0):
    if isinstance(node, BinOp) and node.op in "+-":
        yield from _additive_terms(node.left, sign)
        yield from _additive_terms(node.right, sign if node.op == "+" else -sign)
    elif isinstance(node, Neg):
        yield from _additive_terms(node.arg, -sign)
    else:
        yield sign, node


def _split_factor(node):
    """Split a product into (smooth factor, Dirac marker) or return None."""
    if isinstance(node, Dirac):
        return Num(1.0), node
    if isinstance(node, Neg):
        r = _split_factor(node.arg)
        return None if r is None else (neg(r[0]), r[1])
    if isinstance(node, BinOp) and node.op in "*/":
        left_d, right_d = contains_dirac(node.left), contains_dirac(node.right)
        if left_d and not right_d:
            r = _split_factor(node.left)
            if r is None:
                return None
            combine = mul if node.op == "*" else div
            return combine(r[0], node.right), r[1]
        if right_d and not left_d and node.op == "*":
            r = _split_factor(node.right)
            return None if r is None else (mul(node.left, r[0]), r[1])
    return None


def regular_part(node: Expr) -> Expr:
    """Drop Dirac markers (they evaluate to 0 anyway) and simplify."""
    if isinstance(node, Dirac):
        return Num(0.0)
    if isinstance(node, (Num, Var)):
        return node
    if isinstance(node, Neg):
        return neg(regular_part(node.arg))
    if isinstance(node, BinOp):
        a, b = regular_part(node.left), regular_part(node.right)
        return {"+": add, "-": sub, "*": mul, "/": div}[node.op](a, b)
    if isinstance(node, Pow):
        return power(regular_part(node.base), node.exponent)
    return Call(node.fn, node.arg)


def _roots(u, lo, hi, samples=4096):
    from scipy.optimize import brentq

    xs = np.linspace(lo, hi, samples + 1)
    vals = np.asarray(evaluate(u, xs), dtype=float) * np.ones_like(xs)
    roots = []
    for i in range(samples):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(xs[i])
        elif a * b < 0:
            roots.append(brentq(lambda z: float(evaluate(u, z)), xs[i], xs[i + 1], xtol=1e-15))
    if vals[-1] == 0.0:
        roots.append(xs[-1])
    return roots


def dirac_terms(node: Expr, lo: float, hi: float, var: str = "t"):
    """Resolve Dirac markers of ``node`` into ``(location, order, coefficient)``.

    Only zeros of the marker argument in the half-open window ``(lo, hi]``
    are reported. Markers must enter additively, multiplied by a smooth
    factor; orders above 1 need an affine argument and a constant factor.
    """
    out = []
    for sign, term in _additive_terms(node):
        if not contains_dirac(term):
            continue
        split = _split_factor(term)
        if split is None:
            raise DomainError(f"cannot resolve point masses in {to_str(term)}")
        factor, marker = split
        u = marker.arg
        du = diff(u, var)
        for z in _roots(u, lo, hi):
            if z <= lo:
                continue
            slope = float(evaluate(du, z))
            if slope == 0.0:
                raise DomainError(f"degenerate zero of {to_str(u)} at t={z}")
            g = sign * float(evaluate(factor, z))
            m = marker.order
            # delta^(m)(u(t)) = delta^(m)(t - z) / (|u'| u'^m) for affine u
            out.append((z, m, g / (abs(slope) * slope**m)))
            if m == 1:
                # g(t) delta'(t - z) = g(z) delta'(t - z) - g'(z) delta(t - z)
                gprime = sign * float(evaluate(diff(factor, var), z))
                if gprime != 0.0:
                    out.append((z, 0, -gprime / (abs(slope) * slope)))
            elif m > 1 and contains_var(factor):
                raise DomainError("derivative point masses need a constant factor")
    return out
