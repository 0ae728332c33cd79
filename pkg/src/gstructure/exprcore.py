"""Small symbolic expression engine: parse, print, evaluate, differentiate.

Expressions are immutable trees.  Evaluation accepts scalars or numpy
arrays as bindings, so a whole grid or sample batch is evaluated in one
pass over the tree.

Grammar (highest precedence first)::

    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'
    power   := atom ('^' unary)?          # right associative
    unary   := ('-' | '+') unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

Number = Union[float, np.ndarray]

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "abs")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnboundVariable(ExprError, KeyError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name

    def __str__(self):
        return self.args[0]


class DomainError(ExprError, ValueError):
    pass


class Expr:
    """Base class of expression nodes.  Supports Python operators."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Call(Expr):
    fn: str
    arg: Expr


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse(x)
    return Const(float(x))


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# Smart constructors.  Only constant folding and identities with 0/1.

def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return BinOp("/", a, b)  # kept so evaluation reports the error
    if _is_const(a) and _is_const(b):
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return ONE
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        try:
            return Const(_pow_scalar(a.value, b.value))
        except DomainError:
            return BinOp("^", a, b)
    return BinOp("^", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(fn: str, a: Expr) -> Expr:
    if fn not in FUNCTIONS:
        raise ExprError(f"unknown function {fn!r}")
    if _is_const(a):
        try:
            return Const(float(_apply(fn, np.float64(a.value))))
        except DomainError:
            pass
    return Call(fn, a)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = BinOp(op, e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = BinOp(op, e, rhs)
        return e

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            return Var(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ParseError` (with the offending character position) on
    malformed input or unknown function names.
    """
    return _Parser(text).parse()


# --------------------------------------------------------------- printing

def to_string(e: Expr) -> str:
    """Fully parenthesized text form; ``parse(to_string(e))`` evaluates as ``e``."""
    if isinstance(e, Const):
        v = e.value
        s = repr(float(v))
        if s in ("inf", "-inf", "nan"):
            raise ExprError(f"cannot print non-finite constant {s}")
        return f"({s})" if v < 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, Call):
        return f"{e.fn}({to_string(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------- evaluation

def _pow_scalar(x: float, y: float) -> float:
    return float(_pow(np.float64(x), np.float64(y)))


def _pow(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x == 0) & (y < 0)):
        raise DomainError("zero raised to a negative power")
    if np.any((x < 0) & (y != np.round(y))):
        raise DomainError("negative base with non-integer exponent")
    with np.errstate(over="ignore", invalid="ignore"):
        return np.power(x, y)


def _apply(fn: str, x):
    if fn == "exp":
        with np.errstate(over="ignore"):
            return np.exp(x)
    if fn == "log":
        if np.any(x <= 0):
            raise DomainError("log of nonpositive value")
        return np.log(x)
    if fn == "sqrt":
        if np.any(x < 0):
            raise DomainError("sqrt of negative value")
        return np.sqrt(x)
    if fn == "sin":
        return np.sin(x)
    if fn == "cos":
        return np.cos(x)
    if fn == "abs":
        return np.abs(x)
    raise ExprError(f"unknown function {fn!r}")


def _eval(e: Expr, b: Mapping[str, Number]):
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Var):
        try:
            return np.asarray(b[e.name], dtype=float)
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Neg):
        return -_eval(e.arg, b)
    if isinstance(e, Call):
        return _apply(e.fn, _eval(e.arg, b))
    if isinstance(e, BinOp):
        x = _eval(e.left, b)
        y = _eval(e.right, b)
        if e.op == "+":
            return x + y
        if e.op == "-":
            return x - y
        if e.op == "*":
            return x * y
        if e.op == "/":
            if np.any(y == 0):
                raise DomainError("division by zero")
            return x / y
        if e.op == "^":
            return _pow(x, y)
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, bindings: Mapping[str, Number]) -> Number:
    """Evaluate ``e``.  Array bindings broadcast; the result is a float for
    scalar bindings and an ndarray otherwise."""
    out = _eval(e, bindings)
    if np.ndim(out) == 0:
        return float(out)
    return out


# --------------------------------------------------------- differentiation

def diff(e: Expr, var: str) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to ``var``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(diff(e.arg, var))
    if isinstance(e, Call):
        u = e.arg
        du = diff(u, var)
        if _is_const(du, 0.0):
            return ZERO
        if e.fn == "exp":
            outer = e
        elif e.fn == "log":
            return div(du, u)
        elif e.fn == "sqrt":
            return div(du, mul(Const(2.0), e))
        elif e.fn == "sin":
            outer = call("cos", u)
        elif e.fn == "cos":
            outer = neg(call("sin", u))
        elif e.fn == "abs":
            outer = div(u, e)
        else:
            raise ExprError(f"unknown function {e.fn!r}")
        return mul(outer, du)
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = diff(a, var), diff(b, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        if e.op == "/":
            if _is_const(db, 0.0):
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
        if e.op == "^":
            if _is_const(db, 0.0):
                # d(a^n) = n a^(n-1) da, valid for any constant-in-var exponent
                return mul(mul(b, power(a, sub(b, ONE))), da)
            # general case a^b (b log a)'
            return mul(e, add(mul(db, call("log", a)), div(mul(b, da), a)))
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------- utilities

def variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, rebuilding through the smart constructors."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return call(e.fn, substitute(e.arg, mapping))
    left = substitute(e.left, mapping)
    right = substitute(e.right, mapping)
    return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[e.op](left, right)


def gradient(e: Expr, names) -> list[Expr]:
    return [diff(e, v) for v in names]
