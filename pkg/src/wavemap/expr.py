"""Univariate arithmetic expressions: parsing, evaluation and symbolic derivatives.

Grammar (whitespace insignificant)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?          # right associative, binds tightest
    atom  := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are the single free variable, one of the functions in ``FUNCTIONS``
or one of the constants ``pi``, ``e``, ``sqrt2``.

Examples
--------
>>> evaluate(parse("2*x + sin(x)"), 0.0)
0.0
>>> to_text(differentiate(parse("x^2")))
'2*x'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Expression",
    "Const",
    "NamedConst",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "ExpressionDomainError",
    "FUNCTIONS",
    "CONSTANTS",
    "parse",
    "evaluate",
    "differentiate",
    "to_text",
    "is_constant",
    "const",
    "add",
    "sub",
    "mul",
    "div",
    "power",
    "neg",
    "call",
]

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "tanh", "exp", "ln", "sqrt", "erfi")
CONSTANTS = {"pi": math.pi, "e": math.e, "sqrt2": math.sqrt(2.0)}


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class NamedConst:
    name: str

    @property
    def value(self) -> float:
        return CONSTANTS[self.name]


@dataclass(frozen=True)
class Var:
    name: str = "x"


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Const, NamedConst, Var, Neg, BinOp, Call]


class ExpressionSyntaxError(ValueError):
    """Malformed source text; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int, expected: str):
        super().__init__(f"{message} at offset {offset} (expected {expected})")
        self.offset = offset
        self.expected = expected


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset, "variable, function or constant")
        self.name = name


class ExpressionDomainError(ArithmeticError):
    """Raised by :func:`evaluate` when a node is evaluated outside its domain."""

    def __init__(self, message: str, node: Expression):
        super().__init__(f"{message} in {to_text(node)!r}")
        self.node = node


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Token:
    kind: str  # num, name, op, end
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos >= len(source):
            break
        m = _TOKEN_RE.match(source, pos)
        boff = len(source[:pos].encode("utf-8"))
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", boff, "a token")
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), len(source[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(_Token("end", "", len(source.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, source: str, variable: str):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variable = variable

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def fail(self, expected: str):
        t = self.tok
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ExpressionSyntaxError(f"unexpected {what}", t.offset, expected)

    def parse(self) -> Expression:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expression:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(float(t.text))
        if t.kind == "name":
            self.i += 1
            if t.text in FUNCTIONS:
                if not self.accept("("):
                    self.fail("'(' after function name")
                arg = self.expr()
                if not self.accept(")"):
                    self.fail("')'")
                return Call(t.text, arg)
            if t.text in CONSTANTS:
                return NamedConst(t.text)
            if t.text == self.variable:
                return Var(t.text)
            raise UnknownIdentifierError(t.text, t.offset)
        if self.accept("("):
            node = self.expr()
            if not self.accept(")"):
                self.fail("')'")
            return node
        self.fail("number, name or '('")


def parse(source: str, variable: str = "x") -> Expression:
    """Parse ``source`` into an expression tree over the free variable ``variable``."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return _Parser(source, variable).parse()


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node: Expression) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _fmt_number(v: float) -> str:
    text = repr(float(v))
    return text[:-2] if text.endswith(".0") else text


def to_text(node: Expression) -> str:
    """Render with the minimal parentheses that reparse to the same tree."""
    if isinstance(node, Const):
        if node.value < 0 or not math.isfinite(node.value):
            # only reachable for trees built by hand
            return f"({_fmt_number(node.value)})"
        return _fmt_number(node.value)
    if isinstance(node, NamedConst):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        return f"-({inner})" if _prec(node.arg) < _PREC["neg"] else f"-{inner}"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def _is_array(v) -> bool:
    return isinstance(v, np.ndarray)


def _check(bad, message: str, node: Expression):
    if np.any(bad):
        raise ExpressionDomainError(message, node)


def _apply(func: str, a, node: Expression):
    from .ode import erfi  # local import keeps expr importable on its own

    if func == "ln":
        _check(np.asarray(a) <= 0, "logarithm of a non-positive value", node)
        return np.log(a) if _is_array(a) else math.log(a)
    if func == "sqrt":
        _check(np.asarray(a) < 0, "square root of a negative value", node)
        return np.sqrt(a) if _is_array(a) else math.sqrt(a)
    if func == "erfi":
        try:
            return erfi(a)
        except OverflowError as exc:
            raise ExpressionDomainError(str(exc), node) from None
    npf = {"sin": np.sin, "cos": np.cos, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh, "exp": np.exp}[func]
    with np.errstate(over="ignore"):
        out = npf(a)
    _check(~np.isfinite(out), f"overflow in {func}", node)
    return out if _is_array(a) else float(out)


def _pow(a, b, node: Expression):
    aa, bb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check((aa == 0) & (bb < 0), "zero raised to a negative power", node)
    _check((aa < 0) & (bb != np.round(bb)), "negative base with non-integer exponent", node)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.power(aa, bb)
    _check(~np.isfinite(out), "overflow in power", node)
    return out if (_is_array(a) or _is_array(b)) else float(out)


def _eval(node: Expression, x):
    if isinstance(node, Var):
        return x
    if isinstance(node, (Const, NamedConst)):
        return node.value
    if isinstance(node, Neg):
        return -_eval(node.arg, x)
    if isinstance(node, Call):
        return _apply(node.func, _eval(node.arg, x), node)
    a = _eval(node.left, x)
    b = _eval(node.right, x)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        _check(np.asarray(b) == 0, "division by zero", node)
        return a / b
    return _pow(a, b, node)


def evaluate(expr: Expression, x):
    """Evaluate at ``x`` (a float or a numpy array, evaluated elementwise).

    Constant expressions broadcast to the shape of ``x``.
    """
    if _is_array(x):
        x = np.asarray(x, dtype=float)
        out = _eval(expr, x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()
    return float(_eval(expr, float(x)))


# --------------------------------------------------------------------------
# Construction helpers with trivial constant folding
# --------------------------------------------------------------------------


def const(v: float) -> Expression:
    """A numeric literal; negative values become ``Neg(Const(|v|))`` so trees print and reparse cleanly."""
    v = float(v)
    return Neg(Const(-v)) if v < 0 else Const(v)


def _num(node: Expression):
    """Numeric value of a literal node (``Const`` or ``Neg(Const)``) else ``None``."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg) and isinstance(node.arg, Const):
        return -node.arg.value
    return None


def neg(a: Expression) -> Expression:
    v = _num(a)
    if v is not None:
        return const(-v)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expression, b: Expression) -> Expression:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return const(va + vb)
    if va == 0:
        return b
    if vb == 0:
        return a
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return const(va - vb)
    if vb == 0:
        return a
    if va == 0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return const(va * vb)
    if va == 0 or vb == 0:
        return Const(0.0)
    if va == 1:
        return b
    if vb == 1:
        return a
    if va == -1:
        return neg(b)
    if vb == -1:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0:
        return const(va / vb)
    if va == 0:
        return Const(0.0)
    if vb == 1:
        return a
    return BinOp("/", a, b)


def power(a: Expression, b: Expression) -> Expression:
    vb = _num(b)
    if vb == 0:
        return Const(1.0)
    if vb == 1:
        return a
    return BinOp("^", a, b)


def call(func: str, a: Expression) -> Expression:
    if func not in FUNCTIONS:
        raise ValueError(f"unknown function {func!r}")
    return Call(func, a)


def is_constant(expr: Expression) -> bool:
    """True when the tree contains no variable node."""
    if isinstance(expr, Var):
        return False
    if isinstance(expr, (Const, NamedConst)):
        return True
    if isinstance(expr, (Neg, Call)):
        return is_constant(expr.arg)
    return is_constant(expr.left) and is_constant(expr.right)


# --------------------------------------------------------------------------
# Differentiation
# --------------------------------------------------------------------------

_TWO_OVER_SQRT_PI = BinOp("/", Const(2.0), Call("sqrt", NamedConst("pi")))


def _dfunc(func: str, a: Expression) -> Expression:
    if func == "sin":
        return call("cos", a)
    if func == "cos":
        return neg(call("sin", a))
    if func == "sinh":
        return call("cosh", a)
    if func == "cosh":
        return call("sinh", a)
    if func == "tanh":
        return sub(Const(1.0), power(call("tanh", a), Const(2.0)))
    if func == "exp":
        return call("exp", a)
    if func == "ln":
        return div(Const(1.0), a)
    if func == "sqrt":
        return div(Const(1.0), mul(Const(2.0), call("sqrt", a)))
    if func == "erfi":
        return mul(_TWO_OVER_SQRT_PI, call("exp", power(a, Const(2.0))))
    raise ValueError(func)


def differentiate(expr: Expression) -> Expression:
    """Exact derivative with respect to the free variable."""
    if isinstance(expr, Var):
        return Const(1.0)
    if isinstance(expr, (Const, NamedConst)):
        return Const(0.0)
    if isinstance(expr, Neg):
        return neg(differentiate(expr.arg))
    if isinstance(expr, Call):
        return mul(_dfunc(expr.func, expr.arg), differentiate(expr.arg))
    a, b, op = expr.left, expr.right, expr.op
    da, db = differentiate(a), differentiate(b)
    if op == "+":
        return add(da, db)
    if op == "-":
        return sub(da, db)
    if op == "*":
        return add(mul(da, b), mul(a, db))
    if op == "/":
        return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
    # power
    if is_constant(b):
        return mul(mul(b, power(a, sub(b, Const(1.0)))), da)
    # a^b = exp(b ln a)
    return mul(expr, add(mul(db, call("ln", a)), div(mul(b, da), a)))
