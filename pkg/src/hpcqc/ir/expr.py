"""Symbolic gate parameters.

A parameter is a small expression tree over real literals and named symbols
combined with ``+``, ``-``, ``*`` and negation.  Trees are immutable and
compare structurally, so two circuits are equal only if their parameters
were written the same way.

The textual form produced by :func:`format_expr` is fully parenthesised and
is read back by :func:`parse_expr` into an identical tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from ..errors import MissingBinding, NonFiniteValue

RESERVED_NAMES = frozenset({"pi"})


def format_real(value: float) -> str:
    """17 significant digits, trailing zeros kept (round-trips exactly)."""
    return "%#.17g" % float(value)


class ParamExpr:
    """Base class of the expression nodes."""

    __slots__ = ()

    def symbols(self) -> frozenset[str]:
        raise NotImplementedError

    def evaluate(self, bindings: Mapping[str, float] | None = None) -> float:
        raise NotImplementedError

    def substitute(self, bindings: Mapping[str, float]) -> "ParamExpr":
        """Replace bound symbols by literals, leaving the others in place."""
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return not self.symbols()

    def __add__(self, other: "ExprLike") -> "ParamExpr":
        return Add(self, as_expr(other))

    def __radd__(self, other: "ExprLike") -> "ParamExpr":
        return Add(as_expr(other), self)

    def __sub__(self, other: "ExprLike") -> "ParamExpr":
        return Sub(self, as_expr(other))

    def __rsub__(self, other: "ExprLike") -> "ParamExpr":
        return Sub(as_expr(other), self)

    def __mul__(self, other: "ExprLike") -> "ParamExpr":
        return Mul(self, as_expr(other))

    def __rmul__(self, other: "ExprLike") -> "ParamExpr":
        return Mul(as_expr(other), self)

    def __neg__(self) -> "ParamExpr":
        return Neg(self)

    def __str__(self) -> str:
        return format_expr(self)


@dataclass(frozen=True, eq=True, repr=False)
class Lit(ParamExpr):
    value: float

    def symbols(self) -> frozenset[str]:
        return frozenset()

    def evaluate(self, bindings=None) -> float:
        return float(self.value)

    def substitute(self, bindings) -> ParamExpr:
        return self

    def __repr__(self) -> str:
        return f"Lit({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Sym(ParamExpr):
    name: str

    def symbols(self) -> frozenset[str]:
        return frozenset((self.name,))

    def evaluate(self, bindings=None) -> float:
        if bindings is None or self.name not in bindings:
            raise MissingBinding(self.name)
        return float(bindings[self.name])

    def substitute(self, bindings) -> ParamExpr:
        if self.name in bindings:
            return Lit(float(bindings[self.name]))
        return self

    def __repr__(self) -> str:
        return f"Sym({self.name!r})"


@dataclass(frozen=True, eq=True, repr=False)
class _Binary(ParamExpr):
    left: ParamExpr
    right: ParamExpr

    op = ""

    def symbols(self) -> frozenset[str]:
        return self.left.symbols() | self.right.symbols()

    def substitute(self, bindings) -> ParamExpr:
        return type(self)(self.left.substitute(bindings), self.right.substitute(bindings))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(_Binary):
    op = "+"

    def evaluate(self, bindings=None) -> float:
        return self.left.evaluate(bindings) + self.right.evaluate(bindings)


class Sub(_Binary):
    op = "-"

    def evaluate(self, bindings=None) -> float:
        return self.left.evaluate(bindings) - self.right.evaluate(bindings)


class Mul(_Binary):
    op = "*"

    def evaluate(self, bindings=None) -> float:
        return self.left.evaluate(bindings) * self.right.evaluate(bindings)


@dataclass(frozen=True, eq=True, repr=False)
class Neg(ParamExpr):
    operand: ParamExpr

    def symbols(self) -> frozenset[str]:
        return self.operand.symbols()

    def evaluate(self, bindings=None) -> float:
        return -self.operand.evaluate(bindings)

    def substitute(self, bindings) -> ParamExpr:
        return Neg(self.operand.substitute(bindings))

    def __repr__(self) -> str:
        return f"Neg({self.operand!r})"


ExprLike = Union[ParamExpr, float, int, str]


def as_expr(value: ExprLike) -> ParamExpr:
    if isinstance(value, ParamExpr):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not gate parameters")
    if isinstance(value, (int, float)):
        return Lit(float(value))
    if isinstance(value, str):
        return Sym(value)
    raise TypeError(f"cannot convert {type(value).__name__} to a parameter")


def format_expr(expr: ParamExpr) -> str:
    if isinstance(expr, Lit):
        return format_real(expr.value)
    if isinstance(expr, Sym):
        return expr.name
    if isinstance(expr, Neg):
        return f"-({format_expr(expr.operand)})"
    if isinstance(expr, _Binary):
        return f"({format_expr(expr.left)}{expr.op}{format_expr(expr.right)})"
    raise TypeError(type(expr).__name__)


def fold(expr: ParamExpr) -> ParamExpr:
    """Evaluate constant subtrees and drop additive/multiplicative identities."""
    if isinstance(expr, (Lit, Sym)):
        return expr
    if isinstance(expr, Neg):
        inner = fold(expr.operand)
        if isinstance(inner, Lit):
            return _finite_lit(-inner.value)
        if isinstance(inner, Neg):
            return inner.operand
        return Neg(inner)
    left, right = fold(expr.left), fold(expr.right)
    if isinstance(left, Lit) and isinstance(right, Lit):
        return _finite_lit(type(expr)(left, right).evaluate())
    if isinstance(expr, Add):
        if left == Neg(right) or right == Neg(left):
            return Lit(0.0)
        if _is_lit(left, 0.0):
            return right
        if _is_lit(right, 0.0):
            return left
    elif isinstance(expr, Sub):
        if left == right:
            return Lit(0.0)
        if _is_lit(right, 0.0):
            return left
        if _is_lit(left, 0.0):
            return fold(Neg(right))
    elif isinstance(expr, Mul):
        if _is_lit(left, 0.0) or _is_lit(right, 0.0):
            return Lit(0.0)
        if _is_lit(left, 1.0):
            return right
        if _is_lit(right, 1.0):
            return left
    return type(expr)(left, right)


def _is_lit(expr: ParamExpr, value: float) -> bool:
    return isinstance(expr, Lit) and expr.value == value


def _finite_lit(value: float) -> Lit:
    if not math.isfinite(value):
        raise NonFiniteValue(f"constant expression evaluates to {value}")
    return Lit(value)


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/()]))"
)


class ExprSyntaxError(ValueError):
    """Raised by :func:`parse_expr`; ``offset`` is a 0-based character index."""

    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _ExprParser:
    def __init__(self, text: str, allow_division: bool):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allow_division = allow_division

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value:
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> ParamExpr:
        expr = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return expr

    def sum(self) -> ParamExpr:
        expr = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.product()
            expr = Add(expr, rhs) if op == "+" else Sub(expr, rhs)
        return expr

    def product(self) -> ParamExpr:
        expr = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            rhs = self.unary()
            if op == "*":
                expr = Mul(expr, rhs)
                continue
            if not self.allow_division:
                raise ExprSyntaxError("division is not allowed here", pos)
            if rhs.symbols():
                raise ExprSyntaxError("divisor must be a constant", pos)
            divisor = rhs.evaluate()
            if divisor == 0.0:
                raise ExprSyntaxError("division by zero", pos)
            expr = Mul(expr, Lit(1.0 / divisor))
        return expr

    def unary(self) -> ParamExpr:
        kind, text, pos = self.peek()
        if text == "-":
            self.take()
            nxt = self.peek()
            if nxt[0] == "num":
                self.take()
                return _literal(nxt[1], nxt[2], negate=True)
            return Neg(self.unary())
        if text == "+":
            self.take()
            return self.unary()
        return self.atom()

    def atom(self) -> ParamExpr:
        kind, text, pos = self.take()
        if kind == "num":
            return _literal(text, pos)
        if kind == "name":
            if text == "pi":
                return Lit(math.pi)
            return Sym(text)
        if text == "(":
            expr = self.sum()
            self.expect(")")
            return expr
        raise ExprSyntaxError(f"expected an expression, found {text or 'end of input'!r}", pos)


def _literal(text: str, pos: int, negate: bool = False) -> Lit:
    value = float(text)
    if not math.isfinite(value):
        raise ExprSyntaxError(f"literal {text!r} is not finite", pos)
    return Lit(-value if negate else value)


def parse_expr(text: str, *, allow_division: bool = False) -> ParamExpr:
    """Parse a parameter expression.

    ``pi`` denotes the constant.  Division is accepted only when
    ``allow_division`` is set and the divisor is constant; ``a/c`` becomes
    ``a * (1/c)``.
    """
    return _ExprParser(text, allow_division).parse()
