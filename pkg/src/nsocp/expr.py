"""A small smooth-expression language.

Problems are declared in text: variables ``x1 .. xn``, real literals,
``+ - * / ^``, unary minus, and ``sin cos exp log sqrt``.  Parsing is a
plain recursive descent with the usual precedence (``^`` binds tightest,
then unary minus, then ``* /``, then ``+ -``; ``^`` associates right,
the rest left).  Gradients come from forward-mode dual numbers, so they
are exact up to floating point wherever the expression is differentiable.

``abs``/``max`` are deliberately absent: constraint maps are assumed C^1
and nonsmooth merit functions are composed downstream from smooth pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ExprError(ValueError):
    """Base class for expression problems."""


class ParseError(ExprError):
    """Syntax error, carrying the character position it occurred at."""

    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"at position {position}: {message}")


class UnknownIdentifier(ParseError):
    pass


class VariableOutOfRange(ParseError):
    pass


class DomainError(ExprError):
    """Evaluation left the real domain (log/sqrt of a negative, division
    by zero, ...).  Carries the offending subexpression."""

    def __init__(self, message: str, subexpr: "Expr"):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{to_string(subexpr)}'")


# -- AST ----------------------------------------------------------------------

class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str  # sin cos exp log sqrt
    arg: Expr


FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}  # unary minus sits at 3


# -- parser -------------------------------------------------------------------

class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self._skip_ws()
        if self.pos >= len(self.text):
            return None, self.pos
        return self.text[self.pos], self.pos

    def take_number(self):
        start = self.pos
        text = self.text
        n = len(text)
        i = self.pos
        while i < n and text[i].isdigit():
            i += 1
        if i < n and text[i] == ".":
            i += 1
            while i < n and text[i].isdigit():
                i += 1
        if i < n and text[i] in "eE":
            j = i + 1
            if j < n and text[j] in "+-":
                j += 1
            if j < n and text[j].isdigit():
                i = j
                while i < n and text[i].isdigit():
                    i += 1
        token = text[start:i]
        try:
            value = float(token)
        except ValueError:
            raise ParseError(start, f"malformed number {token!r}")
        self.pos = i
        return value, start

    def take_ident(self):
        start = self.pos
        text = self.text
        i = self.pos
        while i < len(text) and (text[i].isalnum() or text[i] == "_"):
            i += 1
        self.pos = i
        return text[start:i], start


def parse(text: str, n: int) -> Expr:
    """Parse ``text`` into an expression over variables ``x1 .. xn``."""
    if n < 1:
        raise ExprError("n must be >= 1")
    tok = _Tokenizer(text)

    def parse_sum():
        node = parse_term()
        while True:
            ch, _ = tok.peek()
            if ch in ("+", "-"):
                tok.pos += 1
                rhs = parse_term()
                node = BinOp(ch, node, rhs)
            else:
                return node

    def parse_term():
        node = parse_unary()
        while True:
            ch, _ = tok.peek()
            if ch in ("*", "/"):
                tok.pos += 1
                rhs = parse_unary()
                node = BinOp(ch, node, rhs)
            else:
                return node

    def parse_unary():
        ch, _ = tok.peek()
        if ch == "-":
            tok.pos += 1
            return Neg(parse_unary())
        if ch == "+":
            tok.pos += 1
            return parse_unary()
        return parse_power()

    def parse_power():
        base = parse_atom()
        ch, _ = tok.peek()
        if ch == "^":
            tok.pos += 1
            # exponent may carry its own unary minus, and ^ is right-assoc
            expo = parse_unary()
            return BinOp("^", base, expo)
        return base

    def parse_atom():
        ch, pos = tok.peek()
        if ch is None:
            raise ParseError(pos, "unexpected end of input")
        if ch.isdigit() or ch == ".":
            value, _ = tok.take_number()
            return Num(value)
        if ch == "(":
            tok.pos += 1
            node = parse_sum()
            ch2, pos2 = tok.peek()
            if ch2 != ")":
                raise ParseError(pos2, "expected ')'")
            tok.pos += 1
            return node
        if ch.isalpha() or ch == "_":
            name, start = tok.take_ident()
            nxt, _ = tok.peek()
            if nxt == "(":
                if name not in FUNCTIONS:
                    raise UnknownIdentifier(start, f"unknown function {name!r}")
                tok.pos += 1
                arg = parse_sum()
                ch2, pos2 = tok.peek()
                if ch2 != ")":
                    raise ParseError(pos2, "expected ')'")
                tok.pos += 1
                return Call(name, arg)
            if name.startswith("x") and name[1:].isdigit():
                idx = int(name[1:])
                if idx < 1 or idx > n:
                    raise VariableOutOfRange(
                        start, f"variable {name} out of range 1..{n}"
                    )
                return Var(idx)
            raise UnknownIdentifier(start, f"unknown identifier {name!r}")
        raise ParseError(pos, f"unexpected character {ch!r}")

    node = parse_sum()
    ch, pos = tok.peek()
    if ch is not None:
        raise ParseError(pos, f"trailing input starting with {ch!r}")
    return node


# -- printing -----------------------------------------------------------------

def to_string(e: Expr) -> str:
    """Render ``e``; reparsing the result yields an identical tree."""

    def prec(node):
        if isinstance(node, (Num, Var, Call)):
            return 5
        if isinstance(node, Neg):
            return 3
        return _PRECEDENCE[node.op]

    def wrap(node, parent_prec, tight=False):
        s = render(node)
        p = prec(node)
        if p < parent_prec or (tight and p == parent_prec):
            return f"({s})"
        # negative literals need parens in tight (right operand) spots
        if tight and isinstance(node, Num) and node.value < 0:
            return f"({s})"
        return s

    def render(node):
        if isinstance(node, Num):
            v = node.value
            if v == int(v) and abs(v) < 1e16:
                return str(int(v))
            return repr(v)
        if isinstance(node, Var):
            return f"x{node.index}"
        if isinstance(node, Neg):
            return f"-{wrap(node.arg, 3)}"
        if isinstance(node, Call):
            return f"{node.fn}({render(node.arg)})"
        op = node.op
        p = _PRECEDENCE[op]
        if op == "^":
            # right-assoc: parenthesize a left operand of equal precedence
            return f"{wrap(node.left, p, tight=True)}^{wrap(node.right, p)}"
        # left-assoc: parenthesize a right operand of equal precedence
        return f"{wrap(node.left, p)} {op} {wrap(node.right, p, tight=True)}"

    return render(e)


# -- evaluation ---------------------------------------------------------------

def max_var_index(e: Expr) -> int:
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Neg):
        return max_var_index(e.arg)
    if isinstance(e, Call):
        return max_var_index(e.arg)
    if isinstance(e, BinOp):
        return max(max_var_index(e.left), max_var_index(e.right))
    return 0


def evaluate(e: Expr, x) -> float:
    """Evaluate ``e`` at ``x`` (IEEE double semantics)."""
    x = np.asarray(x, dtype=float)

    def ev(node):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            return float(x[node.index - 1])
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Call):
            v = ev(node.arg)
            if node.fn == "log":
                if v <= 0.0:
                    raise DomainError(f"log of non-positive value {v!r}", node)
                return math.log(v)
            if node.fn == "sqrt":
                if v < 0.0:
                    raise DomainError(f"sqrt of negative value {v!r}", node)
                return math.sqrt(v)
            return getattr(math, node.fn)(v)
        a = ev(node.left)
        b = ev(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0.0:
                raise DomainError("division by zero", node)
            return a / b
        return _pow_value(a, b, node)

    return float(ev(e))


def _pow_value(base: float, expo: float, node: Expr) -> float:
    if expo == int(expo):
        if base == 0.0 and expo < 0:
            raise DomainError("zero raised to a negative power", node)
        return base ** int(expo)
    if base <= 0.0:
        raise DomainError(
            f"non-integer power of non-positive base {base!r}", node
        )
    return base ** expo


@dataclass
class DualNumber:
    """value plus the n partial derivatives carried forward."""

    value: float
    partials: np.ndarray


def grad(e: Expr, x) -> np.ndarray:
    """Forward-mode gradient of ``e`` at ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size

    def ev(node) -> DualNumber:
        if isinstance(node, Num):
            return DualNumber(node.value, np.zeros(n))
        if isinstance(node, Var):
            p = np.zeros(n)
            p[node.index - 1] = 1.0
            return DualNumber(float(x[node.index - 1]), p)
        if isinstance(node, Neg):
            d = ev(node.arg)
            return DualNumber(-d.value, -d.partials)
        if isinstance(node, Call):
            d = ev(node.arg)
            v = d.value
            if node.fn == "sin":
                return DualNumber(math.sin(v), math.cos(v) * d.partials)
            if node.fn == "cos":
                return DualNumber(math.cos(v), -math.sin(v) * d.partials)
            if node.fn == "exp":
                ev_ = math.exp(v)
                return DualNumber(ev_, ev_ * d.partials)
            if node.fn == "log":
                if v <= 0.0:
                    raise DomainError(f"log of non-positive value {v!r}", node)
                return DualNumber(math.log(v), d.partials / v)
            # sqrt
            if v < 0.0:
                raise DomainError(f"sqrt of negative value {v!r}", node)
            s = math.sqrt(v)
            if s == 0.0:
                if np.any(d.partials != 0.0):
                    raise DomainError("sqrt not differentiable at zero", node)
                return DualNumber(0.0, np.zeros(n))
            return DualNumber(s, d.partials / (2.0 * s))
        a = ev(node.left)
        b = ev(node.right)
        if node.op == "+":
            return DualNumber(a.value + b.value, a.partials + b.partials)
        if node.op == "-":
            return DualNumber(a.value - b.value, a.partials - b.partials)
        if node.op == "*":
            return DualNumber(
                a.value * b.value, a.value * b.partials + b.value * a.partials
            )
        if node.op == "/":
            if b.value == 0.0:
                raise DomainError("division by zero", node)
            val = a.value / b.value
            return DualNumber(val, (a.partials - val * b.partials) / b.value)
        return _pow_dual(a, b, node, n)

    return ev(e).partials


def _pow_dual(a: DualNumber, b: DualNumber, node: Expr, n: int) -> DualNumber:
    constant_expo = not np.any(b.partials != 0.0)
    if constant_expo and b.value == int(b.value):
        p = int(b.value)
        if p == 0:
            return DualNumber(1.0, np.zeros(n))
        if a.value == 0.0 and p < 0:
            raise DomainError("zero raised to a negative power", node)
        val = a.value ** p
        if p == 1:
            return DualNumber(val, a.partials.copy())
        if a.value == 0.0 and p < 2:
            raise DomainError("power rule undefined at zero base", node)
        return DualNumber(val, p * a.value ** (p - 1) * a.partials)
    if a.value <= 0.0:
        raise DomainError(
            f"non-integer power of non-positive base {a.value!r}", node
        )
    val = a.value ** b.value
    dpart = val * (b.partials * math.log(a.value) + b.value * a.partials / a.value)
    return DualNumber(val, dpart)
