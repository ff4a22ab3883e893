"""Arithmetic expressions in the variables t (time) and s (price).

Coefficient functions such as volatilities and drifts are supplied as
plain strings, e.g. ``"0.1 + 0.1*s/(1+s)"``.  The grammar is closed: the
only variables are ``t`` and ``s``, the only functions are ``exp``,
``log``, ``sqrt``, ``tanh``, ``abs`` (unary) and ``min``, ``max``
(binary).  ``^`` is right-associative and unary minus applies to a whole
power, so ``-2^2 == -4``.

Evaluation is pure: the same AST evaluated at the same point always
returns the same bits.  ``evaluate`` is the strict scalar evaluator and
raises :class:`EvalError` on any non-finite intermediate; ``evaluate_vec``
is the numpy evaluator used by the quadrature and Monte Carlo engines,
which lets non-finite values flow through for the caller to check.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DelayBsError

__all__ = [
    "ParseError",
    "EvalError",
    "Lit",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "parse",
    "evaluate",
    "evaluate_vec",
    "to_source",
]

UNARY_FUNCTIONS = ("exp", "log", "sqrt", "tanh", "abs")
BINARY_FUNCTIONS = ("min", "max")


class ParseError(DelayBsError):
    """Syntax or identifier error, with a 0-based byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(DelayBsError):
    """Non-finite evaluation, carrying the offending node's source span."""

    def __init__(self, message, span):
        super().__init__(f"{message} (source span {span[0]}:{span[1]})")
        self.span = span


@dataclass(frozen=True)
class Lit:
    value: float
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Var:
    name: str  # "t" or "s"
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Neg:
    operand: object
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: object
    right: object
    span: tuple = (0, 0)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    span: tuple = (0, 0)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == m.start():
            # skip leading whitespace manually to report the right offset
            stripped = pos
            while stripped < n and source[stripped].isspace():
                stripped += 1
            if stripped >= n:
                break
            raise ParseError(f"unexpected character {source[stripped]!r}", stripped)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, offset = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", offset)
        return self.next()

    # expr := term (('+'|'-') term)*
    def expr(self):
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.next()
                rhs = self.term()
                node = Bin(text, node, rhs, (node.span[0], rhs.span[1]))
            else:
                return node

    # term := factor (('*'|'/') factor)*
    def term(self):
        node = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.next()
                rhs = self.factor()
                node = Bin(text, node, rhs, (node.span[0], rhs.span[1]))
            else:
                return node

    # factor := '-' factor | power
    # Unary minus applies to the whole power: -2^2 parses as -(2^2).
    def factor(self):
        kind, text, offset = self.peek()
        if kind == "op" and text == "-":
            self.next()
            operand = self.factor()
            return Neg(operand, (offset, operand.span[1]))
        return self.power()

    # power := atom ('^' factor)?   (right-associative)
    def power(self):
        node = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.next()
            rhs = self.factor()
            return Bin("^", node, rhs, (node.span[0], rhs.span[1]))
        return node

    def atom(self):
        kind, text, offset = self.next()
        if kind == "num":
            return Lit(float(text), (offset, offset + len(text)))
        if kind == "ident":
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                return self.call(text, offset)
            if text in ("t", "s"):
                return Var(text, (offset, offset + len(text)))
            raise ParseError(f"unknown identifier {text!r}", offset)
        if kind == "op" and text == "(":
            node = self.expr()
            close = self.expect_op(")")
            return _with_span(node, (offset, close[2] + 1))
        raise ParseError("expected a number, variable, function or '('", offset)

    def call(self, name, offset):
        if name not in UNARY_FUNCTIONS and name not in BINARY_FUNCTIONS:
            raise ParseError(f"unknown function {name!r}", offset)
        self.expect_op("(")
        args = [self.expr()]
        while True:
            kind, text, toff = self.peek()
            if kind == "op" and text == ",":
                self.next()
                args.append(self.expr())
            elif kind == "op" and text == ")":
                close = self.next()
                break
            else:
                raise ParseError("expected ',' or ')'", toff)
        arity = 1 if name in UNARY_FUNCTIONS else 2
        if len(args) != arity:
            raise ParseError(
                f"{name} takes {arity} argument(s), got {len(args)}", offset
            )
        return Call(name, tuple(args), (offset, close[2] + 1))


def _with_span(node, span):
    """Rebuild a node with a widened span (frozen dataclasses)."""
    if isinstance(node, Lit):
        return Lit(node.value, span)
    if isinstance(node, Var):
        return Var(node.name, span)
    if isinstance(node, Neg):
        return Neg(node.operand, span)
    if isinstance(node, Bin):
        return Bin(node.op, node.left, node.right, span)
    return Call(node.func, node.args, span)


def parse(source):
    """Parse ``source`` into an AST, or raise :class:`ParseError`."""
    parser = _Parser(source)
    node = parser.expr()
    kind, text, offset = parser.peek()
    if kind != "eof":
        raise ParseError(f"unexpected trailing input {text!r}", offset)
    return node


def evaluate(ast, t, s):
    """Strict scalar evaluation; raises :class:`EvalError` on domain faults."""
    if isinstance(ast, Lit):
        return ast.value
    if isinstance(ast, Var):
        return float(t) if ast.name == "t" else float(s)
    if isinstance(ast, Neg):
        return -evaluate(ast.operand, t, s)
    if isinstance(ast, Bin):
        a = evaluate(ast.left, t, s)
        b = evaluate(ast.right, t, s)
        if ast.op == "+":
            return a + b
        if ast.op == "-":
            return a - b
        if ast.op == "*":
            return a * b
        if ast.op == "/":
            if b == 0.0:
                raise EvalError("division by zero", ast.span)
            return a / b
        # power
        if a < 0.0 and b != math.floor(b):
            raise EvalError("negative base with non-integer exponent", ast.span)
        try:
            out = a**b
        except (OverflowError, ZeroDivisionError) as exc:
            raise EvalError(f"power failed: {exc}", ast.span) from exc
        if not math.isfinite(out):
            raise EvalError("non-finite power result", ast.span)
        return out
    # Call
    args = [evaluate(arg, t, s) for arg in ast.args]
    f = ast.func
    if f == "exp":
        out = math.exp(args[0]) if args[0] < 709.0 else math.inf
        if not math.isfinite(out):
            raise EvalError("exp overflow", ast.span)
        return out
    if f == "log":
        if args[0] <= 0.0:
            raise EvalError("log of non-positive value", ast.span)
        return math.log(args[0])
    if f == "sqrt":
        if args[0] < 0.0:
            raise EvalError("sqrt of negative value", ast.span)
        return math.sqrt(args[0])
    if f == "tanh":
        return math.tanh(args[0])
    if f == "abs":
        return abs(args[0])
    if f == "min":
        return min(args)
    return max(args)


_NP_UNARY = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
    "abs": np.abs,
}


def evaluate_vec(ast, t, s):
    """Vectorized evaluation; ``t`` and ``s`` may be scalars or arrays.

    Domain faults produce nan/inf instead of raising; engines check
    finiteness downstream where it matters.
    """
    with np.errstate(all="ignore"):
        return _eval_vec(ast, t, s)


def _eval_vec(ast, t, s):
    if isinstance(ast, Lit):
        return ast.value
    if isinstance(ast, Var):
        return t if ast.name == "t" else s
    if isinstance(ast, Neg):
        return -_eval_vec(ast.operand, t, s)
    if isinstance(ast, Bin):
        a = _eval_vec(ast.left, t, s)
        b = _eval_vec(ast.right, t, s)
        if ast.op == "+":
            return a + b
        if ast.op == "-":
            return a - b
        if ast.op == "*":
            return a * b
        if ast.op == "/":
            return a / b
        return np.float_power(a, b)
    args = [_eval_vec(arg, t, s) for arg in ast.args]
    if ast.func in _NP_UNARY:
        return _NP_UNARY[ast.func](args[0])
    if ast.func == "min":
        return np.minimum(args[0], args[1])
    return np.maximum(args[0], args[1])


def to_source(ast):
    """Render an AST back to a parseable string.

    Output is fully parenthesized, so reparsing yields a structurally
    identical tree (spans aside).
    """
    if isinstance(ast, Lit):
        return repr(ast.value)
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        return f"(-{to_source(ast.operand)})"
    if isinstance(ast, Bin):
        return f"({to_source(ast.left)} {ast.op} {to_source(ast.right)})"
    return f"{ast.func}({', '.join(to_source(a) for a in ast.args)})"


def structurally_equal(a, b):
    """Compare two ASTs ignoring source spans."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Lit):
        return a.value == b.value
    if isinstance(a, Var):
        return a.name == b.name
    if isinstance(a, Neg):
        return structurally_equal(a.operand, b.operand)
    if isinstance(a, Bin):
        return (
            a.op == b.op
            and structurally_equal(a.left, b.left)
            and structurally_equal(a.right, b.right)
        )
    return (
        a.func == b.func
        and len(a.args) == len(b.args)
        and all(structurally_equal(x, y) for x, y in zip(a.args, b.args))
    )
