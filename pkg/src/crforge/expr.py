"""Expression language for chart functions.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*`` and ``/``; binary operators are left associative, ``^`` is right
associative and takes an integer exponent)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | "+" unary | power
    power   := atom ("^" exponent)?
    exponent:= "-"? (INT | "(" exponent ")") | atom "^" exponent
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

``i`` is the imaginary unit and ``pi`` is the circle constant.  Function
names are ``exp log sin cos sinh cosh sqrt conj re im``.  Chart variables
are real, so ``conj``, ``re`` and ``im`` act on coefficients.

Expressions evaluate either to :class:`~crforge.jet.Jet` values (given
coordinate jets) or to plain complex numbers through :mod:`cmath`; the
latter is the pointwise oracle used to cross-check jet derivatives.
"""

from __future__ import annotations

import cmath
import math
import re as _re
from dataclasses import dataclass, field

import numpy as np

from . import jet as _jet
from .errors import (
    ExprDomainError,
    ExprSyntaxError,
    SingularJetError,
    UnknownIdentifierError,
)
from .jet import Jet

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt", "conj", "re", "im")
CONSTANTS = {"i": 1j, "pi": math.pi}


# AST ------------------------------------------------------------------
@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Num(Node):
    value: complex
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Const(Node):
    name: str
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Var(Node):
    name: str
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg(Node):
    operand: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int
    span: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node
    span: tuple = field(default=(0, 0), compare=False, repr=False)


_BINARY = {"+": Add, "-": Sub, "*": Mul, "/": Div}
_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


# tokenizer ------------------------------------------------------------
@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER, NAME, OP, EOF
    text: str
    line: int
    column: int
    offset: int


_TOKEN_RE = _re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", line, column)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind.upper(), m.group(), line, column, pos))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1, pos))
    return tokens


# parser ---------------------------------------------------------------
class _Parser:
    def __init__(self, text: str, coordinates):
        self.tokens = tokenize(text)
        self.pos = 0
        self.coordinates = None if coordinates is None else tuple(coordinates)

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def fail(self, message, expected=()):
        t = self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ExprSyntaxError(f"{message}, found {found}", t.line, t.column, expected)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind != "OP":
            self.fail(f"expected {text!r}", (repr(text),))
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "EOF":
            self.fail("unexpected token", ("'+'", "'-'", "'*'", "'/'", "'^'", "end of input"))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = _BINARY[op](node, rhs, (node.span[0], rhs.span[1]))
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            op = self.advance().text
            rhs = self.unary()
            node = _BINARY[op](node, rhs, (node.span[0], rhs.span[1]))
        return node

    def unary(self) -> Node:
        if self.tok.kind == "OP" and self.tok.text in "+-":
            t = self.advance()
            operand = self.unary()
            if t.text == "+":
                return operand
            return Neg(operand, (t.column, operand.span[1]))
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "OP" and self.tok.text == "^":
            self.advance()
            exponent, end = self.exponent()
            return Pow(base, exponent, (base.span[0], end))
        return base

    def exponent(self) -> tuple[int, int]:
        t = self.tok
        if t.kind == "OP" and t.text == "-":
            self.advance()
            value, end = self.exponent()
            return -value, end
        if t.kind == "OP" and t.text == "(":
            self.advance()
            value, _ = self.exponent()
            close = self.expect(")")
            return value, close.column
        if t.kind == "NUMBER":
            self.advance()
            if not t.text.isdigit():
                raise ExprSyntaxError(
                    "exponent must be an integer", t.line, t.column, ("integer",)
                )
            value = int(t.text)
            if self.tok.kind == "OP" and self.tok.text == "^":
                self.advance()
                inner, end = self.exponent()
                if inner < 0:
                    raise ExprSyntaxError(
                        "exponent must be an integer", t.line, t.column, ("integer",)
                    )
                return value**inner, end
            return value, t.column + len(t.text) - 1
        self.fail("expected integer exponent", ("integer", "'-'", "'('"))

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            value = float(t.text)
            return Num(value, (t.column, t.column + len(t.text) - 1))
        if t.kind == "NAME":
            self.advance()
            span = (t.column, t.column + len(t.text) - 1)
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                close = self.expect(")")
                return Call(t.text, arg, (t.column, close.column))
            if self.coordinates is not None and t.text in self.coordinates:
                return Var(t.text, span)
            if t.text in CONSTANTS:
                return Const(t.text, span)
            if self.coordinates is None:
                return Var(t.text, span)
            raise UnknownIdentifierError(t.text, t.column, self.coordinates)
        if t.kind == "OP" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected an operand", ("number", "identifier", "function", "'('", "'-'"))


def parse_expr(text: str, coordinates=None) -> Node:
    """Parse ``text`` into an AST.

    When ``coordinates`` is given, every free identifier must be one of
    them (``i`` and ``pi`` stay reserved unless shadowed by a coordinate).
    """
    return _Parser(text, coordinates).parse()


# printing -------------------------------------------------------------
def _format_number(value) -> str:
    value = complex(value)
    if value.imag == 0:
        r = value.real
        if r == int(r) and abs(r) < 1e15:
            return str(int(r))
        return repr(r)
    return f"({_format_number(value.real)} + {_format_number(value.imag)}*i)"


def to_string(node: Node) -> str:
    """Canonical text form; ``to_string(parse_expr(to_string(a))) == to_string(a)``."""
    if isinstance(node, Num):
        return _format_number(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.operand)
        if _PREC.get(type(node.operand), 5) < _PREC[Neg]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = to_string(node.base)
        if _PREC.get(type(node.base), 5) <= _PREC[Pow] or (
            isinstance(node.base, Num) and (complex(node.base.value).imag or node.base.value.real < 0)
        ):
            base = f"({base})"
        exp_text = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"{base}^{exp_text}"
    prec = _PREC[type(node)]
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
    left = to_string(node.left)
    right = to_string(node.right)
    if _PREC.get(type(node.left), 5) < prec:
        left = f"({left})"
    # right operand of a left-associative chain needs parens at equal precedence
    if _PREC.get(type(node.right), 5) <= prec:
        right = f"({right})"
    return f"{left} {op} {right}"


def variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    out = set()
    for child in _children(node):
        out |= variables(child)
    return out


def _children(node):
    if isinstance(node, (Add, Sub, Mul, Div)):
        return (node.left, node.right)
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, Call):
        return (node.arg,)
    return ()


# evaluation -----------------------------------------------------------
def _jet_domain(fn, node):
    def wrapped(value):
        try:
            return fn(value)
        except SingularJetError as exc:
            raise ExprDomainError(f"{node.func}: {exc}", node.span) from exc

    return wrapped


def evaluate(node: Node, env: dict):
    """Evaluate ``node`` with variable bindings ``env``.

    Values in ``env`` are either jets (all sharing nvars) or numbers; the
    result type follows the bindings.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        if node.name in env:
            return env[node.name]
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnknownIdentifierError(node.name, node.span[0], sorted(env)) from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Add):
        return evaluate(node.left, env) + evaluate(node.right, env)
    if isinstance(node, Sub):
        return evaluate(node.left, env) - evaluate(node.right, env)
    if isinstance(node, Mul):
        return evaluate(node.left, env) * evaluate(node.right, env)
    if isinstance(node, Div):
        num = evaluate(node.left, env)
        den = evaluate(node.right, env)
        if _constant_term(den) == 0:
            raise ExprDomainError("division by a value vanishing at the point", node.span)
        return num / den
    if isinstance(node, Pow):
        base = evaluate(node.base, env)
        if node.exponent < 0 and _constant_term(base) == 0:
            raise ExprDomainError("negative power of a value vanishing at the point", node.span)
        if isinstance(base, Jet):
            return base**node.exponent
        return complex(base) ** node.exponent
    if isinstance(node, Call):
        arg = evaluate(node.arg, env)
        if isinstance(arg, Jet):
            return _call_jet(node, arg)
        return _call_scalar(node, complex(arg))
    raise TypeError(f"unknown node {node!r}")


def _constant_term(value):
    if isinstance(value, Jet):
        v = value.value
        return 0 if np.any(v == 0) else 1
    return value


def _call_jet(node: Call, arg: Jet) -> Jet:
    f = node.func
    if f == "conj":
        return arg.conj()
    if f == "re":
        return arg.real
    if f == "im":
        return arg.imag
    if f in ("log", "sqrt") and np.any(arg.value == 0):
        raise ExprDomainError(f"{f} of a value vanishing at the point", node.span)
    return _jet_domain(getattr(_jet, f), node)(arg)


def _call_scalar(node: Call, z: complex) -> complex:
    f = node.func
    if f == "conj":
        return z.conjugate()
    if f == "re":
        return complex(z.real)
    if f == "im":
        return complex(z.imag)
    if f in ("log", "sqrt") and z == 0:
        raise ExprDomainError(f"{f} of a value vanishing at the point", node.span)
    return getattr(cmath, f)(z)


def coordinate_env(coordinates, point, order: int = _jet.DEFAULT_ORDER, nvars=None) -> dict:
    xs = Jet.variables(point, order, nvars)
    return {name: xs[k] for k, name in enumerate(coordinates)}


def as_jet(value, nvars: int, order: int) -> Jet:
    if isinstance(value, Jet):
        return value
    return Jet.constant(value, nvars, order)


def eval_jet(node: Node, point, order: int = _jet.DEFAULT_ORDER, coordinates=None) -> Jet:
    """Taylor jet of an expression at a chart point.

    ``coordinates`` names the chart variables in order; by default the
    sorted free variables of ``node`` are used.
    """
    if isinstance(node, str):
        node = parse_expr(node, coordinates)
    if coordinates is None:
        coordinates = sorted(variables(node))
    point = np.asarray(point, dtype=float)
    if len(point) != len(coordinates):
        raise ValueError(
            f"point has {len(point)} entries but {len(coordinates)} coordinates are declared"
        )
    env = coordinate_env(coordinates, point, order)
    return as_jet(evaluate(node, env), len(coordinates), order)


def eval_scalar(node: Node, point, coordinates) -> complex:
    env = {name: complex(float(v)) for name, v in zip(coordinates, point)}
    return complex(evaluate(node, env))


class CompiledExpr:
    """An AST bound to a coordinate list, callable on coordinate jets or points."""

    def __init__(self, text_or_node, coordinates):
        self.coordinates = tuple(coordinates)
        if isinstance(text_or_node, str):
            self.text = text_or_node
            self.node = parse_expr(text_or_node, self.coordinates)
        else:
            self.node = text_or_node
            self.text = to_string(text_or_node)

    def __call__(self, xs: Jet) -> Jet:
        env = {name: xs[k] for k, name in enumerate(self.coordinates)}
        return as_jet(evaluate(self.node, env), xs.nvars, xs.order)

    def scalar(self, point) -> complex:
        return eval_scalar(self.node, point, self.coordinates)

    def __repr__(self):
        return f"CompiledExpr({self.text!r})"

    def __eq__(self, other):
        if not isinstance(other, CompiledExpr):
            return NotImplemented
        return self.coordinates == other.coordinates and to_string(self.node) == to_string(other.node)

    def __hash__(self):
        return hash((self.coordinates, to_string(self.node)))
