"""
Potentials on the unit tangent bundle, as seen along closed-geodesic axes.

Three kinds are supported:
  constant(c)      W = c everywhere
  sbr(coef)        coef times the unstable-expansion rate, which is the
                   constant n on a hyperbolic (n+1)-manifold
  expression(src)  a formula in the half-plane coordinates (x, y)

Expressions are parsed by a small recursive-descent parser:

  expr   := term (('+' | '-') term)*
  term   := unary (('*' | '/') unary)*
  unary  := ('+' | '-') unary | power
  power  := atom ('^' unary)?
  atom   := number | name | name '(' expr ')' | '(' expr ')'

so '^' binds tighter than unary minus and is right-associative.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParseError, UnknownIdentifier

FUNCTIONS: Dict[str, Callable] = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS: Dict[str, float] = {"pi": math.pi}
COORDINATES = ("x", "y")

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class Var:
    name: str

    def eval(self, env):
        return env[self.name]


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def eval(self, env):
        return -self.operand.eval(env)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return np.divide(a, b)
        return np.power(a, b)


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"

    def eval(self, env):
        return FUNCTIONS[self.name](self.arg.eval(env))


Node = Union[Num, Var, Neg, BinOp, Call]


def _has_variables(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, Neg):
        return _has_variables(node.operand)
    if isinstance(node, Call):
        return _has_variables(node.arg)
    return _has_variables(node.left) or _has_variables(node.right)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _tokenize(src: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            bad = len(src) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: Sequence[str]):
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op: str):
        kind, text, pos = self.take()
        if kind != "op" or text != op:
            raise ParseError(f"expected '{op}', found {text or 'end of input'!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text in "+-":
            self.take()
            operand = self.unary()
            return Neg(operand) if text == "-" else operand
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in self.variables:
                return Var(text)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            raise UnknownIdentifier(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse_expression(src: str, variables: Sequence[str] = COORDINATES) -> Node:
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    return _Parser(src, variables).parse()


def evaluate_expression(src: str, params: Dict[str, float]) -> float:
    """Evaluate a scalar formula such as '4*(1+alpha)' with named parameters."""
    value = float(parse_expression(src, tuple(params)).eval(params))
    if not math.isfinite(value):
        raise ParseError(f"expression {src!r} is not finite for {params}", 0)
    return value


# ---------------------------------------------------------------------------
# Potential specs
# ---------------------------------------------------------------------------

class PotentialKind(str, Enum):
    CONSTANT = "constant"
    SBR = "sbr"
    EXPRESSION = "expression"


@dataclass(frozen=True)
class PotentialSpec:
    kind: PotentialKind
    value: float = 0.0
    source: str = ""
    tree: Optional[Node] = None

    def evaluate(self, x, y):
        """Pointwise value at half-plane coordinates; only constant and expression kinds have one."""
        if self.kind is PotentialKind.CONSTANT:
            return np.full(np.shape(np.asarray(x)), self.value, dtype=float)
        if self.kind is PotentialKind.EXPRESSION:
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            out = self.tree.eval({"x": x, "y": y})
            return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)
        raise TypeError("the SBR potential is defined by the flow, not by coordinates")

    def describe(self) -> str:
        if self.kind is PotentialKind.CONSTANT:
            return f"const:{self.value:g}"
        if self.kind is PotentialKind.SBR:
            return f"sbr:{self.value:g}"
        return f"expr:{self.source}"


def constant_potential(c: float) -> PotentialSpec:
    return PotentialSpec(PotentialKind.CONSTANT, float(c), source=repr(float(c)))


def sbr_potential(coefficient: float = 1.0) -> PotentialSpec:
    return PotentialSpec(PotentialKind.SBR, float(coefficient), source=f"sbr:{coefficient!r}")


def parse_potential(src: str) -> PotentialSpec:
    tree = parse_expression(src, COORDINATES)
    if not _has_variables(tree):
        value = float(tree.eval({}))
        if not math.isfinite(value):
            raise ParseError(f"constant potential {src!r} is not finite", 0)
        return PotentialSpec(PotentialKind.CONSTANT, value, source=src)
    return PotentialSpec(PotentialKind.EXPRESSION, 0.0, source=src, tree=tree)


def potential_from_cli(text: str) -> PotentialSpec:
    """'const:-0.5', 'sbr:-0.5' or 'expr:sin(x)/(1+y^2)'; a bare formula is an expression."""
    kind, sep, rest = text.partition(":")
    if not sep:
        return parse_potential(text)
    kind = kind.strip().lower()
    if kind in ("const", "constant"):
        return constant_potential(evaluate_expression(rest, {}))
    if kind == "sbr":
        return sbr_potential(evaluate_expression(rest, {}) if rest.strip() else 1.0)
    if kind in ("expr", "expression"):
        return parse_potential(rest)
    raise ParseError(f"unknown potential kind '{kind}'", 0)
