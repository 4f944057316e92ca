"""A small arithmetic expression language for spacing and radius formulas.

Grammar, loosest to tightest binding::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := number | name | name '(' args ')' | '(' sum ')'

``pi`` is the only named constant. Expressions are parsed into a tree of
frozen dataclasses which can be printed back to source, evaluated directly
by walking the tree, or lowered to a postfix program for the compiled
kernels.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "ExprSyntaxError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Node",
    "FUNCTIONS",
    "parse",
    "to_source",
    "evaluate",
    "variables_of",
    "compile_program",
]


class ExprSyntaxError(ValueError):
    """Raised for malformed expressions; ``offset`` is a 0-based column."""

    def __init__(self, message: str, offset: int, src: str = ""):
        self.offset = offset
        self.src = src
        super().__init__(f"{message} at offset {offset}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]

# opcodes shared with the compiled interpreter in _native.program
OP_CONST, OP_VAR, OP_NEG = 0, 1, 2
OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW = 3, 4, 5, 6, 7
BINARY_OPCODES = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}


def _arg(x: float, y: float) -> float:
    if x == 0.0 and y == 0.0:
        return 0.0
    return math.atan2(y, x)


# name -> (arity, opcode, python implementation)
FUNCTIONS: dict = {
    "sin": (1, 10, math.sin),
    "cos": (1, 11, math.cos),
    "tan": (1, 12, math.tan),
    "tanh": (1, 13, math.tanh),
    "sqrt": (1, 14, math.sqrt),
    "abs": (1, 15, abs),
    "exp": (1, 16, math.exp),
    "min": (2, 20, min),
    "max": (2, 21, max),
    "atan2": (2, 22, math.atan2),
    "arg": (2, 23, _arg),
    "hypot": (2, 24, math.hypot),
}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(src: str) -> list:
    toks = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        text = m.group(kind)
        toks.append(_Tok(kind, text, m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


_INFIX = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (40, 40)}
_UNARY_BP = 30


class _Parser:
    def __init__(self, src: str, variables: Sequence[str] | None):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.variables = None if variables is None else tuple(variables)

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, tok: _Tok, what: str | None = None):
        if what is None:
            what = "unexpected end of input" if tok.kind == "end" else f"unexpected token {tok.text!r}"
        raise ExprSyntaxError(what, tok.pos, self.src)

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.kind != "op" or tok.text != text:
            self.fail(tok, None if tok.kind == "end" else f"expected {text!r}, got {tok.text!r}")
        return tok

    def parse(self) -> Node:
        node = self.expr(0)
        tok = self.peek()
        if tok.kind != "end":
            self.fail(tok)
        return node

    def expr(self, min_bp: int) -> Node:
        lhs = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX:
                break
            lbp, rbp = _INFIX[tok.text]
            if lbp < min_bp:
                break
            self.next()
            # the exponent may carry its own sign: 2^-x
            rhs = self.expr(rbp) if tok.text != "^" else self.unary_or(rbp)
            lhs = BinOp(tok.text, lhs, rhs)
        return lhs

    def unary_or(self, bp: int) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.next()
            return Neg(self.expr(_UNARY_BP))
        return self.expr(bp)

    def prefix(self) -> Node:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expr(_UNARY_BP))
        if tok.kind == "op" and tok.text == "(":
            node = self.expr(0)
            self.expect(")")
            return node
        if tok.kind == "name":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                return self.call(tok)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text in FUNCTIONS:
                self.fail(tok, f"function {tok.text!r} used without arguments")
            if self.variables is not None and tok.text not in self.variables:
                self.fail(tok, f"unknown variable {tok.text!r}")
            return Var(tok.text)
        self.fail(tok)

    def call(self, name: _Tok) -> Node:
        if name.text not in FUNCTIONS:
            self.fail(name, f"unknown function {name.text!r}")
        self.expect("(")
        args = []
        if not (self.peek().kind == "op" and self.peek().text == ")"):
            args.append(self.expr(0))
            while self.peek().kind == "op" and self.peek().text == ",":
                self.next()
                args.append(self.expr(0))
        self.expect(")")
        arity = FUNCTIONS[name.text][0]
        if len(args) != arity:
            self.fail(name, f"{name.text}() takes {arity} argument(s), got {len(args)}")
        return Call(name.text, tuple(args))


def parse(src: str, variables: Sequence[str] | None = ("x", "y", "z")) -> Node:
    """Parse ``src`` into an expression tree.

    ``variables`` restricts the admissible free names; pass None to accept
    any identifier.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0, src)
    return _Parser(src, variables).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 3
    return 5


def to_source(node: Node) -> str:
    """Print ``node`` with the minimal parentheses needed to re-parse it."""
    if isinstance(node, Num):
        if not math.isfinite(node.value):
            raise ValueError(f"cannot print non-finite literal {node.value!r}")
        if node.value == math.pi:
            return "pi"
        text = repr(float(node.value))
        return f"-{text[1:]}" if text.startswith("-") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left = to_source(node.left)
    right = to_source(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < p:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def evaluate(node: Node, env: Mapping[str, float]) -> float:
    """Evaluate by walking the tree."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func][2]
        return float(fn(*(evaluate(a, env) for a in node.args)))
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    # IEEE pow like the compiled path: nan for a negative base with a
    # fractional exponent, where Python's ** would go complex
    with np.errstate(all="ignore"):
        return float(np.power(np.float64(a), np.float64(b)))


def variables_of(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables_of(node.operand)
    if isinstance(node, Call):
        return set().union(*(variables_of(a) for a in node.args))
    return variables_of(node.left) | variables_of(node.right)


MAX_STACK = 48


def compile_program(node: Node, variables: Sequence[str]) -> tuple:
    """Lower ``node`` to a postfix program ``(code, consts)``.

    ``code`` is an (n, 2) int64 array of (opcode, argument) pairs; variable
    arguments index into ``variables``.
    """
    slots = {name: i for i, name in enumerate(variables)}
    code: list = []
    consts: list = []
    depth = 0
    peak = 0

    def push(delta: int) -> None:
        nonlocal depth, peak
        depth += delta
        peak = max(peak, depth)

    def emit(n: Node) -> None:
        if isinstance(n, Num):
            code.append((OP_CONST, len(consts)))
            consts.append(n.value)
            push(1)
        elif isinstance(n, Var):
            if n.name not in slots:
                raise ValueError(f"variable {n.name!r} not among {tuple(variables)}")
            code.append((OP_VAR, slots[n.name]))
            push(1)
        elif isinstance(n, Neg):
            emit(n.operand)
            code.append((OP_NEG, 0))
        elif isinstance(n, Call):
            for a in n.args:
                emit(a)
            arity, opcode, _ = FUNCTIONS[n.func]
            code.append((opcode, 0))
            push(1 - arity)
        else:
            emit(n.left)
            emit(n.right)
            code.append((BINARY_OPCODES[n.op], 0))
            push(-1)

    emit(node)
    if peak > MAX_STACK:
        raise ValueError(f"expression needs a stack of {peak} (limit {MAX_STACK})")
    return np.array(code, dtype=np.int64).reshape(-1, 2), np.array(consts, dtype=np.float64)
