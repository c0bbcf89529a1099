"""A tiny arithmetic expression language for fields given in config files.

Grammar (usual precedence, ``^`` right-associative)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := ('+'|'-') unary | power
    power  := atom ('^' unary)?
    atom   := number | name | name '(' expr ')' | '(' expr ')'

Names are ``x1 .. xn`` (``x``, ``y``, ``z`` alias ``x1``, ``x2``, ``x3``), the
constants ``pi`` and ``e``, and the functions exp, log, sqrt, sin, cos, tan,
tanh, abs.  Compiled expressions are number-generic: they evaluate on float
arrays as well as on jets.
"""
from __future__ import annotations

import math
import re

import numpy as np

FUNCTIONS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
    "tan": np.tan, "tanh": np.tanh, "abs": np.abs,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
ALIASES = {"x": 1, "y": 2, "z": 3}

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(.))")


class ExpressionError(ValueError):
    pass


def _tokenize(text: str):
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(f"cannot tokenize {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            tokens.append(("name", name))
        elif op is not None and not op.isspace():
            if op not in "+-*/^()":
                raise ExpressionError(f"unexpected character {op!r} in {text!r}")
            tokens.append(("op", op))
        pos = m.end()
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        tok = self.take()
        if tok != ("op", op):
            raise ExpressionError(f"expected {op!r} in {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("const", val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if self.peek() == ("op", "("):
                if val not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r}")
                self.take()
                arg = self.expr()
                self.expect(")")
                return ("call", val, arg)
            if val in CONSTANTS:
                return ("const", CONSTANTS[val])
            idx = ALIASES.get(val)
            if idx is None and re.fullmatch(r"x\d+", val):
                idx = int(val[1:])
            if idx is None:
                raise ExpressionError(f"unknown name {val!r}")
            if not 1 <= idx <= self.dim:
                raise ExpressionError(f"variable {val!r} out of range for dimension {self.dim}")
            return ("var", idx - 1)
        raise ExpressionError(f"unexpected token {val!r} in {self.text!r}")


def _evaluate(node, x):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "var":
        return x[node[1]]
    if tag == "neg":
        return -_evaluate(node[1], x)
    if tag == "call":
        return FUNCTIONS[node[1]](_evaluate(node[2], x))
    a, b = _evaluate(node[1], x), _evaluate(node[2], x)
    if tag == "+":
        return a + b
    if tag == "-":
        return a - b
    if tag == "*":
        return a * b
    if tag == "/":
        return a / b
    if isinstance(b, float) and b.is_integer() and not isinstance(a, float):
        return a ** int(b)
    return a**b


class Expression:
    """Compiled expression; call with a point ``x`` (sequence of coordinates)."""

    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tree = _Parser(text, dim).parse()

    def __call__(self, x):
        out = _evaluate(self.tree, x)
        if isinstance(out, float):
            # constant expressions still broadcast over the batch
            ref = x[0]
            if isinstance(ref, np.ndarray) or np.ndim(ref):
                return np.full(np.shape(ref), out)
        return out

    def __repr__(self):
        return f"Expression({self.text!r}, dim={self.dim})"


def compile_expression(text, dim: int) -> Expression:
    if isinstance(text, (int, float)):
        text = repr(float(text))
    return Expression(str(text), dim)
