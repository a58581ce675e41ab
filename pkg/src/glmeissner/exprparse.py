"""Tiny arithmetic-expression parser for custom applied-field components.

Grammar: numbers, the variables x y z, + - * / ^ (also the unicode
multiply/divide glyphs), parentheses, unary sign, and the functions
sin cos sinh cosh exp sqrt.  Parsing yields a callable evaluating on
numpy arrays; errors report the offending position.
"""

import re

import numpy as np

from .errors import ParseError

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
    "sqrt": np.sqrt,
}
_VARS = ("x", "y", "z")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()×÷]))"
)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r} at position {pos}")
        if m.group("num") is not None:
            out.append(("num", float(m.group("num")), m.start()))
        elif m.group("name") is not None:
            out.append(("name", m.group("name"), m.start()))
        else:
            op = m.group("op")
            op = {"×": "*", "÷": "/"}.get(op, op)
            out.append(("op", op, m.start()))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, tokens, text):
        self.toks = tokens
        self.i = 0
        self.text = text

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r} at position {pos} in {self.text!r}")

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input at position {pos} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                node = ("add" if val == "+" else "sub", node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.factor()
                node = ("mul" if val == "*" else "div", node, rhs)
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.factor()
            return inner if val == "+" else ("neg", inner)
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exponent = self.factor()   # right-associative, unary signs allowed
            return ("pow", base, exponent)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("const", val)
        if kind == "name":
            if val in _VARS:
                return ("var", val)
            if val in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", val, arg)
            raise ParseError(f"unknown identifier {val!r} at position {pos}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token at position {pos} in {self.text!r}")


def _evaluate(node, env):
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_evaluate(node[1], env)
    if op == "call":
        return _FUNCS[node[1]](_evaluate(node[2], env))
    a = _evaluate(node[1], env)
    b = _evaluate(node[2], env)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "pow":
        return a**b
    raise ParseError(f"bad node {op!r}")


def compile_expression(text):
    """Parse an expression of x, y, z into a callable f(x, y, z)."""
    tree = _Parser(_tokenize(text), text).parse()

    def f(x, y, z):
        return np.broadcast_arrays(
            _evaluate(tree, {"x": x, "y": y, "z": z}), x + y + z
        )[0].astype(float)

    return f
