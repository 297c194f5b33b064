"""Field expression language.

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := base ("^" factor)?
    base   := number | var | func "(" expr ")" | "(" expr ")" | "-" base
    var    := x | y | z | w | v        (the first d names)
    func   := sin | cos | exp | ln | sqrt

Expressions compile to jax.numpy functions of a d-vector; jets come from
nested forward-mode differentiation (see `jaxutils.second_order_jet`).
"""

import re
from typing import NamedTuple

import jax.numpy as jnp
import numpy as np

from . import errors
from . import fields
from . import jaxutils

VARIABLES = ("x", "y", "z", "w", "v")
FUNCTIONS = {
    "sin": jnp.sin,
    "cos": jnp.cos,
    "exp": jnp.exp,
    "ln": jnp.log,
    "sqrt": jnp.sqrt,
}
TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


class Token(NamedTuple):
    kind: str
    text: str
    offset: int


class Num(NamedTuple):
    value: float
    integral: bool

    def build(self):
        value = self.value
        return lambda x: jnp.asarray(value, jaxutils.COMPUTE_DTYPE)


class Var(NamedTuple):
    index: int

    def build(self):
        index = self.index
        return lambda x: x[index]


class Neg(NamedTuple):
    operand: object

    def build(self):
        inner = self.operand.build()
        return lambda x: -inner(x)


class Call(NamedTuple):
    name: str
    operand: object

    def build(self):
        fn, inner = FUNCTIONS[self.name], self.operand.build()
        return lambda x: fn(inner(x))


class BinOp(NamedTuple):
    op: str
    left: object
    right: object

    def build(self):
        lhs = self.left.build()
        if self.op == "^" and isinstance(self.right, Num) and self.right.integral:
            power = int(self.right.value)
            return lambda x: lhs(x) ** power  # lax.integer_pow, exact at 0.
        rhs = self.right.build()
        return {
            "+": lambda x: lhs(x) + rhs(x),
            "-": lambda x: lhs(x) - rhs(x),
            "*": lambda x: lhs(x) * rhs(x),
            "/": lambda x: lhs(x) / rhs(x),
            "^": lambda x: jnp.power(lhs(x), rhs(x)),
        }[self.op]


def tokenize(text):
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = TOKEN.match(text, pos)
        if not match:
            offset = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise errors.FieldSyntaxError(f"unexpected character '{text[offset]}'", offset, text)
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class Parser:

    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self.tokens = tokenize(text)
        self.pos = 0
        self.used = set()

    def parse(self):
        node = self.expr()
        token = self.peek()
        if token.kind != "end":
            self.fail(f"unexpected '{token.text}'", token)
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek().text == "^":
            self.advance()
            node = BinOp("^", node, self.factor())
        return node

    def base(self):
        token = self.advance()
        if token.kind == "number":
            value = float(token.text)
            integral = re.fullmatch(r"\d+", token.text) is not None
            return Num(value, integral)
        if token.text == "-":
            return Neg(self.base())
        if token.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if token.kind == "name":
            if token.text in FUNCTIONS:
                self.expect("(")
                node = self.expr()
                self.expect(")")
                return Call(token.text, node)
            if token.text in VARIABLES:
                index = VARIABLES.index(token.text)
                if index >= self.dim:
                    self.fail(
                        f"variable '{token.text}' needs dimension {index + 1} but d = {self.dim}",
                        token,
                    )
                self.used.add(token.text)
                return Var(index)
            self.fail(f"unknown identifier '{token.text}'", token)
        if token.kind == "end":
            self.fail("unexpected end of expression", token)
        self.fail(f"unexpected '{token.text}'", token)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        token = self.tokens[self.pos]
        if token.kind != "end":
            self.pos += 1
        return token

    def expect(self, text):
        token = self.advance()
        if token.text != text:
            found = token.text or "end of expression"
            self.fail(f"expected '{text}' but found '{found}'", token)
        return token

    def fail(self, message, token):
        raise errors.FieldSyntaxError(message, token.offset, self.text)


class ParsedField(fields.ScalarField):

    def __init__(self, text, tree, dim, box=None):
        super().__init__(dim, box, text)
        self.text = text
        self.tree = tree
        fn = tree.build()
        self._value = jaxutils.batched(fn)
        self._jets = jaxutils.batched(jaxutils.second_order_jet(fn))

    def value(self, points):
        points = np.asarray(points, np.float64)
        if len(points) == 0:
            return np.zeros(0)
        return self._value(points)

    def jets(self, points):
        points = np.asarray(points, np.float64)
        if len(points) == 0:
            d = self.dim
            return fields.JetBatch(np.zeros(0), np.zeros((0, d)), np.zeros((0, d, d)))
        return fields.JetBatch(*self._jets(points))


def parse_field(text, dim=3, box=None):
    if dim not in (3, 4, 5):
        raise errors.UnsupportedDimensionError(f"Parsed fields support d in {{3, 4, 5}}, got {dim}.")
    tree = Parser(text, dim).parse()
    return ParsedField(text, tree, dim, box)
