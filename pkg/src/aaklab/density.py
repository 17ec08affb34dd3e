"""Parser and evaluator for the density expression language.

Grammar::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := unary ("^" int)?
    unary  := "-" unary | atom
    atom   := number | "i" | "t" | ident "(" expr ")" | "(" expr ")"
    ident  := "exp" | "log" | "sin" | "cos" | "sqrt"

Expressions evaluate elementwise on complex numpy arrays. ``log`` and
``sqrt`` use their principal branches.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}

# functions with a branch cut along the negative real axis
_BRANCHED = ("log", "sqrt")


class DensitySyntaxError(ValueError):
    """Malformed density expression; ``pos`` is the 0-based offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class DensityEvaluationError(ValueError):
    pass


# -- expression tree --------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex

    def eval(self, t, probe=None):
        return np.full(np.shape(t), self.value, dtype=complex)

    def to_source(self) -> str:
        v = complex(self.value)
        if v.imag == 0:
            return _fmt(v.real)
        if v.real == 0:
            return f"({_fmt(v.imag)}*i)"
        return f"({_fmt(v.real)}+{_fmt(v.imag)}*i)"


@dataclass(frozen=True)
class Var:
    def eval(self, t, probe=None):
        return np.asarray(t, dtype=complex)

    def to_source(self) -> str:
        return "t"


@dataclass(frozen=True)
class Neg:
    arg: object

    def eval(self, t, probe=None):
        return -self.arg.eval(t, probe)

    def to_source(self) -> str:
        return f"(-{self.arg.to_source()})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def eval(self, t, probe=None):
        a = self.left.eval(t, probe)
        b = self.right.eval(t, probe)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b

    def to_source(self) -> str:
        return f"({self.left.to_source()}{self.op}{self.right.to_source()})"


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int

    def eval(self, t, probe=None):
        b = self.base.eval(t, probe)
        with np.errstate(divide="ignore", invalid="ignore"):
            return b ** self.exponent

    def to_source(self) -> str:
        return f"({self.base.to_source()}^{self.exponent})"


@dataclass(frozen=True)
class Call:
    name: str
    arg: object

    def eval(self, t, probe=None):
        a = self.arg.eval(t, probe)
        if probe is not None and self.name in _BRANCHED:
            probe.append((self.name, a))
        with np.errstate(divide="ignore", invalid="ignore"):
            return FUNCTIONS[self.name](a)

    def to_source(self) -> str:
        return f"{self.name}({self.arg.to_source()})"


def _fmt(x: float) -> str:
    s = repr(float(x))
    if "inf" in s or "nan" in s:
        raise DensityEvaluationError(f"non-finite literal {s}")
    return s


@dataclass(frozen=True)
class DensityExpr:
    """A parsed density together with its source text."""

    source: str
    tree: object

    def __call__(self, t):
        return self.tree.eval(np.asarray(t, dtype=complex))

    def to_source(self) -> str:
        return self.tree.to_source()

    def check_on(self, a: float, b: float, samples: int = 2049) -> np.ndarray:
        """Evaluate on a grid of ``[a, b]``, rejecting branch-cut crossings and non-finite values.

        Returns the sampled values.
        """
        t = np.linspace(a, b, samples)
        probe: list = []
        values = self.tree.eval(t.astype(complex), probe)
        if not np.all(np.isfinite(values)):
            bad = t[~np.isfinite(values)][0]
            raise DensityEvaluationError(f"density {self.source!r} is not finite at t={bad!r}")
        for name, arg in probe:
            arg = np.broadcast_to(arg, t.shape)
            scale = max(1.0, float(np.max(np.abs(arg))))
            on_cut = (arg.real <= 0) & (np.abs(arg.imag) <= 1e-14 * scale)
            if name == "log" and np.any(np.abs(arg) == 0):
                raise DensityEvaluationError(f"log(0) in {self.source!r}")
            if np.any(on_cut & (arg.real < 0)) or (name == "log" and np.any(on_cut)):
                bad = t[on_cut][0]
                raise DensityEvaluationError(
                    f"{name} argument on its branch cut at t={bad!r} in {self.source!r}")
            neg = arg.real < 0
            flips = np.sign(arg.imag[1:]) != np.sign(arg.imag[:-1])
            if np.any(flips & neg[1:] & neg[:-1]):
                raise DensityEvaluationError(f"{name} argument crosses its branch cut in {self.source!r}")
        return values


# -- parser -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))")


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise DensitySyntaxError(f"unexpected character {src[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise DensitySyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise DensitySyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.unary()
        if self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise DensitySyntaxError("exponent must be an integer", pos)
            node = Pow(node, sign * int(text))
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(complex(float(text)))
        if kind == "name":
            if text == "i":
                return Num(1j)
            if text == "t":
                return Var()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise DensitySyntaxError(f"unknown identifier {text!r}", pos)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise DensitySyntaxError(f"unexpected {text or 'end of input'!r}", pos)


def parse_density(src: str) -> DensityExpr:
    """Parse ``src`` into a :class:`DensityExpr`.

    Raises :class:`DensitySyntaxError` (with position) on malformed input or
    unknown identifiers.
    """
    return DensityExpr(src, _Parser(src).parse())
