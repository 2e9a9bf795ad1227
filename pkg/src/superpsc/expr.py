"""Defining-function expressions over the real coordinates of C^n.

Coordinates are ordered ``(x1, y1, x2, y2, ..., xn, yn)`` with ``z_j = x_j + i y_j``.
The grammar is a small arithmetic language::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-"? atom ("^" INT)?
    atom   := NUMBER | "x" INT | "y" INT | "re(z" INT ")" | "im(z" INT ")"
            | "abs2(z" INT ")" | "bump(" expr "," NUMBER ")" | "(" expr ")"

``bump(t, d)`` is the flat cutoff ``exp(-d / (d - t))`` for ``t < d`` and ``0``
otherwise.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Const", "Var", "Neg", "BinOp", "Pow", "Bump", "ExprAst", "DomainSpec",
    "ParseError", "EvaluationError", "parse", "evaluate", "to_source",
    "bump_value", "builtin", "BUILTIN_NAMES", "EXAMPLE51_DELTA",
]

EXAMPLE51_DELTA = 4.0 ** -12


class ParseError(ValueError):
    """Syntax or semantic error in a defining-function source string."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvaluationError(ArithmeticError):
    pass


# --------------------------------------------------------------------- nodes

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based real coordinate: x_j -> 2(j-1), y_j -> 2(j-1)+1


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Bump:
    arg: object
    delta: float


Node = Const | Var | Neg | BinOp | Pow | Bump


@dataclass(frozen=True)
class ExprAst:
    """A parsed expression together with its complex dimension."""

    root: Node
    n: int
    source: str = field(default="", compare=False)

    @property
    def dim(self) -> int:
        return 2 * self.n

    def __call__(self, point) -> np.ndarray:
        return evaluate(self, point)

    def to_source(self) -> str:
        return to_source(self.root)


# -------------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)
_COORD = re.compile(r"([xyz])(\d+)$")


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, n: int):
        self.source = source
        self.n = n
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value: str | None = None, kind: str | None = None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok[2])
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.factor())
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.peek()
            if kind != "num":
                raise ParseError("exponent must be a positive integer", pos)
            self.take()
            if not text.isdigit():
                raise ParseError(f"non-integer exponent {text!r}", pos)
            exponent = int(text)
            if exponent < 1:
                raise ParseError("exponent must be >= 1", pos)
            node = Pow(node, exponent)
        return node

    def _coord(self, text: str, pos: int, letters: str) -> int:
        m = _COORD.match(text)
        if m is None or m.group(1) not in letters:
            raise ParseError(f"expected coordinate, found {text!r}", pos)
        j = int(m.group(2))
        if not 1 <= j <= self.n:
            raise ParseError(f"coordinate index {j} out of range 1..{self.n}", pos)
        return j

    def atom(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "num":
            self.take()
            return Const(float(text))
        if text == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if kind != "name":
            raise ParseError(f"unexpected token {text or 'end of input'!r}", pos)
        self.take()
        if text in ("re", "im", "abs2"):
            self.take("(")
            _, ztext, zpos = self.take(kind="name")
            j = self._coord(ztext, zpos, "z")
            self.take(")")
            x, y = Var(2 * (j - 1)), Var(2 * (j - 1) + 1)
            if text == "re":
                return x
            if text == "im":
                return y
            return BinOp("+", Pow(x, 2), Pow(y, 2))
        if text == "bump":
            self.take("(")
            arg = self.expr()
            self.take(",")
            _, dtext, dpos = self.take(kind="num")
            delta = float(dtext)
            if not delta > 0:
                raise ParseError("bump width must be positive", dpos)
            self.take(")")
            return Bump(arg, delta)
        j = self._coord(text, pos, "xy")
        return Var(2 * (j - 1) + (text[0] == "y"))


def parse(source: str, n: int) -> ExprAst:
    """Parse ``source`` as an expression over C^n."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return ExprAst(_Parser(source, n).parse(), n, source)


# ------------------------------------------------------------ pretty printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(node: Node, parent: int = 0) -> str:
    """Render a node back into parseable source."""
    if isinstance(node, ExprAst):
        node = node.root
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 else text
    if isinstance(node, Var):
        j, is_y = divmod(node.index, 2)
        return f"{'y' if is_y else 'x'}{j + 1}"
    if isinstance(node, Neg):
        inner = "-" + to_source(node.operand, 3)
        return f"({inner})" if parent > 0 else inner
    if isinstance(node, Pow):
        return f"{to_source(node.base, 4)}^{node.exponent}"
    if isinstance(node, Bump):
        return f"bump({to_source(node.arg)}, {node.delta!r})"
    prec = _PREC[node.op]
    left = to_source(node.left, prec)
    # right operand of - and / needs parentheses at equal precedence
    right = to_source(node.right, prec + (node.op in "-/"))
    text = f"{left} {node.op} {right}"
    return f"({text})" if prec < parent else text


# ---------------------------------------------------------------- evaluation

def bump_value(t, delta: float):
    """Flat cutoff ``exp(-delta/(delta - t))`` for ``t < delta``, zero beyond."""
    t = np.asarray(t, dtype=float)
    inside = t < delta
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.exp(-delta / np.where(inside, delta - t, 1.0))
    return np.where(inside, out, 0.0)


def fold(node: Node, var: Callable, const: Callable, bump: Callable, on_divide=None):
    """Evaluate ``node`` in any algebra supporting ``+ - *`` and ``/``.

    ``var(index)`` and ``const(value)`` build leaves, ``bump(value, delta)``
    handles the cutoff primitive.  ``on_divide(denominator, node)`` may raise
    before a division takes place.
    """
    def rec(nd):
        if isinstance(nd, Const):
            return const(nd.value)
        if isinstance(nd, Var):
            return var(nd.index)
        if isinstance(nd, Neg):
            return -rec(nd.operand)
        if isinstance(nd, Pow):
            base = rec(nd.base)
            out = base
            for _ in range(nd.exponent - 1):
                out = out * base
            return out
        if isinstance(nd, Bump):
            return bump(rec(nd.arg), nd.delta)
        a, b = rec(nd.left), rec(nd.right)
        if nd.op == "+":
            return a + b
        if nd.op == "-":
            return a - b
        if nd.op == "*":
            return a * b
        if on_divide is not None:
            on_divide(b, nd)
        return a / b
    return rec(node)


def _check_denominator(value, node):
    if np.any(np.asarray(value) == 0):
        raise EvaluationError(f"division by zero in '{to_source(node)}'")


def evaluate(ast: ExprAst, point) -> np.ndarray:
    """Value of ``ast`` at ``point`` (shape ``(..., 2n)``)."""
    point = np.asarray(point, dtype=float)
    if point.shape[-1] != ast.dim:
        raise ValueError(f"point has {point.shape[-1]} coordinates, expected {ast.dim}")
    return fold(
        ast.root,
        var=lambda k: point[..., k],
        const=lambda v: np.full(point.shape[:-1], v),
        bump=bump_value,
        on_divide=_check_denominator,
    )


# ------------------------------------------------------------------- domains

@dataclass(frozen=True)
class DomainSpec:
    """A bounded domain ``{r < 0}`` with a known interior point.

    ``box`` is the half-width of the cube around ``interior_point`` that
    contains the domain; boundary sampling never looks past it.
    """

    name: str
    n: int
    ast: ExprAst
    parameters: dict
    interior_point: np.ndarray
    box: float

    def __post_init__(self):
        if self.ast.n != self.n:
            raise ValueError("dimension mismatch between domain and expression")
        if not evaluate(self.ast, self.interior_point) < 0:
            raise ValueError(f"{self.name}: interior point does not satisfy r < 0")

    @property
    def dim(self) -> int:
        return 2 * self.n

    def r(self, point) -> np.ndarray:
        return evaluate(self.ast, point)


BUILTIN_NAMES = ("ball", "ellipsoid", "example51", "example52", "disc_perturbed")


def example52_cmax(alpha: float) -> float:
    """Largest admissible quartic coefficient for the second counterexample."""
    return (9 - 8 * alpha) * (1 + alpha) / 256


def _num(v: float) -> str:
    return repr(float(v))


def _as_list(value, n: int, name: str) -> list[float]:
    if isinstance(value, str):
        value = [float(v) for v in value.split(",")]
    if np.isscalar(value):
        value = [float(value)] * n
    value = [float(v) for v in value]
    if len(value) != n:
        raise ValueError(f"{name} needs {n} entries, got {len(value)}")
    return value


def builtin(name: str, **parameters) -> DomainSpec:
    """Construct one of the built-in corpus domains.

    ``ball``          unit ball, parameter ``n`` (default 2)
    ``ellipsoid``     ``sum a_j x_j^2 + b_j y_j^2 - 1``; ``n``, ``a`` (default 2,1,..),
                      ``b`` (default all ones)
    ``example51``     strictly convex domain in C^2 built with the flat cutoff
    ``example52``     non-convex domain in C^n; ``n`` (default 2), ``alpha``
                      (default 21/20) and ``C`` (default the largest admissible)
    ``disc_perturbed`` unit disc with an inward dimple near z=1; ``depth``, ``width``
    """
    params = dict(parameters)
    if name == "ball":
        n = int(params.pop("n", 2))
        _reject_extra(name, params)
        src = " + ".join(f"abs2(z{j})" for j in range(1, n + 1)) + " - 1"
        return DomainSpec(name, n, parse(src, n), {"n": n}, np.zeros(2 * n), 1.5)

    if name == "ellipsoid":
        n = int(params.pop("n", 2))
        a = _as_list(params.pop("a", [2.0] + [1.0] * (n - 1)), n, "a")
        b = _as_list(params.pop("b", 1.0), n, "b")
        _reject_extra(name, params)
        if min(a + b) <= 0:
            raise ValueError("ellipsoid coefficients must be positive")
        terms = [f"{_num(a[j])}*x{j + 1}^2 + {_num(b[j])}*y{j + 1}^2" for j in range(n)]
        src = " + ".join(terms) + " - 1"
        box = 1.5 / math.sqrt(min(a + b))
        return DomainSpec(name, n, parse(src, n), {"n": n, "a": a, "b": b}, np.zeros(2 * n), box)

    if name == "example51":
        _reject_extra(name, params)
        d = _num(EXAMPLE51_DELTA)
        src = f"-2*re(z2) + abs2(z1) + abs2(z2) - 8*abs2(z1)^2*bump(abs2(z1), {d})"
        p = np.array([0.0, 0.0, 0.5, 0.0])
        return DomainSpec(name, 2, parse(src, 2), {"delta": EXAMPLE51_DELTA}, p, 2.5)

    if name == "example52":
        n = int(params.pop("n", 2))
        alpha = float(params.pop("alpha", 21 / 20))
        cmax = example52_cmax(alpha)
        C = float(params.pop("C", cmax))
        _reject_extra(name, params)
        if n < 2:
            raise ValueError("example52 needs n >= 2")
        if not 1 < alpha < 9 / 8:
            raise ValueError(f"example52 needs 1 < alpha < 9/8, got {alpha}")
        if not 0 < C <= cmax:
            raise ValueError(f"example52 needs 0 < C <= (9-8a)(1+a)/256 = {cmax}, got {C}")
        zs = range(1, n + 1)
        src = (
            " + ".join(f"abs2(z{j})" for j in zs)
            + f" + 2*re(z{n})"
            + f" + {_num(alpha)}*(" + " + ".join(f"re(z{j})^2 - im(z{j})^2" for j in zs) + ")"
            + f" + {_num(C)}*(" + " + ".join(f"abs2(z{j})^2" for j in zs) + ")"
        )
        p = np.zeros(2 * n)
        p[2 * (n - 1)] = -0.5
        box = math.sqrt((alpha - 1) / C) + 2.0
        return DomainSpec(name, n, parse(src, n), {"n": n, "alpha": alpha, "C": C}, p, box)

    if name == "disc_perturbed":
        depth = float(params.pop("depth", 0.5))
        width = float(params.pop("width", 0.09))
        _reject_extra(name, params)
        if not 0 < depth < 1 or not 0 < width < 0.25:
            raise ValueError("disc_perturbed needs 0 < depth < 1 and 0 < width < 0.25")
        src = f"abs2(z1) - 1 + {_num(depth)}*bump((x1 - 1)^2 + y1^2, {_num(width)})"
        return DomainSpec(name, 1, parse(src, 1), {"depth": depth, "width": width}, np.zeros(2), 1.5)

    raise ValueError(f"unknown builtin domain {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def _reject_extra(name: str, params: dict) -> None:
    if params:
        raise ValueError(f"{name}: unexpected parameters {sorted(params)}")


def from_expression(source: str, n: int, interior_point=None, box: float = 2.0,
                    name: str = "expr") -> DomainSpec:
    """Wrap a user expression as a domain (interior point defaults to the origin)."""
    ast = parse(source, n)
    p = np.zeros(2 * n) if interior_point is None else np.asarray(interior_point, dtype=float)
    return DomainSpec(name, n, ast, {"source": source}, p, box)
