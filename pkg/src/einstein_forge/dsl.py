"""Textual description of scalar expressions and metrics.

Expressions use the usual arithmetic grammar with ``^`` for powers (binding
tighter than unary minus, right associative) and calls to ``sin cos sinh
cosh tanh exp log sqrt pow abs``.  The constant ``pi`` is predefined.

Metric grammar::

    node := "diag(" coords ";" signs ";" exprs ")"
          | "sym(" coords ";" exprs ")"              upper triangle, row major
          | "product(" node "," node ")"
          | "warped(" node "," expr "," node ")"     base + warp^2 * fibre
          | "conformal(" expr "," node ")"           expr^2 * node
          | "sphere(" n [";" sign] ")" | "hyperbolic(" n [";" sign] ")"
          | "flat(" n [";" signs] ")" | "ppwave(H=" expr ")"
          | "catalog(" name ")"

``diag`` coefficients are the metric entries themselves (``g_ii = sign_i *
expr_i``); the warp and conformal expressions are squared.  Coordinates of the
right factor of ``product`` (and of the fibre of ``warped``) are renamed with
a numeric suffix ``_2``, ``_3``, ... when they collide with names already in
use.

A JSON envelope ``{"metric": "<text>", "domain": {"t": [lo, hi], ...}}`` is
accepted anywhere metric text is.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParseError, SingularMetricError
from .jets import ELEMENTARY, Jet2, jet_apply, jet_apply_derivs, lift_point

__all__ = [
    "Num",
    "Sym",
    "BinOp",
    "Neg",
    "Call",
    "UnivariateFunction",
    "parse_expr",
    "print_expr",
    "evaluate_expr",
    "expr_symbols",
    "MetricSpec",
    "parse_metric",
    "print_metric",
    "evaluate_metric",
    "metric_arrays",
    "metric_values",
]

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "pow", "abs")
CONSTANTS = {"pi": math.pi}

# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple
    impl: "UnivariateFunction | None" = field(default=None, compare=False, repr=False)


Expr = Num | Sym | BinOp | Neg | Call


class UnivariateFunction:
    """A named scalar function of one variable supplied as value and two derivatives.

    ``derivs(v)`` must return ``(f(v), f'(v), f''(v))`` for an array ``v``.
    Used to splice numerically integrated profiles into metric expressions.
    """

    def __init__(self, name: str, derivs: Callable):
        self.name = name
        self.derivs = derivs

    def __call__(self, v):
        return self.derivs(np.asarray(v, dtype=float))[0]

    def __repr__(self) -> str:
        return f"UnivariateFunction({self.name!r})"


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),;=])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    pos: int
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            for k, ch in enumerate(chunk):
                if ch == "\n":
                    line += 1
                    line_start = pos + k + 1
        else:
            tokens.append(Token(kind, m.group(), pos, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("end", "", pos, line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, functions: Mapping[str, UnivariateFunction] | None = None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.functions = dict(functions or {})

    # -- token helpers --
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "ident") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("op", "ident"):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def expect_end(self) -> None:
        if self.tok.kind != "end":
            raise self.error(f"unexpected trailing input {self.tok.text!r}")

    # -- expressions --
    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.tok.text == "(" and self.tok.kind == "op":
                return self.call(tok)
            return Sym(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        found = tok.text or "end of input"
        raise self.error(f"expected an expression, found {found!r}")

    def call(self, name_tok: Token) -> Expr:
        name = name_tok.text
        impl = None
        if name not in FUNCTIONS:
            impl = self.functions.get(name)
            if impl is None:
                raise self.error(f"unknown function {name!r}", name_tok)
        self.expect("(")
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        want = 2 if name == "pow" else 1
        if len(args) != want:
            raise self.error(f"{name} takes {want} argument(s), got {len(args)}", name_tok)
        return Call(name, tuple(args), impl)


def parse_expr(
    text: str,
    coords: Iterable[str] | None = None,
    functions: Mapping[str, UnivariateFunction] | None = None,
) -> Expr:
    """Parse an arithmetic expression; if ``coords`` is given, free symbols are checked."""
    p = _Parser(text, functions)
    e = p.expr()
    p.expect_end()
    if coords is not None:
        _check_symbols(e, set(coords), p.tokens[0])
    return e


def expr_symbols(e: Expr) -> set[str]:
    if isinstance(e, Sym):
        return set() if e.name in CONSTANTS else {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return expr_symbols(e.operand)
    if isinstance(e, BinOp):
        return expr_symbols(e.left) | expr_symbols(e.right)
    out: set[str] = set()
    for a in e.args:
        out |= expr_symbols(a)
    return out


def _check_symbols(e: Expr, allowed: set[str], tok: Token) -> None:
    unknown = sorted(expr_symbols(e) - allowed)
    if unknown:
        raise ParseError(
            f"unknown coordinate(s) {', '.join(unknown)}; chart has {sorted(allowed)}",
            tok.line,
            tok.col,
        )


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 0
    return 5


def _wrap(e: Expr, min_prec: int) -> str:
    s = print_expr(e)
    return f"({s})" if _prec(e) < min_prec else s


def print_expr(e: Expr) -> str:
    """Print an expression with the minimal parentheses needed to re-parse it."""
    if isinstance(e, Num):
        return _fmt_num(e.value) if _prec(e) else f"({_fmt_num(e.value)})"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, 3)
    if isinstance(e, Call):
        return f"{e.fn}(" + ", ".join(print_expr(a) for a in e.args) + ")"
    if e.op in "+-":
        return f"{_wrap(e.left, 1)} {e.op} {_wrap(e.right, 2)}"
    if e.op in "*/":
        return f"{_wrap(e.left, 2)}{e.op}{_wrap(e.right, 3)}"
    return f"{_wrap(e.left, 5)}^{_wrap(e.right, 3)}"


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_NUMPY_FN = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


def _power(base, exponent):
    if isinstance(base, Jet2) or isinstance(exponent, Jet2):
        if not isinstance(base, Jet2):
            return float(base) ** exponent if np.ndim(base) == 0 else Jet2.constant(base, exponent.dim, np.shape(base)) ** exponent
        return base**exponent
    with np.errstate(all="ignore"):
        out = np.power(np.asarray(base, dtype=float), exponent)
    if not np.all(np.isfinite(out)):
        raise DomainError("power undefined", function="pow", value=float(np.ravel(base)[0]))
    return out


def _apply(fn: str, x, impl: UnivariateFunction | None):
    if impl is not None:
        if isinstance(x, Jet2):
            return jet_apply_derivs(impl.derivs, x, impl.name)
        return impl.derivs(np.asarray(x, dtype=float))[0]
    if isinstance(x, Jet2):
        return jet_apply(fn, x)
    x = np.asarray(x, dtype=float)
    guard = {"log": x <= 0, "sqrt": x < 0}.get(fn)
    if guard is not None and np.any(guard):
        raise DomainError(f"{fn} undefined", function=fn, value=float(x[guard].flat[0]))
    with np.errstate(all="ignore"):
        return _NUMPY_FN[fn](x)


def evaluate_expr(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e`` with coordinate values from ``env`` (floats, arrays or jets)."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        try:
            return env[e.name]
        except KeyError:
            if e.name in CONSTANTS:
                return CONSTANTS[e.name]
            raise DomainError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Neg):
        return -evaluate_expr(e.operand, env)
    if isinstance(e, BinOp):
        a = evaluate_expr(e.left, env)
        b = evaluate_expr(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if not isinstance(b, Jet2):
                if np.any(np.asarray(b) == 0):
                    raise DomainError("division by zero", function="recip", value=0.0)
                return a / b
            return a / b
        return _power(a, b)
    if e.fn == "pow":
        return _power(evaluate_expr(e.args[0], env), evaluate_expr(e.args[1], env))
    return _apply(e.fn, evaluate_expr(e.args[0], env), e.impl)


def rename_expr(e: Expr, mapping: Mapping[str, str]) -> Expr:
    if not mapping:
        return e
    if isinstance(e, Sym):
        return Sym(mapping.get(e.name, e.name))
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(rename_expr(e.operand, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, rename_expr(e.left, mapping), rename_expr(e.right, mapping))
    return Call(e.fn, tuple(rename_expr(a, mapping) for a in e.args), e.impl)


# ---------------------------------------------------------------------------
# Metric nodes
# ---------------------------------------------------------------------------

# Default coordinate box used when neither catalog nor envelope supplies one.
_ANGLE = (0.2, math.pi - 0.2)


class Node:
    """Base class of metric tree nodes.  ``entries`` returns the upper triangle."""

    coords: tuple[str, ...]
    defaults: tuple[tuple[float, float], ...]

    @property
    def dim(self) -> int:
        return len(self.coords)

    def entries(self, xs: Sequence) -> dict:
        raise NotImplementedError

    def text(self) -> str:
        raise NotImplementedError


def _env(coords: Sequence[str], xs: Sequence) -> dict:
    return dict(zip(coords, xs))


def _fmt_sign(s: int) -> str:
    return "+1" if s > 0 else "-1"


@dataclass(frozen=True, eq=True)
class Diag(Node):
    coords: tuple
    signs: tuple
    coeffs: tuple

    @property
    def defaults(self):
        return tuple((0.5, 1.5) for _ in self.coords)

    def entries(self, xs):
        env = _env(self.coords, xs)
        out = {}
        for i, (s, c) in enumerate(zip(self.signs, self.coeffs)):
            v = evaluate_expr(c, env)
            out[(i, i)] = v if s > 0 else -v
        return out

    def text(self):
        return (
            "diag("
            + ",".join(self.coords)
            + ";"
            + ",".join(_fmt_sign(s) for s in self.signs)
            + ";"
            + ",".join(print_expr(c) for c in self.coeffs)
            + ")"
        )


@dataclass(frozen=True, eq=True)
class SymNode(Node):
    coords: tuple
    upper: tuple  # row-major upper triangle

    @property
    def defaults(self):
        return tuple((0.5, 1.5) for _ in self.coords)

    def entries(self, xs):
        env = _env(self.coords, xs)
        out = {}
        k = 0
        d = len(self.coords)
        for i in range(d):
            for j in range(i, d):
                e = self.upper[k]
                k += 1
                if isinstance(e, Num) and e.value == 0:
                    continue
                out[(i, j)] = evaluate_expr(e, env)
        return out

    def text(self):
        return "sym(" + ",".join(self.coords) + ";" + ",".join(print_expr(c) for c in self.upper) + ")"


def _merge_names(left: Sequence[str], right: Sequence[str]) -> tuple[tuple, dict]:
    used = set(left)
    mapping = {}
    names = []
    for name in right:
        new = name
        base = re.sub(r"_\d+$", "", name)
        k = 2
        while new in used:
            new = f"{base}_{k}"
            k += 1
        used.add(new)
        names.append(new)
        if new != name:
            mapping[name] = new
    return tuple(left) + tuple(names), mapping


@dataclass(frozen=True, eq=True)
class Product(Node):
    left: Node
    right: Node

    @property
    def coords(self):
        return _merge_names(self.left.coords, self.right.coords)[0]

    @property
    def defaults(self):
        return self.left.defaults + self.right.defaults

    @property
    def split(self) -> int:
        return self.left.dim

    def entries(self, xs):
        n = self.left.dim
        out = dict(self.left.entries(xs[:n]))
        for (i, j), v in self.right.entries(xs[n:]).items():
            out[(i + n, j + n)] = v
        return out

    def text(self):
        return f"product({self.left.text()}, {self.right.text()})"


@dataclass(frozen=True, eq=True)
class Warped(Node):
    base: Node
    warp: Expr
    fiber: Node

    @property
    def coords(self):
        return _merge_names(self.base.coords, self.fiber.coords)[0]

    @property
    def defaults(self):
        return self.base.defaults + self.fiber.defaults

    def entries(self, xs):
        n = self.base.dim
        out = dict(self.base.entries(xs[:n]))
        w = evaluate_expr(self.warp, _env(self.base.coords, xs[:n]))
        w2 = w * w
        for (i, j), v in self.fiber.entries(xs[n:]).items():
            out[(i + n, j + n)] = w2 * v
        return out

    def text(self):
        return f"warped({self.base.text()}, {print_expr(self.warp)}, {self.fiber.text()})"


@dataclass(frozen=True, eq=True)
class Conformal(Node):
    scale: Expr
    inner: Node

    @property
    def coords(self):
        return self.inner.coords

    @property
    def defaults(self):
        return self.inner.defaults

    def entries(self, xs):
        s = evaluate_expr(self.scale, _env(self.coords, xs))
        sv = s.value if isinstance(s, Jet2) else np.asarray(s)
        if np.any(sv == 0):
            raise DomainError("conformal factor vanishes", function="conformal", value=0.0)
        s2 = s * s
        return {k: s2 * v for k, v in self.inner.entries(xs).items()}

    def text(self):
        return f"conformal({print_expr(self.scale)}, {self.inner.text()})"


def _polar_node(n: int, radial: str, sign: int) -> Node:
    """Unit sphere / hyperbolic space in geodesic polar coordinates r, th1, ..."""
    coords = ("r",) + tuple(f"th{i}" for i in range(1, n))
    coeffs = [Num(1.0)]
    prefix: Expr = BinOp("^", Call(radial, (Sym("r"),)), Num(2.0))
    for i in range(1, n):
        coeffs.append(prefix)
        prefix = BinOp("*", prefix, BinOp("^", Call("sin", (Sym(f"th{i}"),)), Num(2.0)))
    return Diag(coords, tuple(sign for _ in coords), tuple(coeffs))


@dataclass(frozen=True, eq=True)
class Sphere(Node):
    n: int
    sign: int = 1

    @property
    def expanded(self) -> Node:
        return _polar_node(self.n, "sin", self.sign)

    @property
    def coords(self):
        return self.expanded.coords

    @property
    def defaults(self):
        return tuple(_ANGLE for _ in range(self.n))

    def entries(self, xs):
        return self.expanded.entries(xs)

    def text(self):
        return f"sphere({self.n})" if self.sign > 0 else f"sphere({self.n};-1)"


@dataclass(frozen=True, eq=True)
class Hyperbolic(Node):
    n: int
    sign: int = 1

    @property
    def expanded(self) -> Node:
        return _polar_node(self.n, "sinh", self.sign)

    @property
    def coords(self):
        return self.expanded.coords

    @property
    def defaults(self):
        return ((0.2, 2.0),) + tuple(_ANGLE for _ in range(self.n - 1))

    def entries(self, xs):
        return self.expanded.entries(xs)

    def text(self):
        return f"hyperbolic({self.n})" if self.sign > 0 else f"hyperbolic({self.n};-1)"


@dataclass(frozen=True, eq=True)
class Flat(Node):
    signs: tuple

    @property
    def coords(self):
        return tuple(f"x{i}" for i in range(1, len(self.signs) + 1))

    @property
    def defaults(self):
        return tuple((-1.0, 1.0) for _ in self.signs)

    def entries(self, xs):
        return {(i, i): float(s) for i, s in enumerate(self.signs)}

    def text(self):
        n = len(self.signs)
        if all(s > 0 for s in self.signs):
            return f"flat({n})"
        return f"flat({n};" + ",".join(_fmt_sign(s) for s in self.signs) + ")"


@dataclass(frozen=True, eq=True)
class PPWave(Node):
    """-2H du^2 - 2 du dv + dx^2 + dy^2 in coordinates (u, v, x, y)."""

    H: Expr
    coords: tuple = ("u", "v", "x", "y")

    @property
    def defaults(self):
        return ((-1.0, 1.0),) * 4

    def entries(self, xs):
        h = evaluate_expr(self.H, _env(self.coords, xs))
        return {(0, 0): -2.0 * h, (0, 1): -1.0, (2, 2): 1.0, (3, 3): 1.0}

    def text(self):
        return f"ppwave(H={print_expr(self.H)})"


@dataclass(frozen=True, eq=True)
class CatalogRef(Node):
    name: str
    target: Node = field(compare=False, repr=False, default=None)

    @property
    def coords(self):
        return self.target.coords

    @property
    def defaults(self):
        return self.target.defaults

    def entries(self, xs):
        return self.target.entries(xs)

    def text(self):
        return f"catalog({self.name})"


# ---------------------------------------------------------------------------
# Metric parser
# ---------------------------------------------------------------------------


class _MetricParser(_Parser):
    def __init__(self, text, functions=None, resolver=None):
        super().__init__(text, functions)
        self.resolver = resolver

    def ident_list(self) -> list[str]:
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        return names

    def ident(self) -> str:
        if self.tok.kind != "ident":
            raise self.error(f"expected a coordinate name, found {self.tok.text!r}")
        return self.advance().text

    def sign(self) -> int:
        tok = self.tok
        s = 1
        if tok.kind == "op" and tok.text in "+-":
            s = 1 if tok.text == "+" else -1
            self.advance()
            if self.tok.kind == "num":
                if float(self.tok.text) != 1:
                    raise self.error("signs must be +1 or -1")
                self.advance()
            return s
        if tok.kind == "num" and float(tok.text) == 1:
            self.advance()
            return 1
        raise self.error(f"expected a sign (+1 or -1), found {tok.text!r}")

    def sign_list(self) -> list[int]:
        out = [self.sign()]
        while self.accept(","):
            out.append(self.sign())
        return out

    def expr_list(self) -> list[Expr]:
        out = [self.expr()]
        while self.accept(","):
            out.append(self.expr())
        return out

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "num" or not float(tok.text).is_integer() or float(tok.text) < 1:
            raise self.error(f"expected a positive integer, found {tok.text!r}")
        self.advance()
        return int(float(tok.text))

    def checked_expr(self, coords) -> Expr:
        start = self.tok
        e = self.expr()
        _check_symbols(e, set(coords), start)
        return e

    def node(self) -> Node:
        tok = self.tok
        if tok.kind != "ident":
            raise self.error(f"expected a metric constructor, found {tok.text or 'end of input'!r}")
        name = self.advance().text
        self.expect("(")
        if name == "diag":
            coords = self.ident_list()
            self.expect(";")
            signs = self.sign_list()
            self.expect(";")
            exprs_start = self.tok
            coeffs = self.expr_list()
            if not (len(coords) == len(signs) == len(coeffs)):
                raise self.error(
                    f"diag dimension mismatch: {len(coords)} coordinates, "
                    f"{len(signs)} signs, {len(coeffs)} coefficients",
                    tok,
                )
            self._check_unique(coords, tok)
            for c in coeffs:
                _check_symbols(c, set(coords), exprs_start)
            out: Node = Diag(tuple(coords), tuple(signs), tuple(coeffs))
        elif name == "sym":
            coords = self.ident_list()
            self.expect(";")
            exprs_start = self.tok
            upper = self.expr_list()
            d = len(coords)
            if len(upper) != d * (d + 1) // 2:
                raise self.error(f"sym needs {d * (d + 1) // 2} upper-triangle entries, got {len(upper)}", tok)
            self._check_unique(coords, tok)
            for c in upper:
                _check_symbols(c, set(coords), exprs_start)
            out = SymNode(tuple(coords), tuple(upper))
        elif name == "product":
            left = self.node()
            self.expect(",")
            right = self.node()
            out = Product(left, right)
        elif name == "warped":
            base = self.node()
            self.expect(",")
            warp = self.checked_expr(base.coords)
            self.expect(",")
            fiber = self.node()
            out = Warped(base, warp, fiber)
        elif name == "conformal":
            start = self.i
            # the factor may reference the inner coordinates, which are only
            # known after parsing the inner node: skip ahead, then come back
            self._skip_expr()
            self.expect(",")
            inner = self.node()
            end = self.i
            self.i = start
            scale = self.checked_expr(inner.coords)
            self.i = end
            out = Conformal(scale, inner)
        elif name in ("sphere", "hyperbolic"):
            n = self.integer()
            sign = 1
            if self.accept(";"):
                sign = self.sign()
            out = (Sphere if name == "sphere" else Hyperbolic)(n, sign)
        elif name == "flat":
            n = self.integer()
            signs = [1] * n
            if self.accept(";"):
                signs = self.sign_list()
                if len(signs) != n:
                    raise self.error(f"flat({n}) given {len(signs)} signs", tok)
            out = Flat(tuple(signs))
        elif name == "ppwave":
            if self.tok.text == "H":
                self.advance()
                self.expect("=")
            out = PPWave(self.checked_expr(("u", "v", "x", "y")))
        elif name == "catalog":
            open_tok = self.tokens[self.i - 1]
            close = self.text.find(")", open_tok.pos)
            if close < 0:
                raise self.error("unterminated catalog reference")
            ref = self.text[open_tok.pos + 1 : close].strip()
            while self.tok.kind != "end" and self.tok.pos < close:
                self.advance()
            if self.resolver is None:
                raise self.error("catalog references need a catalog resolver", tok)
            try:
                target = self.resolver(ref)
            except KeyError:
                raise self.error(f"unknown catalog entry {ref!r}", tok) from None
            out = CatalogRef(ref, target)
        else:
            raise self.error(f"unknown metric constructor {name!r}", tok)
        self.expect(")")
        return out

    def _skip_expr(self) -> None:
        depth = 0
        while True:
            tok = self.tok
            if tok.kind == "end":
                raise self.error("unterminated conformal(...)")
            if tok.kind == "op":
                if tok.text == "(":
                    depth += 1
                elif tok.text == ")":
                    if depth == 0:
                        raise self.error("conformal(...) needs a factor and a metric")
                    depth -= 1
                elif tok.text == "," and depth == 0:
                    return
            self.advance()

    def _check_unique(self, coords, tok) -> None:
        seen = set()
        for c in coords:
            if c in seen:
                raise self.error(f"duplicate coordinate {c!r}", tok)
            if c in CONSTANTS or c in FUNCTIONS:
                raise self.error(f"reserved name used as coordinate: {c!r}", tok)
            seen.add(c)


# ---------------------------------------------------------------------------
# MetricSpec
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSpec:
    """A parsed metric: node tree plus a coordinate box used for default grids."""

    root: Node
    domain: tuple = ()  # ((lo, hi), ...) aligned with coords

    @property
    def coords(self) -> tuple[str, ...]:
        return self.root.coords

    @property
    def dim(self) -> int:
        return self.root.dim

    def box(self) -> np.ndarray:
        return np.array(self.domain if self.domain else self.root.defaults, dtype=float)

    def with_domain(self, domain: Mapping[str, Sequence[float]] | None) -> "MetricSpec":
        if not domain:
            return self
        box = [tuple(b) for b in self.box()]
        index = {c: i for i, c in enumerate(self.coords)}
        for name, (lo, hi) in domain.items():
            if name not in index:
                raise ParseError(f"domain names unknown coordinate {name!r}")
            if not lo < hi:
                raise ParseError(f"empty domain interval for {name!r}")
            box[index[name]] = (float(lo), float(hi))
        return MetricSpec(self.root, tuple(box))

    def text(self) -> str:
        return self.root.text()

    def __str__(self) -> str:
        return self.text()


def parse_metric(
    text: str,
    functions: Mapping[str, UnivariateFunction] | None = None,
    resolver: Callable[[str], Node] | None = None,
) -> MetricSpec:
    """Parse metric text (or a JSON envelope with ``metric`` and ``domain``)."""
    domain = None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            env = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON envelope: {exc.msg}", exc.lineno, exc.colno) from None
        if "metric" not in env:
            raise ParseError("JSON envelope lacks a 'metric' field")
        text = env["metric"]
        domain = env.get("domain")
    if resolver is None:
        from .catalog import resolve_node

        resolver = resolve_node
    p = _MetricParser(text, functions, resolver)
    root = p.node()
    p.expect_end()
    return MetricSpec(root).with_domain(domain)


def print_metric(spec: MetricSpec | Node) -> str:
    return spec.text()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _as_jet(v, d: int, batch: tuple) -> Jet2:
    if isinstance(v, Jet2):
        return v
    return Jet2.constant(v, d, batch)


def metric_arrays(spec: MetricSpec | Node, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Metric value, first and second coordinate derivatives at one or many points.

    Returns ``(g, dg, ddg)`` with ``g[..., i, j]``, ``dg[..., i, j, a] = d_a g_ij``
    and ``ddg[..., i, j, a, b] = d_a d_b g_ij``.
    """
    root = spec.root if isinstance(spec, MetricSpec) else spec
    points = np.asarray(points, dtype=float)
    d = root.dim
    if points.shape[-1] != d:
        raise ValueError(f"point has {points.shape[-1]} coordinates but the metric has dimension {d}")
    batch = points.shape[:-1]
    xs = lift_point(points)
    try:
        ent = root.entries(xs)
    except DomainError as exc:
        raise exc.with_point(points if points.ndim == 1 else None) from None
    g = np.zeros(batch + (d, d))
    dg = np.zeros(batch + (d, d, d))
    ddg = np.zeros(batch + (d, d, d, d))
    for (i, j), v in ent.items():
        jet = _as_jet(v, d, batch)
        for a, b in ((i, j), (j, i)):
            g[..., a, b] = jet.value
            dg[..., a, b, :] = jet.gradient
            ddg[..., a, b, :, :] = jet.hessian
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(dg)) and np.all(np.isfinite(ddg))):
        raise DomainError("metric evaluation produced non-finite values")
    return g, dg, ddg


def metric_values(spec: MetricSpec | Node, points) -> np.ndarray:
    """Metric coefficients only (plain float evaluation, no derivatives)."""
    root = spec.root if isinstance(spec, MetricSpec) else spec
    points = np.asarray(points, dtype=float)
    d = root.dim
    batch = points.shape[:-1]
    xs = [points[..., i] for i in range(d)]
    ent = root.entries(xs)
    g = np.zeros(batch + (d, d))
    for (i, j), v in ent.items():
        g[..., i, j] = v
        g[..., j, i] = v
    return g


def check_nondegenerate(g: np.ndarray, points) -> None:
    """Raise :class:`SingularMetricError` where |det g| < 1e-12 * max|g_ij|^d."""
    d = g.shape[-1]
    det = np.linalg.det(g)
    scale = np.max(np.abs(g), axis=(-2, -1)) ** d
    bad = np.abs(det) < 1e-12 * scale
    if np.any(bad):
        pts = np.asarray(points, dtype=float).reshape(-1, d)
        idx = int(np.flatnonzero(np.ravel(bad))[0])
        raise SingularMetricError("metric is singular", pts[idx] if pts.shape[0] > idx else None)


def signature(g: np.ndarray) -> tuple[int, ...]:
    """Sign vector of the eigenvalues of a single metric matrix (ascending)."""
    return tuple(int(s) for s in np.sign(np.linalg.eigvalsh(g)))


def evaluate_metric(spec: MetricSpec, point) -> tuple[list[list[Jet2]], tuple[int, ...]]:
    """Matrix of coefficient jets ``g_ij`` at ``point`` and the signature sign vector."""
    point = np.asarray(point, dtype=float)
    if point.ndim != 1:
        raise ValueError("evaluate_metric takes a single point; use metric_arrays for batches")
    g, dg, ddg = metric_arrays(spec, point)
    check_nondegenerate(g, point)
    d = spec.dim
    mat = [[Jet2(g[i, j], dg[i, j], ddg[i, j]) for j in range(d)] for i in range(d)]
    return mat, signature(g)
