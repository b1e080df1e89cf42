"""A small expression language for one-form components.

Grammar (whitespace insensitive, left-associative)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ['^' ['-'] int]
    atom   := number | var | func '(' expr ')' | '(' expr ')'
            | 'piecewise' '(' cond ',' expr ',' expr ')'
    cond   := var ('<' | '<=' | '>' | '>=') ['-'] number

Variables are ``x y z rho phi`` with ``rho = hypot(x, y)`` and
``phi = atan2(y, x)``. Functions are ``sin cos exp sqrt abs``. Number
literals are kept as exact fractions. Offsets in errors are 1-based byte
positions into the source.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

VARIABLES = ("x", "y", "z", "rho", "phi")
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")
COMPARISONS = ("<=", ">=", "<", ">")


class ExprSyntaxError(SyntaxError):
    """Parse failure with a 1-based ``offset`` and the set of ``expected`` tokens."""

    def __init__(self, message: str, offset: int, expected=()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = frozenset(expected)


class EvalError(ArithmeticError):
    """Evaluation failure (division by zero, sqrt of a negative) at ``offset``."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Num:
    value: Fraction
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    arg: object
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Cond:
    var: str
    op: str
    value: Fraction


@dataclass(frozen=True)
class Piecewise:
    cond: Cond
    then: object
    other: object
    offset: int = field(default=0, compare=False)


Expr = object


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def error(self, expected, message=None):
        self.skip()
        got = repr(self.src[self.pos]) if self.pos < len(self.src) else "end of input"
        exp = ", ".join(sorted(expected))
        raise ExprSyntaxError(message or f"expected {exp}, got {got}", self.pos + 1, expected)

    def skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self, token: str) -> bool:
        self.skip()
        return self.src.startswith(token, self.pos)

    def take(self, token: str) -> bool:
        if self.peek(token):
            self.pos += len(token)
            return True
        return False

    def expect(self, token: str):
        if not self.take(token):
            self.error({token})

    def ident(self):
        self.skip()
        start = self.pos
        while self.pos < len(self.src) and (self.src[self.pos].isalnum() or self.src[self.pos] == "_"):
            self.pos += 1
        return self.src[start:self.pos], start

    def number(self):
        self.skip()
        start = self.pos
        s = self.src
        while self.pos < len(s) and s[self.pos].isdigit():
            self.pos += 1
        if self.pos < len(s) and s[self.pos] == ".":
            self.pos += 1
            while self.pos < len(s) and s[self.pos].isdigit():
                self.pos += 1
        text = s[start:self.pos]
        if not text.strip(".") or text == ".":
            self.pos = start
            self.error({"number"})
        if self.pos < len(s) and s[self.pos] in "eE":
            save = self.pos
            self.pos += 1
            if self.pos < len(s) and s[self.pos] in "+-":
                self.pos += 1
            digits = self.pos
            while self.pos < len(s) and s[self.pos].isdigit():
                self.pos += 1
            if self.pos == digits:
                self.pos = save
        return Fraction(s[start:self.pos]), start

    def parse(self):
        node = self.expr()
        self.skip()
        if self.pos != len(self.src):
            self.error({"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while True:
            self.skip()
            at = self.pos + 1
            if self.take("+"):
                node = BinOp("+", node, self.term(), at)
            elif self.take("-"):
                node = BinOp("-", node, self.term(), at)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            self.skip()
            at = self.pos + 1
            if self.take("*"):
                node = BinOp("*", node, self.factor(), at)
            elif self.take("/"):
                node = BinOp("/", node, self.factor(), at)
            else:
                return node

    def factor(self):
        self.skip()
        at = self.pos + 1
        if self.take("-"):
            return Neg(self.factor(), at)
        node = self.atom()
        self.skip()
        at = self.pos + 1
        if self.take("^"):
            neg = self.take("-")
            self.skip()
            if not (self.pos < len(self.src) and self.src[self.pos].isdigit()):
                self.error({"integer"})
            start = self.pos
            while self.pos < len(self.src) and self.src[self.pos].isdigit():
                self.pos += 1
            if self.pos < len(self.src) and self.src[self.pos] in ".eE":
                self.pos = start
                self.error({"integer"})
            k = int(self.src[start:self.pos])
            node = Pow(node, -k if neg else k, at)
        return node

    def atom(self):
        self.skip()
        at = self.pos + 1
        if self.pos >= len(self.src):
            self.error({"number", "variable", "function", "("})
        c = self.src[self.pos]
        if c.isdigit() or c == ".":
            value, _ = self.number()
            return Num(value, at)
        if c == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if c.isalpha():
            name, start = self.ident()
            if name in VARIABLES:
                return Var(name, at)
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg, at)
            if name == "piecewise":
                self.expect("(")
                cond = self.cond()
                self.expect(",")
                then = self.expr()
                self.expect(",")
                other = self.expr()
                self.expect(")")
                return Piecewise(cond, then, other, at)
            self.pos = start
            self.error(set(VARIABLES) | set(FUNCTIONS) | {"piecewise"}, f"unknown name {name!r}")
        self.error({"number", "variable", "function", "("})

    def cond(self):
        name, start = self.ident()
        if name not in VARIABLES:
            self.pos = start
            self.error(set(VARIABLES))
        for op in COMPARISONS:
            if self.take(op):
                break
        else:
            self.error(set(COMPARISONS))
        neg = self.take("-")
        value, _ = self.number()
        return Cond(name, op, -value if neg else value)


def parse_expr(source: str) -> Expr:
    """Parse ``source`` into an AST.

    >>> parse_expr("4*(rho-0.5)^2*(rho-1)") == parse_expr("4 * (rho - 1/2)^2 * (rho - 1)")
    True
    """
    return _Parser(source).parse()


def _fmt_num(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d == 1:
        digits = max(twos, fives)
        scaled = v * 10 ** digits
        sign = "-" if scaled < 0 else ""
        n = abs(scaled.numerator)
        whole, frac = divmod(n, 10 ** digits)
        return f"{sign}{whole}.{frac:0{digits}d}"
    return f"({v.numerator}/{v.denominator})"


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def print_expr(node: Expr) -> str:
    """Render an AST back to source that parses to an equal AST."""
    if isinstance(node, Num):
        text = _fmt_num(abs(node.value))
        return f"(-{text})" if node.value < 0 else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_wrap(node.arg, 3)})"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = _wrap(node.left, p)
        right = _wrap(node.right, p + 1)
        return f"{left} {node.op} {right}"
    if isinstance(node, Pow):
        return f"{_wrap(node.base, 4)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({print_expr(node.arg)})"
    if isinstance(node, Piecewise):
        c = node.cond
        return (f"piecewise({c.var} {c.op} {_fmt_num(c.value) if c.value >= 0 else '-' + _fmt_num(-c.value)}, "
                f"{print_expr(node.then)}, {print_expr(node.other)})")
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node, prec: int) -> str:
    text = print_expr(node)
    if isinstance(node, BinOp) and _PREC[node.op] < prec:
        return f"({text})"
    if isinstance(node, Pow) and prec >= 4:
        return f"({text})"
    return text


def variables_from_xyz(x, y, z=None) -> dict:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    env = {"x": x, "y": y, "z": np.zeros_like(x) if z is None else np.asarray(z, dtype=float),
           "rho": np.hypot(x, y), "phi": np.arctan2(y, x)}
    return env


def evaluate(node: Expr, env: dict) -> np.ndarray:
    """Evaluate on arrays; ``env`` maps variable names to equally shaped arrays.

    A ``piecewise`` branch is only evaluated on the points that select it.
    """
    shape = np.shape(env["x"])
    flat = {k: np.ravel(np.asarray(v, dtype=float)) for k, v in env.items()}
    return _eval(node, flat).reshape(shape)


def evaluate_at(node: Expr, x, y, z=None) -> np.ndarray:
    return evaluate(node, variables_from_xyz(x, y, z))


def _eval(node, env) -> np.ndarray:
    n = env["x"].shape[0]
    if isinstance(node, Num):
        return np.full(n, float(node.value))
    if isinstance(node, Var):
        return env[node.name].copy()
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(b == 0):
            raise EvalError("division by zero", node.offset)
        return a / b
    if isinstance(node, Pow):
        a = _eval(node.base, env)
        if node.exponent < 0 and np.any(a == 0):
            raise EvalError("division by zero", node.offset)
        return a ** node.exponent if node.exponent >= 0 else 1.0 / a ** (-node.exponent)
    if isinstance(node, Call):
        a = _eval(node.arg, env)
        if node.func == "sqrt":
            if np.any(a < 0):
                raise EvalError("sqrt of a negative number", node.offset)
            return np.sqrt(a)
        return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[node.func](a)
    if isinstance(node, Piecewise):
        c = node.cond
        v = env[c.var]
        lit = float(c.value)
        sel = {"<": v < lit, "<=": v <= lit, ">": v > lit, ">=": v >= lit}[c.op]
        out = np.empty(n)
        if sel.any():
            out[sel] = _eval(node.then, {k: a[sel] for k, a in env.items()})
        if (~sel).any():
            out[~sel] = _eval(node.other, {k: a[~sel] for k, a in env.items()})
        return out
    raise TypeError(f"not an expression node: {node!r}")
