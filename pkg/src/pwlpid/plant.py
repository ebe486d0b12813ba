"""Plant models y^(n) + f(y, ..., y^(n-1)) = u and a small expression
language for user-defined first-order nonlinearities.

The two built-in plants are the worked examples this toolkit reproduces:
a linear first-order system f(y) = 2y (transfer function 1/(s+2) with
unit input gain) and the nonlinear f(y) = 0.5y + ln(1 + y^2).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .approx import lifted_lipschitz


class EvalError(ArithmeticError):
    """Expression evaluation left the real domain (log/div/pow)."""


class PlantSyntaxError(ValueError):
    """Malformed plant expression; carries the source position."""

    def __init__(self, message, pos):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class UnknownFunctionError(PlantSyntaxError):
    pass


@dataclass(frozen=True)
class PlantModel:
    """Scalar nonlinearity of an n-th order plant plus its certificates.

    ``f`` takes a float for n=1 and an ndarray of shape (n,) otherwise.
    ``lipschitz_L`` bounds |grad f| on any domain of interest; for
    expression plants it is a sampled estimate (``lipschitz_certified``
    False), never a certificate.
    """

    order: int
    f: object
    lipschitz_L: float
    grad_f: object = None
    hessian_bound: float = None
    label: str = ""
    lipschitz_certified: bool = True

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("plant order must be >= 1")
        if self.lipschitz_L < 0:
            raise ValueError("lipschitz_L must be nonnegative")

    def lifted_L(self):
        """Lipschitz constant of the first-order companion field."""
        return lifted_lipschitz(self.lipschitz_L, self.order)

    def companion_field(self, u=0.0):
        """First-order form y' = (y_2, ..., y_n, -f(y) + u) as a callable.

        The first n-1 components are exact coordinate shifts.
        """
        n = self.order

        def field(y, u_val=u):
            y = np.atleast_1d(np.asarray(y, dtype=float))
            out = np.empty(n)
            out[: n - 1] = y[1:]
            fy = self.f(float(y[0])) if n == 1 else self.f(y)
            out[n - 1] = -float(fy) + float(u_val)
            return out

        return field


def builtin(name):
    """Built-in plants: ``example1`` (f(y)=2y) and ``example2``
    (f(y)=0.5y+ln(1+y^2), |f'|<=1.5, |f''|<=2)."""
    if name == "example1":
        return PlantModel(
            order=1,
            f=lambda y: 2.0 * y,
            grad_f=lambda y: 2.0,
            lipschitz_L=2.0,
            hessian_bound=0.0,
            label="example1: linear plant 1/(s+2)",
        )
    if name == "example2":
        return PlantModel(
            order=1,
            f=lambda y: 0.5 * y + math.log(1.0 + y * y),
            grad_f=lambda y: 0.5 + 2.0 * y / (1.0 + y * y),
            lipschitz_L=1.5,
            hessian_bound=2.0,
            label="example2: f(y) = 0.5y + ln(1+y^2)",
        )
    raise ValueError(f"unknown builtin plant: {name!r}")


# ----------------------------------------------------------------------
# expression language (first-order plants only)
#
# expr   := term (('+'|'-') term)*
# term   := factor (('*'|'/') factor)*
# factor := base ('^' factor)?
# base   := number | 'y' | '(' expr ')' | fn '(' expr ')'
# fn     := ln | exp | sin | cos | abs | sqrt

_FUNCTIONS = {
    "ln": math.log,
    "exp": math.exp,
    "sin": math.sin,
    "cos": math.cos,
    "abs": abs,
    "sqrt": math.sqrt,
}


@dataclass(frozen=True)
class Num:
    value: float
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Var:
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object
    span: tuple = field(default=(0, 0), compare=False)


class PlantExpr:
    """Parsed plant expression in the single free variable ``y``."""

    def __init__(self, root, source=""):
        self.root = root
        self.source = source

    def __call__(self, y):
        return _eval_node(self.root, float(y))

    def evaluate(self, y):
        return _eval_node(self.root, float(y))

    def pretty(self):
        """Fully parenthesized form that reparses to the same evaluation."""
        return _pretty(self.root)

    def __repr__(self):
        return f"PlantExpr({self.pretty()})"


def _eval_node(node, y):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return y
    if isinstance(node, BinOp):
        lhs = _eval_node(node.left, y)
        rhs = _eval_node(node.right, y)
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        if node.op == "/":
            if rhs == 0.0:
                raise EvalError(f"division by zero at y={y}")
            return lhs / rhs
        # power
        try:
            return math.pow(lhs, rhs)
        except (ValueError, OverflowError) as exc:
            raise EvalError(f"invalid power {lhs}^{rhs}: {exc}") from exc
    if isinstance(node, Call):
        arg = _eval_node(node.arg, y)
        if node.fn == "ln" and arg <= 0.0:
            raise EvalError(f"log of non-positive argument {arg} at y={y}")
        if node.fn == "sqrt" and arg < 0.0:
            raise EvalError(f"sqrt of negative argument {arg} at y={y}")
        try:
            return _FUNCTIONS[node.fn](arg)
        except OverflowError as exc:
            raise EvalError(f"{node.fn} overflow at y={y}") from exc
    raise TypeError(f"unexpected AST node {node!r}")


def _pretty(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "y"
    if isinstance(node, BinOp):
        return f"({_pretty(node.left)} {node.op} {_pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.fn}({_pretty(node.arg)})"
    raise TypeError(f"unexpected AST node {node!r}")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def parse(self):
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            raise PlantSyntaxError(
                f"unexpected trailing input {self.text[self.pos:]!r}", self.pos)
        return node

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expr(self):
        start = self.pos
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self.term()
            node = BinOp(op, node, rhs, span=(start, self.pos))
        return node

    def term(self):
        start = self.pos
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self.factor()
            node = BinOp(op, node, rhs, span=(start, self.pos))
        return node

    def factor(self):
        start = self.pos
        node = self.base()
        if self.peek() == "^":
            self.pos += 1
            rhs = self.factor()  # right-associative
            node = BinOp("^", node, rhs, span=(start, self.pos))
        return node

    def base(self):
        ch = self.peek()
        start = self.pos
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                raise PlantSyntaxError("expected ')'", self.pos)
            self.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha():
            name = self.identifier()
            if name == "y":
                return Var(span=(start, self.pos))
            if self.peek() != "(":
                if name in _FUNCTIONS:
                    raise PlantSyntaxError(
                        f"function {name!r} needs parentheses", self.pos)
                raise UnknownFunctionError(f"unknown name {name!r}", start)
            if name not in _FUNCTIONS:
                raise UnknownFunctionError(f"unknown function {name!r}", start)
            self.pos += 1  # consume '('
            arg = self.expr()
            if self.peek() != ")":
                raise PlantSyntaxError("expected ')'", self.pos)
            self.pos += 1
            return Call(name, arg, span=(start, self.pos))
        raise PlantSyntaxError(
            f"expected number, 'y', '(' or function, found {ch!r}" if ch
            else "unexpected end of input", self.pos)

    def number(self):
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isdigit() or text[self.pos] == "."):
            self.pos += 1
        if self.pos < len(text) and text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(text) and text[self.pos].isdigit():
                while self.pos < len(text) and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # bare 'e' is not an exponent
        lit = text[start:self.pos]
        try:
            value = float(lit)
        except ValueError:
            raise PlantSyntaxError(f"bad number literal {lit!r}", start) from None
        return Num(value, span=(start, self.pos))

    def identifier(self):
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        return self.text[start:self.pos]


def parse_plant(text):
    """Parse an expression in ``y`` into a :class:`PlantExpr`."""
    return PlantExpr(_Parser(text).parse(), source=text)


def plant_from_expression(text, domain, lipschitz=None, hessian_bound=None,
                          samples=2001):
    """First-order :class:`PlantModel` from an expression string.

    When ``lipschitz`` is omitted it is estimated by sampling central
    differences over ``domain`` with a 10% safety margin; the result is
    flagged as uncertified.
    """
    expr = parse_plant(text)
    lo, hi = float(domain[0]), float(domain[1])
    certified = lipschitz is not None
    if lipschitz is None:
        ys = np.linspace(lo, hi, samples)
        step = 1e-6 * max(1.0, hi - lo)
        worst = 0.0
        for y in ys:
            slope = abs(expr(y + step) - expr(y - step)) / (2 * step)
            if slope > worst:
                worst = slope
        lipschitz = 1.1 * worst
    return PlantModel(
        order=1,
        f=expr,
        lipschitz_L=float(lipschitz),
        hessian_bound=hessian_bound,
        label=f"expr: {text}",
        lipschitz_certified=certified,
    )


def existence_bound_check(trajectory, L, K, order=1):
    """Check max_t |y(t)| * exp(-2 * Ltilde * |t|) <= K over the samples,
    with Ltilde = sqrt(order - 1 + L**2).

    A sampled verification of the growth envelope every solution of the
    zero-initial-state plant must respect.
    """
    lt = lifted_lipschitz(L, order)
    t = np.asarray(trajectory.times, dtype=float)
    y = np.asarray(trajectory.y, dtype=float)
    weighted = np.abs(y) * np.exp(-2.0 * lt * np.abs(t))
    return bool(np.max(weighted) <= K)
