"""Scalar expression trees: parsing, evaluation, symbolic differentiation.

Every formula in the package (Lagrangians, weight functions, Euler-Lagrange
residuals, variations) is an :class:`Expr`.  Trees are immutable and compare
structurally, so two expressions are equal iff they have the same shape.

Grammar (whitespace insensitive)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

``^`` binds tighter than unary minus and associates to the right, so
``-2^2 == -(2^2)`` and ``2^3^2 == 2^9``.  A minus sign written directly in
front of a numeric literal (and not followed by ``^``) is folded into the
literal.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

FUNCTIONS = ("exp", "ln", "sin", "cos", "tan", "sinh", "cosh", "tanh", "sqrt", "abs", "sign")
CONSTANTS = {"pi": math.pi, "e": math.e}
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class ParseError(ValueError):
    """Malformed expression text.

    ``offset`` is the byte offset of the offending token in the UTF-8 input.
    """

    def __init__(self, offset: int, expected: str, found: str, text: str = ""):
        self.offset = offset
        self.expected = expected
        self.found = found
        self.text = text
        super().__init__(f"at offset {offset}: expected {expected}, found {found}")


class EvaluationError(ValueError):
    pass


class UnboundVariableError(EvaluationError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")

    def __str__(self):
        return f"unbound variable {self.name!r}"


class DomainError(EvaluationError, ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Tree nodes


class Expr:
    """Base class of the expression tree; supports Python arithmetic operators."""

    __slots__ = ()

    def __add__(self, other):
        return Binary("add", self, as_expr(other))

    def __radd__(self, other):
        return Binary("add", as_expr(other), self)

    def __sub__(self, other):
        return Binary("sub", self, as_expr(other))

    def __rsub__(self, other):
        return Binary("sub", as_expr(other), self)

    def __mul__(self, other):
        return Binary("mul", self, as_expr(other))

    def __rmul__(self, other):
        return Binary("mul", as_expr(other), self)

    def __truediv__(self, other):
        return Binary("div", self, as_expr(other))

    def __rtruediv__(self, other):
        return Binary("div", as_expr(other), self)

    def __pow__(self, other):
        return Binary("pow", self, as_expr(other))

    def __rpow__(self, other):
        return Binary("pow", as_expr(other), self)

    def __neg__(self):
        return Unary("neg", self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Constant(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class NamedConstant(Expr):
    name: str

    def __post_init__(self):
        if self.name not in CONSTANTS:
            raise ValueError(f"unknown named constant {self.name!r}")


@dataclass(frozen=True)
class Variable(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    arg: Expr

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.op!r}")


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.op!r}")


ZERO = Constant(0.0)
ONE = Constant(1.0)
TWO = Constant(2.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    return Constant(float(value))


def free_variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Variable):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return free_variables(e.arg)
    if isinstance(e, Binary):
        return free_variables(e.left) | free_variables(e.right)
    return frozenset()


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    if isinstance(e, Variable):
        return mapping.get(e.name, e)
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    return e


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(_byte_offset(text, pos), "a number, identifier or operator",
                             repr(text[pos]), text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected: str):
        kind, value, pos = self.peek()
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(_byte_offset(self.text, pos), expected, found, self.text)

    def is_op(self, value: str, k: int = 0) -> bool:
        kind, v, _ = self.peek(k)
        return kind == "op" and v == value

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail("an operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.is_op("+") or self.is_op("-"):
            op = "add" if self.advance()[1] == "+" else "sub"
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.is_op("*") or self.is_op("/"):
            op = "mul" if self.advance()[1] == "*" else "div"
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.is_op("-"):
            self.advance()
            kind, value, _ = self.peek()
            if kind == "num" and not self.is_op("^", 1):
                self.advance()
                return Constant(-float(value))
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.is_op("^"):
            self.advance()
            return Binary("pow", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "num":
            self.advance()
            return Constant(float(value))
        if kind == "ident":
            if value in FUNCTIONS:
                self.advance()
                if not self.is_op("("):
                    self.fail(f"'(' after function name {value!r}")
                self.advance()
                arg = self.expr()
                if not self.is_op(")"):
                    self.fail("')'")
                self.advance()
                return Unary(value, arg)
            if self.is_op("(", 1):
                self.fail("an operator (unknown function name)")
            self.advance()
            if value in CONSTANTS:
                return NamedConstant(value)
            return Variable(value)
        if self.is_op("("):
            self.advance()
            inner = self.expr()
            if not self.is_op(")"):
                self.fail("')'")
            self.advance()
            return inner
        self.fail("a number, identifier, function call or '('")


def parse(text: str) -> Expr:
    """Parse expression text into a tree; raises :class:`ParseError`."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation

_UNARY_FUNCS: dict[str, Callable] = {
    "neg": np.negative,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "abs": np.abs,
    "sign": np.sign,
}


def _ln(u):
    if np.any(u <= 0):
        raise DomainError("ln of a non-positive argument")
    return np.log(u)


def _sqrt(u):
    if np.any(u < 0):
        raise DomainError("sqrt of a negative argument")
    return np.sqrt(u)


def _div(u, v):
    if np.any(v == 0):
        raise DomainError("division by zero")
    return np.divide(u, v)


def _pow(u, v):
    if np.any((u == 0) & (v < 0)):
        raise DomainError("division by zero (zero to a negative power)")
    with np.errstate(invalid="ignore", over="ignore"):
        r = np.power(u, v)
    if np.any(np.isnan(r) & ~np.isnan(u) & ~np.isnan(v)):
        raise DomainError("negative base raised to a non-integer power")
    return r


_BINARY_FUNCS: dict[str, Callable] = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": _div,
    "pow": _pow,
}
_UNARY_FUNCS["ln"] = _ln
_UNARY_FUNCS["sqrt"] = _sqrt


def _compile(e: Expr) -> Callable[[Mapping], object]:
    if isinstance(e, Constant):
        v = np.float64(e.value)
        return lambda env: v
    if isinstance(e, NamedConstant):
        v = np.float64(CONSTANTS[e.name])
        return lambda env: v
    if isinstance(e, Variable):
        name = e.name

        def var(env):
            try:
                return env[name]
            except KeyError:
                raise UnboundVariableError(name) from None

        return var
    if isinstance(e, Unary):
        fn = _UNARY_FUNCS[e.op]
        arg = _compile(e.arg)
        return lambda env: fn(arg(env))
    if isinstance(e, Binary):
        fn = _BINARY_FUNCS[e.op]
        left, right = _compile(e.left), _compile(e.right)
        return lambda env: fn(left(env), right(env))
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, env: Mapping[str, float]):
    """Evaluate in double precision.

    Values in ``env`` may be floats or numpy arrays (evaluated elementwise).
    Raises :class:`UnboundVariableError` or :class:`DomainError` instead of
    returning NaN.
    """
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    missing = free_variables(e) - env.keys()
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    with np.errstate(divide="ignore", over="ignore"):
        result = _compile(e)(env)
    if np.ndim(result) == 0:
        return float(result)
    return result


def lambdify(e: Expr, names: tuple[str, ...] | str = ("x",)) -> Callable:
    """Compile ``e`` into a vectorized function of the given positional variables.

    The result always has the broadcast shape of the arguments.
    """
    if isinstance(names, str):
        names = (names,)
    missing = free_variables(e) - set(names)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    fn = _compile(e)

    def compiled(*args):
        arrays = [np.asarray(a, dtype=float) for a in args]
        env = dict(zip(names, arrays))
        with np.errstate(divide="ignore", over="ignore"):
            out = fn(env)
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        out = np.broadcast_to(out, shape)
        if shape == ():
            return float(out)
        return np.array(out, dtype=float)

    compiled.expr = e
    compiled.names = names
    return compiled


# ---------------------------------------------------------------------------
# Differentiation


def differentiate(e: Expr, var: str) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to ``var``, simplified.

    ``abs(u)`` differentiates to ``sign(u)*u'`` with ``sign(0) = 0``.
    """
    return simplify(_Differentiator(var).d(e))


class _Differentiator:
    def __init__(self, var: str):
        self.var = var
        self._deps: dict[int, bool] = {}

    def depends(self, e: Expr) -> bool:
        key = id(e)
        hit = self._deps.get(key)
        if hit is None:
            if isinstance(e, Variable):
                hit = e.name == self.var
            elif isinstance(e, Unary):
                hit = self.depends(e.arg)
            elif isinstance(e, Binary):
                hit = self.depends(e.left) or self.depends(e.right)
            else:
                hit = False
            self._deps[key] = hit
        return hit

    def d(self, e: Expr) -> Expr:
        return _d(e, self.var, self.depends)


def _d(e: Expr, var: str, _depends) -> Expr:
    if isinstance(e, (Constant, NamedConstant)):
        return ZERO
    if isinstance(e, Variable):
        return ONE if e.name == var else ZERO
    if isinstance(e, Unary):
        u = e.arg
        if not _depends(u):
            return ZERO
        du = _d(u, var, _depends)
        op = e.op
        if op == "neg":
            return Unary("neg", du)
        if op == "exp":
            return du * e
        if op == "ln":
            return du / u
        if op == "sin":
            return du * Unary("cos", u)
        if op == "cos":
            return Unary("neg", du * Unary("sin", u))
        if op == "tan":
            return du / Unary("cos", u) ** TWO
        if op == "sinh":
            return du * Unary("cosh", u)
        if op == "cosh":
            return du * Unary("sinh", u)
        if op == "tanh":
            return du / Unary("cosh", u) ** TWO
        if op == "sqrt":
            return du / (TWO * e)
        if op == "abs":
            return Unary("sign", u) * du
        if op == "sign":
            return ZERO
        raise AssertionError(op)
    if isinstance(e, Binary):
        u, v = e.left, e.right
        du_dep, dv_dep = _depends(u), _depends(v)
        if not (du_dep or dv_dep):
            return ZERO
        if e.op == "add":
            return _d(u, var, _depends) + _d(v, var, _depends)
        if e.op == "sub":
            return _d(u, var, _depends) - _d(v, var, _depends)
        if e.op == "mul":
            if not du_dep:
                return u * _d(v, var, _depends)
            if not dv_dep:
                return _d(u, var, _depends) * v
            return _d(u, var, _depends) * v + u * _d(v, var, _depends)
        if e.op == "div":
            if not dv_dep:
                return _d(u, var, _depends) / v
            return (_d(u, var, _depends) * v - u * _d(v, var, _depends)) / v ** TWO
        if e.op == "pow":
            if not dv_dep:
                return v * u ** (v - ONE) * _d(u, var, _depends)
            if not du_dep:
                return e * Unary("ln", u) * _d(v, var, _depends)
            return e * (_d(v, var, _depends) * Unary("ln", u) + v * _d(u, var, _depends) / u)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Simplification


def _fold_unary(op: str, value: float):
    try:
        with np.errstate(all="ignore"):
            r = float(_UNARY_FUNCS[op](np.float64(value)))
    except DomainError:
        return None
    return r if math.isfinite(r) else None


def _fold_binary(op: str, a: float, b: float):
    if op == "pow" and a == 0.0 and b == 0.0:
        return None
    try:
        with np.errstate(all="ignore"):
            r = float(_BINARY_FUNCS[op](np.float64(a), np.float64(b)))
    except DomainError:
        return None
    return r if math.isfinite(r) else None


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Constant) and (value is None or e.value == value)


def simplify(e: Expr) -> Expr:
    """Constant folding and identity elimination; idempotent."""
    if isinstance(e, Unary):
        return _simplify_unary(e.op, simplify(e.arg))
    if isinstance(e, Binary):
        return _simplify_binary(e.op, simplify(e.left), simplify(e.right))
    return e


def _simplify_unary(op: str, a: Expr) -> Expr:
    if isinstance(a, Constant):
        folded = _fold_unary(op, a.value)
        if folded is not None:
            return Constant(folded)
    if op == "neg" and isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary(op, a)


def _simplify_binary(op: str, a: Expr, b: Expr) -> Expr:
    if isinstance(a, Constant) and isinstance(b, Constant):
        folded = _fold_binary(op, a.value, b.value)
        if folded is not None:
            return Constant(folded)
    if op == "add":
        if _is_const(a, 0.0):
            return b
        if _is_const(b, 0.0):
            return a
    elif op == "sub":
        if _is_const(b, 0.0):
            return a
        if _is_const(a, 0.0):
            return _simplify_unary("neg", b)
        if a == b:
            return ZERO
    elif op == "mul":
        if _is_const(a, 0.0) or _is_const(b, 0.0):
            return ZERO
        if _is_const(a, 1.0):
            return b
        if _is_const(b, 1.0):
            return a
        if isinstance(b, Constant) and not isinstance(a, Constant):
            return _simplify_binary("mul", b, a)
        if isinstance(a, Constant):
            if isinstance(b, Constant):
                return Binary(op, a, b)
            if a.value == -1.0:
                return _simplify_unary("neg", b)
            if _is_scaled(b) and math.isfinite(a.value * b.left.value):
                return _simplify_binary("mul", Constant(a.value * b.left.value), b.right)
        else:
            if _is_scaled(a):
                return _simplify_binary("mul", a.left, _simplify_binary("mul", a.right, b))
            if _is_scaled(b):
                return _simplify_binary("mul", b.left, _simplify_binary("mul", a, b.right))
    elif op == "div":
        if _is_const(b, 1.0):
            return a
        if _is_const(a, 0.0):
            return ZERO
    elif op == "pow":
        if _is_const(b, 1.0):
            return a
        if _is_const(b, 0.0) and not _is_const(a, 0.0):
            return ONE
    return Binary(op, a, b)


def _is_scaled(e: Expr) -> bool:
    return isinstance(e, Binary) and e.op == "mul" and isinstance(e.left, Constant)


# ---------------------------------------------------------------------------
# Printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {"add": " + ", "sub": " - ", "mul": "*", "div": "/", "pow": "^"}
_ATOM = 5


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _PREC["neg"]
    if isinstance(e, Constant) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _PREC["neg"]
    return _ATOM


def _wrap(e: Expr, parens: bool) -> str:
    s = to_string(e)
    return f"({s})" if parens else s


def to_string(e: Expr) -> str:
    """Render as text that :func:`parse` reads back to the same tree."""
    if isinstance(e, Constant):
        return _format_number(e.value)
    if isinstance(e, NamedConstant):
        return e.name
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(e.arg, _prec(e.arg) < _PREC["neg"])
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        if e.op == "pow":
            left = _wrap(e.left, _prec(e.left) <= p)
            right = _wrap(e.right, _prec(e.right) < _PREC["neg"])
        else:
            left = _wrap(e.left, _prec(e.left) < p)
            right = _wrap(e.right, _prec(e.right) <= p)
        return left + _SYMBOL[e.op] + right
    raise TypeError(f"not an expression: {e!r}")
