"""Expanded normal form for display: a sum of monomials.

Each monomial is a coefficient times powers of opaque factors times at most
one ``exp`` factor whose argument is itself expanded, so that
``exp(a)*exp(b)`` merges and ``exp(x/2)^-2`` becomes ``exp(-x)``.  Sums in a
denominator, non-constant exponents and function calls other than ``exp``
stay opaque (their arguments are expanded recursively).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .expr import Binary, Constant, Expr, Unary, simplify, to_string

# products whose expansion would exceed this many monomials are kept opaque
MAX_TERMS = 256


@dataclass
class _Term:
    coef: float
    powers: dict[str, tuple[Expr, float]] = field(default_factory=dict)
    exparg: dict[str, "_Term"] = field(default_factory=dict)

    def key(self) -> str:
        parts = [f"{k}^{p!r}" for k, (_, p) in sorted(self.powers.items())]
        if self.exparg:
            parts.append("exp(" + _poly_key(self.exparg) + ")")
        return "*".join(parts)


def _poly_key(poly: dict[str, _Term]) -> str:
    return " + ".join(f"{t.coef!r}*{k}" for k, t in sorted(poly.items()))


def _add_into(acc: dict[str, _Term], t: _Term) -> None:
    k = t.key()
    if k in acc:
        merged = acc[k].coef + t.coef
        if merged == 0.0:
            del acc[k]
        else:
            acc[k] = _Term(merged, acc[k].powers, acc[k].exparg)
    elif t.coef != 0.0:
        acc[k] = t


def _sum(*polys) -> dict[str, _Term]:
    acc: dict[str, _Term] = {}
    for poly in polys:
        for t in poly.values():
            _add_into(acc, t)
    return acc


def _scale_poly(poly, c: float) -> dict[str, _Term]:
    return _sum({k: _Term(t.coef * c, t.powers, t.exparg) for k, t in poly.items()})


def _mul_terms(s: _Term, t: _Term) -> _Term:
    powers = dict(s.powers)
    for k, (base, p) in t.powers.items():
        q = powers.get(k, (base, 0.0))[1] + p
        if q == 0.0:
            powers.pop(k, None)
        else:
            powers[k] = (base, q)
    return _Term(s.coef * t.coef, powers, _sum(s.exparg, t.exparg))


def _mul(p1, p2) -> dict[str, _Term] | None:
    if len(p1) * len(p2) > MAX_TERMS:
        return None
    acc: dict[str, _Term] = {}
    for s in p1.values():
        for t in p2.values():
            _add_into(acc, _mul_terms(s, t))
    return acc


def _term_power(t: _Term, k: float) -> _Term | None:
    if k != int(k):
        # (u^2)^0.5 is |u| and (u*v)^0.5 needs u, v >= 0; leave those opaque
        if t.coef < 0 or len(t.powers) > 1:
            return None
        if any(p == int(p) and int(p) % 2 == 0 for _, p in t.powers.values()):
            return None
    powers = {key: (base, p * k) for key, (base, p) in t.powers.items()}
    return _Term(t.coef ** k, powers, _scale_poly(t.exparg, k))


def _atom(e: Expr, power: float = 1.0) -> dict[str, _Term]:
    t = _Term(1.0, {to_string(e): (e, power)})
    return {t.key(): t}


def _const(c: float) -> dict[str, _Term]:
    return _sum({"": _Term(c)})


def _expand(e: Expr) -> dict[str, _Term]:
    if isinstance(e, Constant):
        return _const(e.value)
    if isinstance(e, Unary):
        if e.op == "neg":
            return _scale_poly(_expand(e.arg), -1.0)
        arg = _expand(e.arg)
        if e.op == "exp":
            return {"": _Term(1.0, {}, arg)} if arg else _const(1.0)
        return _atom(Unary(e.op, _rebuild(arg)))
    if isinstance(e, Binary):
        if e.op in ("add", "sub"):
            right = _expand(e.right)
            return _sum(_expand(e.left), right if e.op == "add" else _scale_poly(right, -1.0))
        left, right = _expand(e.left), _expand(e.right)
        if e.op == "mul":
            prod = _mul(left, right)
            return prod if prod is not None else _atom(Binary("mul", _rebuild(left), _rebuild(right)))
        if e.op == "div":
            if not right:
                return _atom(Binary("div", _rebuild(left), Constant(0.0)))
            if len(right) == 1:
                inv = _term_power(next(iter(right.values())), -1.0)
                if inv is not None:
                    return _mul(left, {inv.key(): inv})
            return _mul(left, _atom(_rebuild(right), -1.0))
        # pow
        if len(right) == 1 and "" in right and not right[""].exparg:
            k = right[""].coef
            if len(left) == 1:
                t = _term_power(next(iter(left.values())), k)
                if t is not None:
                    return {t.key(): t}
            if k == int(k) and 2 <= k <= 4:
                acc = left
                for _ in range(int(k) - 1):
                    acc = _mul(acc, left)
                    if acc is None:
                        break
                if acc is not None:
                    return acc
            if left:
                return _atom(_rebuild(left), k)
        return _atom(Binary("pow", _rebuild(left), _rebuild(right)))
    return _atom(e)


def _rebuild_term(t: _Term) -> Expr:
    num: Expr = Constant(abs(t.coef))
    den: Expr = Constant(1.0)
    for key in sorted(t.powers):
        base, p = t.powers[key]
        factor = base if abs(p) == 1.0 else Binary("pow", base, Constant(abs(p)))
        if p > 0:
            num = Binary("mul", num, factor)
        else:
            den = Binary("mul", den, factor)
    if t.exparg:
        num = Binary("mul", num, Unary("exp", _rebuild(t.exparg)))
    out = simplify(Binary("div", num, den))
    return out


def _rebuild(poly: dict[str, _Term]) -> Expr:
    if not poly:
        return Constant(0.0)
    # the constant monomial goes last, the rest in key order
    ordered = sorted(poly.items(), key=lambda kv: (kv[0] == "", kv[0]))
    out: Expr | None = None
    for _, t in ordered:
        mag = _rebuild_term(t)
        if out is None:
            out = mag if t.coef > 0 else Unary("neg", mag)
        else:
            out = Binary("add" if t.coef > 0 else "sub", out, mag)
    return simplify(out)


def expand(e: Expr) -> Expr:
    """Equivalent expression as an expanded sum of monomials."""
    return _rebuild(_expand(e))
