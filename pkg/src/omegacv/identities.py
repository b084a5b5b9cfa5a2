"""Randomized check of the Omega-calculus identities.

Each row draws ``instances`` random (f, g, Omega, point) cases from a fixed
seed and records the worst error against the row's tolerance.  Errors are
relative to max(1, |lhs|, |rhs|) unless a row says otherwise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .expr import Constant, Expr, Unary, Variable, differentiate, lambdify, parse, simplify, substitute
from .integration import (QuadratureConfig, ToleranceNotReachedWarning, ftc_backward, ftc_forward,
                          integration_by_parts_defect, j_omega)
from .operators import OmegaFunction, omega_derivative_numeric, omega_derivative_symbolic
from .variational import fundamental_lemma_probe, leibniz_defect

DEFAULT_DOMAIN = (0.5, 2.0)

_TERMS = (
    "{a}*x^{k}", "sin({a}*x)", "cos({a}*x)", "exp({c}*x)", "ln(x + {d})",
    "sqrt(x + {d})", "x/(1 + {d}*x^2)", "{a}*x + {b}", "tanh({a}*x)", "cosh({c}*x)",
)
_OUTER = ("sin(x)", "exp(x/3)", "x^2", "x^3 - 2*x", "cos(2*x)")
_OMEGAS = (
    "x", "{s}*x", "2*exp(x/2)", "exp({s}*x/2)", "x + {s}*x^3", "sinh(x) + {s}*x",
    "ln(x + 1) + {s}*x", "x^3 + {s}*x", "sqrt(x) + {s}*x", "tanh(x) + {s}*x",
)


@dataclass
class PropertyRow:
    name: str
    instances: int
    max_error: float
    tolerance: float
    passed: bool


def _num(v: float) -> str:
    return f"({v:.6g})"


def _fill(template: str, rng: np.random.Generator) -> str:
    a = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
    return template.format(
        a=_num(a), b=_num(rng.uniform(-2, 2)), c=_num(rng.uniform(-1, 1)),
        d=_num(rng.uniform(1.0, 3.0)), k=int(rng.integers(1, 5)), s=_num(rng.uniform(0.5, 2.0)))


def random_function(rng: np.random.Generator) -> Expr:
    """A smooth expression in x built from two random terms."""
    t1 = _fill(_TERMS[rng.integers(len(_TERMS))], rng)
    t2 = _fill(_TERMS[rng.integers(len(_TERMS))], rng)
    glue = (" + ", "*", " - ")[rng.integers(3)]
    return parse(f"({t1}){glue}({t2})")


def random_omega(rng: np.random.Generator, domain=DEFAULT_DOMAIN) -> OmegaFunction:
    return OmegaFunction(parse(_fill(_OMEGAS[rng.integers(len(_OMEGAS))], rng)), domain,
                         positivity_samples=1001)


class _Faulty:
    """An Omega whose derivative is scaled, to show that the suite catches errors."""

    def __init__(self, w: OmegaFunction, factor: float):
        self.w = w
        self.omega_prime = simplify(w.omega_prime * factor)


def _rel(lhs, rhs) -> float:
    return float(abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))


def run_identity_suite(seed: int = 0, instances: int = 100, omega: OmegaFunction | None = None,
                       fault: str | None = None,
                       cfg: QuadratureConfig = QuadratureConfig()) -> list[PropertyRow]:
    """Run every identity row; ``omega`` fixes the weight instead of drawing it.

    ``fault="product"`` multiplies Omega' by 1.01 in one operand of the
    product rule, which must make that row fail.
    """
    rng = np.random.default_rng(seed)
    domain = omega.domain if omega is not None else DEFAULT_DOMAIN
    lo, hi = domain
    margin = 0.05 * (hi - lo)

    def draw():
        """(f, g, Omega, t) with f, g evaluable on the whole domain."""
        for _ in range(100):
            w = omega if omega is not None else random_omega(rng, domain)
            f, g = random_function(rng), random_function(rng)
            grid = np.linspace(lo, hi, 257)
            try:
                for e in (f, g, differentiate(f, "x"), differentiate(g, "x")):
                    vals = lambdify(e)(grid)
                    if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > 1e6:
                        raise ArithmeticError
            except ArithmeticError:
                continue
            return f, g, w, float(rng.uniform(lo + margin, hi - margin))
        raise RuntimeError("could not draw an evaluable instance")

    def D(e: Expr, w) -> Callable:
        return lambdify(omega_derivative_symbolic(e, w))

    checks: dict[str, tuple[float, Callable[[], float]]] = {}

    def row(name, tol):
        def deco(fn):
            checks[name] = (tol, fn)
            return fn
        return deco

    @row("linearity of D_Omega", 1e-9)
    def _():
        f, g, w, t = draw()
        a, b = rng.uniform(-3, 3, 2)
        lhs = D(simplify(a * f + b * g), w)(t)
        return _rel(lhs, a * D(f, w)(t) + b * D(g, w)(t))

    @row("power rule", 1e-9)
    def _():
        _, _, w, t = draw()
        p = float(rng.uniform(-3, 3))
        lhs = D(Variable("x") ** p, w)(t)
        return _rel(lhs, p * t ** (p - 1) / w.prime(t))

    @row("constant rule", 0.0)
    def _():
        _, _, w, t = draw()
        c = float(rng.uniform(-5, 5))
        sym = abs(D(Constant(c), w)(t))
        num = abs(omega_derivative_numeric(lambda s: c + 0.0 * s, w, t, 1e-4))
        return max(sym, num)

    @row("product rule", 1e-9)
    def _():
        f, g, w, t = draw()
        wg = _Faulty(w, 1.01) if fault == "product" else w
        ff, gf = lambdify(f), lambdify(g)
        lhs = D(simplify(f * g), w)(t)
        return _rel(lhs, ff(t) * D(g, wg)(t) + gf(t) * D(f, w)(t))

    @row("quotient rule", 1e-9)
    def _():
        for _ in range(100):
            f, g, w, t = draw()
            ff, gf = lambdify(f), lambdify(g)
            if abs(gf(t)) > 0.1:
                break
        lhs = D(simplify(f / g), w)(t)
        return _rel(lhs, (gf(t) * D(f, w)(t) - ff(t) * D(g, w)(t)) / gf(t) ** 2)

    @row("chain rule", 1e-9)
    def _():
        _, g, w, t = draw()
        outer = parse(_OUTER[rng.integers(len(_OUTER))])
        composite = substitute(outer, {"x": g})
        gt = lambdify(g)(t)
        lhs = D(composite, w)(t)
        return _rel(lhs, lambdify(differentiate(outer, "x"))(gt) * D(g, w)(t))

    @row("limit quotient matches f'/Omega'", 1e-6)
    def _():
        f, _, w, t = draw()
        num = omega_derivative_numeric(lambdify(f), w, t, 1e-4)
        return _rel(num, D(f, w)(t))

    @row("FTC: J(D_Omega f) = f(t) - f(a)", 1e-9)
    def _():
        f, _, w, t = draw()
        ff = lambdify(f)
        return _rel(ftc_forward(f, w, lo, t, cfg), ff(t) - ff(lo))

    @row("FTC: D_Omega J(f) = f", 1e-6)
    def _():
        f, _, w, t = draw()
        return _rel(ftc_backward(f, w, lo, t, cfg=cfg), lambdify(f)(t))

    @row("integration by parts", 1e-9)
    def _():
        f, g, w, t = draw()
        return abs(integration_by_parts_defect(f, g, w, lo, t, cfg)) / max(
            1.0, j_omega(simplify(f * f + g * g), w, lo, t, cfg).value)

    @row("linearity of J", 1e-10)
    def _():
        f, g, w, t = draw()
        k1, k2 = rng.uniform(-3, 3, 2)
        lhs = j_omega(simplify(k1 * f + k2 * g), w, lo, t, cfg).value
        rhs = k1 * j_omega(f, w, lo, t, cfg).value + k2 * j_omega(g, w, lo, t, cfg).value
        return _rel(lhs, rhs)

    @row("positivity: f >= 0 => J(f) >= 0", 0.0)
    def _():
        f, _, w, t = draw()
        return max(0.0, -j_omega(simplify(f * f), w, lo, t, cfg).value)

    @row("monotonicity: f >= g => J(f) >= J(g)", 1e-12)
    def _():
        f, u, w, t = draw()
        g = simplify(f - u * u)
        return max(0.0, j_omega(g, w, lo, t, cfg).value - j_omega(f, w, lo, t, cfg).value)

    @row("triangle: |J(f)| <= J(|f|)", 1e-12)
    def _():
        f, _, w, t = draw()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ToleranceNotReachedWarning)
            gap = abs(j_omega(f, w, lo, t, cfg).value) - j_omega(
                Unary("abs", f), w, lo, t, cfg).value
        return max(0.0, gap)

    @row("fundamental lemma detects nonzero g", 0.0)
    def _():
        f, _, w, _t = draw()
        zero_ok = fundamental_lemma_probe(parse("0"), w, lo, hi, 8)
        nonzero_detected = not fundamental_lemma_probe(f, w, lo, hi, 8, tol=1e-10)
        return 0.0 if (zero_ok and nonzero_detected) else 1.0

    @row("Leibniz rule under J", 1e-8)
    def _():
        f, g, w, t = draw()
        ft = substitute(f, {"x": Variable("t")})
        kernel = simplify(ft * g + parse("sin(t*x/3)"))
        x0 = float(np.clip(t, lo + 2e-3, hi - 2e-3))
        return abs(leibniz_defect(kernel, w, lo, hi, x0, cfg)) / max(
            1.0, abs(j_omega(lambda s: lambdify(kernel, ("t", "x"))(s, x0), w, lo, hi, cfg).value))

    @row("reduction (Omega = x): D_Omega is d/dx", 0.0)
    def _():
        f, _, _, t = draw()
        ident = OmegaFunction.identity(domain, positivity_samples=101)
        return 0.0 if omega_derivative_symbolic(f, ident) == differentiate(f, "x") else 1.0

    @row("reduction (Omega = x): J is the Riemann integral", 1e-10)
    def _():
        f, _, _, t = draw()
        ident = OmegaFunction.identity(domain, positivity_samples=101)
        ff = lambdify(f)
        ref, _ = quad(ff, lo, t, epsabs=1e-13, epsrel=1e-13)
        return _rel(j_omega(f, ident, lo, t, cfg).value, ref)

    rows = []
    for name, (tol, fn) in checks.items():
        worst = max(fn() for _ in range(instances))
        rows.append(PropertyRow(name, instances, worst, tol, worst <= tol))
    return rows

