"""Omega derivatives: symbolic and numeric forms, partials, admissibility."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import Binary, Expr, Variable, differentiate, free_variables, lambdify, parse, simplify, substitute

DEFAULT_POSITIVITY_SAMPLES = 10_001
ADMISSIBILITY_TOL = 1e-9


class NotIncreasingError(ValueError):
    """Omega' is not positive somewhere on the working interval."""


class DegenerateStepError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OmegaFunction:
    """A weight Omega(x) together with its first two derivatives.

    Construction certifies Omega' > 0 on ``positivity_samples`` uniform points
    of ``domain`` (endpoints included) and raises :class:`NotIncreasingError`
    otherwise.  Instances are callable: ``w(x)`` evaluates Omega.
    """

    omega: Expr
    domain: tuple[float, float]
    positivity_samples: int = DEFAULT_POSITIVITY_SAMPLES
    omega_prime: Expr = field(init=False)
    omega_second: Expr = field(init=False)
    _fns: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        omega = parse(self.omega) if isinstance(self.omega, str) else self.omega
        object.__setattr__(self, "omega", omega)
        a, b = (float(v) for v in self.domain)
        if not a < b:
            raise ValueError(f"empty working interval [{a}, {b}]")
        object.__setattr__(self, "domain", (a, b))
        extra = free_variables(omega) - {"x"}
        if extra:
            raise ValueError(f"omega may depend on x only, found {sorted(extra)}")
        if self.positivity_samples < 2:
            raise ValueError("positivity_samples must be at least 2")
        prime = differentiate(omega, "x")
        second = differentiate(prime, "x")
        object.__setattr__(self, "omega_prime", prime)
        object.__setattr__(self, "omega_second", second)
        fns = (lambdify(omega), lambdify(prime), lambdify(second))
        object.__setattr__(self, "_fns", fns)

        grid = np.linspace(a, b, self.positivity_samples)
        try:
            values = fns[1](grid)
        except ArithmeticError as exc:
            raise NotIncreasingError(f"omega' cannot be evaluated on [{a}, {b}]: {exc}") from exc
        bad = ~(values > 0)
        if np.any(bad) or not (fns[1](a) > 0 and fns[1](b) > 0):
            where = grid[np.argmax(bad)] if np.any(bad) else (a if not fns[1](a) > 0 else b)
            raise NotIncreasingError(
                f"omega' = {prime} is not positive on [{a}, {b}] (e.g. at x = {where:.6g})")

    @classmethod
    def identity(cls, domain=(0.0, 1.0), **kw) -> "OmegaFunction":
        return cls(Variable("x"), domain, **kw)

    def __call__(self, x):
        return self._fns[0](x)

    def prime(self, x):
        return self._fns[1](x)

    def second(self, x):
        return self._fns[2](x)

    def with_domain(self, domain) -> "OmegaFunction":
        return OmegaFunction(self.omega, domain, self.positivity_samples)


@dataclass
class AdmissibilityReport:
    is_admissible: bool
    witnesses: list[tuple[float, float]]
    spread: float
    skipped: list[float] = field(default_factory=list)


def omega_derivative_symbolic(f: Expr, w: OmegaFunction, var: str = "x") -> Expr:
    """D_Omega f = f'/Omega'.  Variables other than ``var`` act as parameters."""
    omega_prime = w.omega_prime if var == "x" else substitute(w.omega_prime, {"x": Variable(var)})
    return simplify(Binary("div", differentiate(f, var), omega_prime))


def omega_derivative_numeric(f: Callable[[float], float], w: OmegaFunction, x0: float,
                             h: float = 1e-5) -> float:
    """Symmetric difference quotient (f(x0+h) - f(x0-h)) / (Omega(x0+h) - Omega(x0-h))."""
    den = w(x0 + h) - w(x0 - h)
    if abs(den) < 1e-14:
        raise DegenerateStepError(
            f"Omega(x0+h) - Omega(x0-h) = {den:.3g} is too small at x0={x0}, h={h}")
    return float((f(x0 + h) - f(x0 - h)) / den)


def omega_partial(f: Expr, i: int, w: OmegaFunction, mode: str = "trajectory",
                  slots: Sequence[str] = ("x", "y", "z")) -> Expr:
    """Omega-partial derivative of ``f`` in slot ``i`` (1-based).

    ``mode="literal"`` divides by Omega' evaluated at the slot variable itself;
    ``mode="trajectory"`` divides by Omega' evaluated at the independent
    variable ``x``, which is what the variational solver uses.
    """
    if not 1 <= i <= len(slots):
        raise IndexError(f"slot {i} out of range 1..{len(slots)}")
    if mode not in ("literal", "trajectory"):
        raise ValueError(f"unknown mode {mode!r}")
    slot = slots[i - 1]
    at = Variable(slot) if mode == "literal" else Variable("x")
    denom = substitute(w.omega_prime, {"x": at})
    return simplify(Binary("div", differentiate(f, slot), denom))


def check_admissible(f: Expr, w: OmegaFunction, samples: int = 101,
                     tol: float = ADMISSIBILITY_TOL) -> AdmissibilityReport:
    """Sample the ratio f'(x)/Omega(x) and report whether it is non-constant.

    The ratio uses Omega itself (not Omega') in the denominator.  Points where
    Omega vanishes are skipped.
    """
    if samples < 3:
        raise ValueError("need at least 3 samples")
    a, b = w.domain
    fprime = lambdify(differentiate(f, "x"))
    grid = np.linspace(a, b, samples)
    omega = w(grid)
    keep = omega != 0
    skipped = [float(x) for x in grid[~keep]]
    if not np.any(keep):
        raise ValueError("Omega vanishes at every sample point")
    xs = grid[keep]
    ratio = fprime(xs) / omega[keep]
    spread = float(np.max(ratio) - np.min(ratio))
    scale = max(float(np.max(np.abs(ratio))), 1e-300)
    return AdmissibilityReport(
        is_admissible=spread > tol * scale,
        witnesses=[(float(x), float(r)) for x, r in zip(xs, ratio)],
        spread=spread,
        skipped=skipped,
    )
