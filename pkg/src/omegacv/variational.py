"""The Omega variational problem: Euler-Lagrange residuals, BVP solver, functionals.

The problem is to minimize J(L(x, y, D_Omega y))(a, b) over y with fixed end
values.  ``z`` stands for D_Omega y = y'/Omega'(x) inside the Lagrangian.

Two Euler-Lagrange forms are available:

``omega_paper``
    d/dx[ L_z / Omega'(x) ] - L_y = 0, i.e. D_Omega(D^3 L) = D^2 L multiplied
    through by Omega'(x) > 0, with the Omega-partials divided by Omega' at x.
``weighted_classical``
    d/dx[ L_z ] - L_y Omega'(x) = 0, the classical equation of the weighted
    integral int L(x, y, y'/Omega') Omega' dx.

Both agree when Omega is the identity.  For other weights their extremals
differ; :mod:`omegacv.direct` provides an independent minimizer to tell which
one actually minimizes the functional.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .expr import (Binary, Constant, Expr, Variable, differentiate, evaluate, free_variables, lambdify,
                   simplify, substitute)
from .integration import QuadratureConfig, j_omega
from .operators import OmegaFunction, omega_derivative_numeric, omega_partial

MODES = ("omega_paper", "weighted_classical")
DEGENERACY_THRESHOLD = 1e-12


class SolverError(RuntimeError):
    pass


class DegenerateEL(SolverError):
    """The coefficient of y'' in the Euler-Lagrange residual vanishes."""


class NoConvergence(SolverError):
    pass


@dataclass(frozen=True)
class VariationalProblem:
    lagrangian: Expr
    omega: OmegaFunction
    a: float
    b: float
    y_a: float
    y_b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if (float(self.a), float(self.b)) != self.omega.domain:
            raise ValueError(f"interval [{self.a}, {self.b}] differs from the Omega domain "
                             f"{list(self.omega.domain)}")
        extra = free_variables(self.lagrangian) - {"x", "y", "z"}
        if extra:
            raise ValueError(f"the Lagrangian may depend on x, y, z only, found {sorted(extra)}")

    @classmethod
    def build(cls, lagrangian, omega, a, b, y_a, y_b, **kw) -> "VariationalProblem":
        from .expr import as_expr

        w = omega if isinstance(omega, OmegaFunction) else OmegaFunction(as_expr(omega), (a, b), **kw)
        return cls(as_expr(lagrangian), w, float(a), float(b), float(y_a), float(y_b))


@dataclass(frozen=True)
class EulerLagrangeForm:
    """Residual in (x, y, yp, ypp) whose zero set is the Euler-Lagrange equation."""

    mode: str
    residual: Expr
    ypp_coefficient: Expr
    note: str = ""


@dataclass(frozen=True)
class SolverConfig:
    residual_tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 30


@dataclass
class TrajectorySolution:
    mesh: np.ndarray
    values: np.ndarray
    yprime: np.ndarray
    d_omega_y: np.ndarray
    residual_norm: float = 0.0
    newton_iterations: int = 0
    converged: bool = True
    label: str = ""

    @property
    def n(self) -> int:
        return len(self.mesh) - 1

    @classmethod
    def from_values(cls, mesh, values, w: OmegaFunction, **kw) -> "TrajectorySolution":
        mesh = np.asarray(mesh, dtype=float)
        values = np.asarray(values, dtype=float)
        yprime = np.gradient(values, mesh, edge_order=2)
        return cls(mesh, values, yprime, yprime / w.prime(mesh), **kw)

    @classmethod
    def from_expr(cls, y: Expr, p: VariationalProblem, n: int, label: str = "") -> "TrajectorySolution":
        """Sample a closed-form trajectory (exact derivatives) on a uniform mesh."""
        mesh = np.linspace(p.a, p.b, n + 1)
        yf, ypf = lambdify(y), lambdify(differentiate(y, "x"))
        yp = ypf(mesh)
        return cls(mesh, yf(mesh), yp, yp / p.omega.prime(mesh), label=label)


@dataclass(frozen=True)
class Variation:
    """An admissible variation eta with eta(a) = eta(b) = 0."""

    expr: Expr
    a: float
    b: float

    def __post_init__(self):
        extra = free_variables(self.expr) - {"x"}
        if extra:
            raise ValueError(f"a variation depends on x only, found {sorted(extra)}")
        for end in (self.a, self.b):
            if abs(evaluate(self.expr, {"x": end})) > 1e-12:
                raise ValueError(f"variation {self.expr} does not vanish at x = {end}")


@dataclass
class ConvexityReport:
    samples: int
    violations: list = field(default_factory=list)
    seed: int = 0

    @property
    def verdict(self) -> str:
        return "violated" if self.violations else "no-violation-found"


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals


def _total_derivative(e: Expr) -> Expr:
    """d/dx of e(x, y, yp) along a trajectory (yp' = ypp)."""
    return simplify(
        differentiate(e, "x")
        + Variable("yp") * differentiate(e, "y")
        + Variable("ypp") * differentiate(e, "yp"))


def build_el_residual(p: VariationalProblem, mode: str = "omega_paper") -> EulerLagrangeForm:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    L = p.lagrangian
    omega_prime = p.omega.omega_prime
    z_of_yp = {"z": simplify(Binary("div", Variable("yp"), omega_prime))}
    L_z = simplify(substitute(differentiate(L, "z"), z_of_yp))
    L_y = simplify(substitute(differentiate(L, "y"), z_of_yp))
    if mode == "omega_paper":
        residual = simplify(_total_derivative(simplify(Binary("div", L_z, omega_prime))) - L_y)
        note = "d/dx[L_z/Omega'] - L_y  (Omega-EL equation times Omega')"
    else:
        residual = simplify(_total_derivative(L_z) - simplify(Binary("mul", L_y, omega_prime)))
        note = "d/dx[L_z] - L_y*Omega'  (classical EL of the weighted integral)"
    return EulerLagrangeForm(mode, residual, differentiate(residual, "ypp"), note)


class _Residual:
    """Compiled residual with the partial derivatives Newton needs."""

    names = ("x", "y", "yp", "ypp")

    def __init__(self, form: EulerLagrangeForm):
        r = form.residual
        self.f = lambdify(r, self.names)
        self.f_y = lambdify(differentiate(r, "y"), self.names)
        self.f_yp = lambdify(differentiate(r, "yp"), self.names)
        self.f_ypp = lambdify(form.ypp_coefficient, self.names)

    @staticmethod
    def stencil(y, h):
        yp = (y[2:] - y[:-2]) / (2 * h)
        ypp = (y[2:] - 2 * y[1:-1] + y[:-2]) / (h * h)
        return yp, ypp

    def rows(self, x, y, h):
        yp, ypp = self.stencil(y, h)
        return self.f(x[1:-1], y[1:-1], yp, ypp)


def el_residual_norm(form: EulerLagrangeForm, traj: TrajectorySolution) -> float:
    """Infinity norm of the collocated residual at interior nodes."""
    h = traj.mesh[1] - traj.mesh[0]
    rows = _Residual(form).rows(traj.mesh, traj.values, h)
    return float(np.max(np.abs(rows)))


def solve_el_bvp(p: VariationalProblem, form: EulerLagrangeForm, n: int = 200,
                 cfg: SolverConfig = SolverConfig()) -> TrajectorySolution:
    """Damped Newton on the second-order central-difference collocation system.

    Raises :class:`DegenerateEL` if |coefficient of y''| < 1e-12 at an
    iterate node and :class:`NoConvergence` after ``cfg.max_iter`` steps.
    """
    if n < 4:
        raise ValueError("need at least 4 mesh intervals")
    res = _Residual(form)
    x = np.linspace(p.a, p.b, n + 1)
    h = (p.b - p.a) / n
    y = p.y_a + (p.y_b - p.y_a) * (x - p.a) / (p.b - p.a)
    y[0], y[-1] = p.y_a, p.y_b
    xi = x[1:-1]

    def norm_at(v):
        try:
            rows = res.rows(x, v, h)
        except ArithmeticError:
            return np.inf, None
        m = float(np.max(np.abs(rows)))
        return (m if np.isfinite(m) else np.inf), rows

    fnorm, F = norm_at(y)
    if F is None:
        raise NoConvergence("residual cannot be evaluated at the initial guess")
    for it in range(cfg.max_iter + 1):
        yp, ypp = res.stencil(y, h)
        c = res.f_ypp(xi, y[1:-1], yp, ypp)
        if np.any(np.abs(c) < DEGENERACY_THRESHOLD):
            k = int(np.argmax(np.abs(c) < DEGENERACY_THRESHOLD))
            raise DegenerateEL(f"coefficient of y'' vanishes at x = {xi[k]:.6g} "
                               f"(|{form.ypp_coefficient}| < {DEGENERACY_THRESHOLD:g})")
        if fnorm <= cfg.residual_tol:
            return TrajectorySolution.from_values(x, y, p.omega, residual_norm=fnorm,
                                                  newton_iterations=it, label=form.mode)
        if it == cfg.max_iter:
            break
        r_y = res.f_y(xi, y[1:-1], yp, ypp)
        r_yp = res.f_yp(xi, y[1:-1], yp, ypp)
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = (r_yp / (2 * h) + c / h**2)[:-1]
        ab[1, :] = r_y - 2 * c / h**2
        ab[2, :-1] = (-r_yp / (2 * h) + c / h**2)[1:]
        step = solve_banded((1, 1), ab, -F)
        lam = 1.0
        for _ in range(cfg.max_halvings + 1):
            trial = y.copy()
            trial[1:-1] += lam * step
            tnorm, tF = norm_at(trial)
            if tnorm < fnorm:
                break
            lam *= 0.5
        else:
            if np.max(np.abs(step)) <= 1e-13 * (1.0 + np.max(np.abs(y))):
                # residual already at its rounding floor
                return TrajectorySolution.from_values(
                    x, y, p.omega, residual_norm=fnorm, newton_iterations=it + 1,
                    converged=False, label=form.mode)
            raise NoConvergence(f"line search failed at Newton step {it + 1} "
                                f"(residual {fnorm:.3g})")
        y, fnorm, F = trial, tnorm, tF
    raise NoConvergence(f"no convergence after {cfg.max_iter} Newton steps "
                        f"(residual {fnorm:.3g} > {cfg.residual_tol:g})")


# ---------------------------------------------------------------------------
# Functionals and first variations


def _trajectory_functions(y, p: VariationalProblem):
    """(y, y') callables for a closed-form Expr or a discrete trajectory."""
    if isinstance(y, Expr):
        return lambdify(y), lambdify(differentiate(y, "x")), None
    spline = CubicSpline(y.mesh, y.values)
    return spline, spline.derivative(), y.n


def _aligned(cfg: QuadratureConfig, cells: int | None) -> QuadratureConfig:
    if cells is None or cfg.panels % cells == 0:
        return cfg
    panels = cells * -(-cfg.panels // cells)
    return QuadratureConfig(panels, cfg.tol, cfg.max_doublings)


def evaluate_functional(p: VariationalProblem, y, cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """J(L(x, y, D_Omega y))(a, b) for a closed form or a trajectory.

    Trajectories are interpolated by a not-a-knot cubic spline; quadrature
    panels are aligned with the mesh cells.
    """
    yf, ypf, cells = _trajectory_functions(y, p)
    Lf = lambdify(p.lagrangian, ("x", "y", "z"))
    w = p.omega

    def integrand(s):
        return Lf(s, yf(s), ypf(s) / w.prime(s))

    return j_omega(integrand, w, p.a, p.b, _aligned(cfg, cells)).value


def polynomial_variation(coeffs, a: float, b: float) -> Variation:
    """(x - a)(b - x) * sum_k coeffs[k] x^k."""
    x = Variable("x")
    poly = Constant(0.0)
    for k, c in enumerate(coeffs):
        poly = poly + Constant(float(c)) * x ** Constant(float(k))
    return Variation(simplify((x - Constant(a)) * (Constant(b) - x) * poly), float(a), float(b))


def random_polynomial_variations(count: int, a: float, b: float, degree: int = 3,
                                 seed: int = 0) -> list[Variation]:
    rng = np.random.default_rng(seed)
    return [polynomial_variation(rng.uniform(-1, 1, degree + 1), a, b) for _ in range(count)]


def _as_variation(eta, p: VariationalProblem) -> Variation:
    if isinstance(eta, Variation):
        return eta
    from .expr import as_expr

    return Variation(as_expr(eta), p.a, p.b)


def _first_variation(p, y, eta, cfg, d_y: Expr, d_z: Expr) -> float:
    """J(d_y * eta + d_z * D_Omega eta)(a, b) along y."""
    eta = _as_variation(eta, p)
    yf, ypf, cells = _trajectory_functions(y, p)
    w = p.omega
    names = ("x", "y", "z")
    fy, fz = lambdify(d_y, names), lambdify(d_z, names)
    ef, epf = lambdify(eta.expr), lambdify(differentiate(eta.expr, "x"))

    def integrand(s):
        wp = w.prime(s)
        ys, zs = yf(s), ypf(s) / wp
        d_eta = epf(s) / wp
        return fy(s, ys, zs) * ef(s) + fz(s, ys, zs) * d_eta

    return j_omega(integrand, w, p.a, p.b, _aligned(cfg, cells)).value


def first_variation_omega(p: VariationalProblem, y, eta,
                          cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """J(D^2 L * eta + D^3 L * D_Omega eta)(a, b) with trajectory-mode Omega-partials."""
    L, w = p.lagrangian, p.omega
    return _first_variation(p, y, eta, cfg, omega_partial(L, 2, w), omega_partial(L, 3, w))


def first_variation_gateaux(p: VariationalProblem, y, eta,
                            cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Exact derivative d/de of the functional at y + e*eta, e = 0.

    Equals int (L_y eta Omega' + L_z eta') dx.
    """
    L = p.lagrangian
    return _first_variation(p, y, eta, cfg, differentiate(L, "y"), differentiate(L, "z"))


# ---------------------------------------------------------------------------
# Sufficiency and the lemmas


def check_joint_convexity(L: Expr, w: OmegaFunction, region, deltas, samples: int = 10_000,
                          seed: int = 0, slack: float = 1e-12) -> ConvexityReport:
    """Monte-Carlo test of the gradient inequality with Omega-partials.

    ``region`` is (x_lo, x_hi, y_lo, y_hi, z_lo, z_hi); ``deltas`` is
    (d_lo, d_hi) for both increments or (y1_lo, y1_hi, z1_lo, z1_hi).
    Records every sample where L(x, y+y1, z+z1) - L(x, y, z) is below
    D^2 L * y1 + D^3 L * z1 by more than ``slack``.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    if len(deltas) == 2:
        deltas = tuple(deltas) * 2
    x_lo, x_hi, y_lo, y_hi, z_lo, z_hi = (float(v) for v in region)
    rng = np.random.default_rng(seed)
    x = rng.uniform(x_lo, x_hi, samples)
    y = rng.uniform(y_lo, y_hi, samples)
    z = rng.uniform(z_lo, z_hi, samples)
    y1 = rng.uniform(deltas[0], deltas[1], samples)
    z1 = rng.uniform(deltas[2], deltas[3], samples)
    names = ("x", "y", "z")
    Lf = lambdify(L, names)
    dy, dz = lambdify(omega_partial(L, 2, w), names), lambdify(omega_partial(L, 3, w), names)
    lhs = Lf(x, y + y1, z + z1) - Lf(x, y, z)
    rhs = dy(x, y, z) * y1 + dz(x, y, z) * z1
    bad = np.flatnonzero(lhs - rhs < -slack)
    violations = [tuple(float(v) for v in (x[k], y[k], z[k], y1[k], z1[k], lhs[k], rhs[k]))
                  for k in bad]
    return ConvexityReport(samples, violations, seed)


def quartic_bump(alpha: float, beta: float):
    """(x - alpha)^2 (beta - x)^2 on [alpha, beta], zero elsewhere."""
    def bump(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= alpha) & (x <= beta)
        return np.where(inside, (x - alpha) ** 2 * (beta - x) ** 2, 0.0)

    return bump


def bump_integrals(g: Expr, w: OmegaFunction, a: float, b: float, subintervals: int = 8,
                   cfg: QuadratureConfig = QuadratureConfig()) -> list[float]:
    """J(g * bump)(a, b) for quartic bumps supported on each subinterval of [a, b]."""
    gf = lambdify(g)
    edges = np.linspace(a, b, subintervals + 1)
    out = []
    for alpha, beta in zip(edges[:-1], edges[1:]):
        bump = quartic_bump(alpha, beta)
        # the bump vanishes outside [alpha, beta], so integrate over its support only
        out.append(j_omega(lambda s: gf(s) * bump(s), w, alpha, beta, cfg).value)
    return out


def fundamental_lemma_probe(g: Expr, w: OmegaFunction, a: float, b: float,
                            subintervals: int = 8, tol: float = 1e-10,
                            cfg: QuadratureConfig = QuadratureConfig()) -> bool:
    """True iff every bump integral and max|g| on a dense grid are within ``tol``.

    A ``False`` result means some bump integral (or g itself) is detectably
    nonzero.
    """
    integrals = bump_integrals(g, w, a, b, subintervals, cfg)
    gmax = float(np.max(np.abs(lambdify(g)(np.linspace(a, b, 2001)))))
    return all(abs(v) <= tol for v in integrals) and gmax <= tol


def leibniz_defect(f: Expr, w: OmegaFunction, a: float, b: float, x0: float,
                   cfg: QuadratureConfig = QuadratureConfig(), h: float = 1e-5) -> float:
    """D_Omega F(x0) - J(f_x(t, x0) / Omega'(x0)) for F(x) = J_t(f(t, x))(a, b).

    ``f`` is an expression in (t, x); the integral runs over t.
    """
    ff = lambdify(f, ("t", "x"))
    fx = lambdify(differentiate(f, "x"), ("t", "x"))

    def F(xv):
        return j_omega(lambda t: ff(t, xv), w, a, b, cfg).value

    lhs = omega_derivative_numeric(F, w, x0, h)
    wp0 = w.prime(x0)
    rhs = j_omega(lambda t: fx(t, x0) / wp0, w, a, b, cfg).value
    return lhs - rhs
