"""Direct minimization of the discretized Omega-functional.

This is the independent oracle: it never looks at an Euler-Lagrange
equation.  Trajectories are piecewise linear on a uniform mesh and the
objective is the midpoint rule per cell,

    E(y) = sum_k L(x_k, ybar_k, s_k / Omega'(x_k)) * Omega'(x_k) * h,

with x_k, ybar_k the cell midpoints and s_k = (y_{k+1} - y_k) / h.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .expr import differentiate, lambdify
from .integration import QuadratureConfig
from .variational import (MODES, TrajectorySolution, VariationalProblem, build_el_residual,
                          el_residual_norm, evaluate_functional)


class IterationCapReached(RuntimeWarning):
    pass


class NonFiniteObjective(ArithmeticError):
    pass


@dataclass(frozen=True)
class DirectConfig:
    """Settings for :func:`minimize_discretized`.

    ``metric="h1"`` measures the gradient in the discrete H^1_0 inner product
    (the descent direction solves a tridiagonal system) which keeps the
    iteration count independent of ``n``; ``metric="euclidean"`` is plain
    steepest descent.
    """

    n: int = 200
    gradient_tol: float = 1e-8
    max_iter: int = 20_000
    armijo: float = 1e-4
    backtrack: float = 0.5
    metric: str = "h1"
    max_backtracks: int = 60

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need at least 4 mesh intervals")
        if self.gradient_tol <= 0 or self.max_iter < 1:
            raise ValueError("tolerances must be positive")
        if self.metric not in ("h1", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")


class DiscreteObjective:
    """Midpoint-rule objective and its analytic gradient for a fixed mesh."""

    def __init__(self, p: VariationalProblem, n: int):
        self.p = p
        self.n = n
        self.h = (p.b - p.a) / n
        self.mesh = np.linspace(p.a, p.b, n + 1)
        self.mid = 0.5 * (self.mesh[:-1] + self.mesh[1:])
        self.wp = p.omega.prime(self.mid)
        names = ("x", "y", "z")
        L = p.lagrangian
        self.L = lambdify(L, names)
        self.L_y = lambdify(differentiate(L, "y"), names)
        self.L_z = lambdify(differentiate(L, "z"), names)

    def _args(self, y):
        ybar = 0.5 * (y[:-1] + y[1:])
        z = np.diff(y) / self.h / self.wp
        return self.mid, ybar, z

    def cells(self, y) -> np.ndarray:
        try:
            c = self.L(*self._args(y)) * self.wp * self.h
        except ArithmeticError as exc:
            raise NonFiniteObjective(str(exc)) from exc
        if not np.all(np.isfinite(c)):
            raise NonFiniteObjective("the Lagrangian is not finite along the iterate")
        return c

    def value(self, y) -> float:
        return float(np.cumsum(self.cells(y))[-1])

    def gradient(self, y) -> np.ndarray:
        """Derivative of the objective with respect to the interior nodal values."""
        args = self._args(y)
        ly = self.L_y(*args) * self.wp * self.h * 0.5
        lz = self.L_z(*args)
        # cell k touches nodes k (slope -1/h) and k+1 (slope +1/h)
        per_left = ly - lz
        per_right = ly + lz
        return per_right[:-1] + per_left[1:]


def _h1_direction(g: np.ndarray, h: float) -> np.ndarray:
    m = len(g)
    ab = np.empty((3, m))
    ab[0, :] = -1.0 / h
    ab[1, :] = 2.0 / h
    ab[2, :] = -1.0 / h
    return -solve_banded((1, 1), ab, g)


def _initial_step(obj: DiscreteObjective, y, cells, d, slope: float) -> float:
    """Minimizer of the quadratic through phi(0), phi'(0) and phi(1); 1 if unusable."""
    trial = y.copy()
    trial[1:-1] += d
    try:
        phi1 = float(np.sum(obj.cells(trial) - cells))
    except NonFiniteObjective:
        return 1.0
    curvature = phi1 - slope
    if not curvature > 0:
        return 1.0
    return float(np.clip(-slope / (2.0 * curvature), 1e-8, 1e8))


def minimize_discretized(p: VariationalProblem, cfg: DirectConfig = DirectConfig(),
                         callback=None) -> TrajectorySolution:
    """Gradient descent with Armijo backtracking from the linear interpolant.

    Returns the last iterate; ``converged`` is False (and
    :class:`IterationCapReached` is warned) if the gradient tolerance was
    not met.  ``residual_norm`` holds the final gradient infinity norm.
    ``callback(iteration, y, objective)`` sees the start and every accepted iterate.
    """
    obj = DiscreteObjective(p, cfg.n)
    x = obj.mesh
    y = p.y_a + (p.y_b - p.y_a) * (x - p.a) / (p.b - p.a)
    y[0], y[-1] = p.y_a, p.y_b
    cells = obj.cells(y)
    g = obj.gradient(y)
    gnorm = float(np.max(np.abs(g)))
    it = 0
    stalled = False
    if callback is not None:
        callback(0, y.copy(), float(np.cumsum(cells)[-1]))
    while gnorm > cfg.gradient_tol and it < cfg.max_iter:
        d = _h1_direction(g, obj.h) if cfg.metric == "h1" else -g
        slope = float(g @ d)
        step = _initial_step(obj, y, cells, d, slope)
        for _ in range(cfg.max_backtracks):
            trial = y.copy()
            trial[1:-1] += step * d
            try:
                tcells = obj.cells(trial)
            except NonFiniteObjective:
                step *= cfg.backtrack
                continue
            # summing per-cell differences keeps the decrease test accurate near the optimum
            decrease = float(np.sum(tcells - cells))
            if decrease <= cfg.armijo * step * slope:
                break
            step *= cfg.backtrack
        else:
            stalled = True
            break
        y, cells = trial, tcells
        g = obj.gradient(y)
        gnorm = float(np.max(np.abs(g)))
        it += 1
        if callback is not None:
            callback(it, y.copy(), float(np.cumsum(cells)[-1]))
    converged = gnorm <= cfg.gradient_tol
    if not converged:
        why = "line search stalled" if stalled else f"iteration cap {cfg.max_iter} reached"
        warnings.warn(f"direct method stopped with gradient norm {gnorm:.3g}: {why}",
                      IterationCapReached, stacklevel=2)
    return TrajectorySolution.from_values(x, y, p.omega, residual_norm=gnorm,
                                          newton_iterations=it, converged=converged,
                                          label="direct")


def finite_difference_gradient(obj: DiscreteObjective, y, step: float = 1e-6) -> np.ndarray:
    """Central differences of the discrete objective in each interior nodal value."""
    out = np.empty(len(y) - 2)
    for k in range(1, len(y) - 1):
        up, down = y.copy(), y.copy()
        up[k] += step
        down[k] -= step
        out[k - 1] = float(np.sum(obj.cells(up) - obj.cells(down))) / (2 * step)
    return out


def discrete_objective(p: VariationalProblem, traj: TrajectorySolution) -> float:
    return DiscreteObjective(p, traj.n).value(traj.values)


@dataclass
class ComparisonReport:
    candidate_values: dict[str, float]
    direct_value: float
    direct_discrete_value: float
    differences: dict[str, float]
    residuals: dict[str, dict[str, float]]
    ordering_holds: bool
    tolerance: float
    verdicts: list[str] = field(default_factory=list)


def compare(p: VariationalProblem, candidates, cfg: DirectConfig = DirectConfig(),
            quad: QuadratureConfig = QuadratureConfig(), tol: float = 1e-6,
            direct: TrajectorySolution | None = None) -> ComparisonReport:
    """Audit EL candidates against the direct minimizer.

    ``candidates`` is a sequence of (label, TrajectorySolution).  All
    functional values use :func:`evaluate_functional` with the same quadrature
    settings.  ``ordering_holds`` records whether the direct value is within
    ``tol`` of or below every candidate.
    """
    for label, traj in candidates:
        if abs(traj.values[0] - p.y_a) > 1e-12 or abs(traj.values[-1] - p.y_b) > 1e-12:
            raise ValueError(f"candidate {label!r} violates the boundary conditions")
    if direct is None:
        direct = minimize_discretized(p, cfg)
    direct_value = evaluate_functional(p, direct, quad)
    forms = {mode: build_el_residual(p, mode) for mode in MODES}

    values, diffs, residuals = {}, {}, {}
    for label, traj in candidates:
        values[label] = evaluate_functional(p, traj, quad)
        diffs[label] = values[label] - direct_value
        residuals[label] = {mode: el_residual_norm(form, traj) for mode, form in forms.items()}
    residuals["direct"] = {mode: el_residual_norm(form, direct) for mode, form in forms.items()}

    ordering = all(direct_value <= v + tol for v in values.values())
    verdicts = []
    for label, diff in diffs.items():
        if diff > tol:
            verdicts.append(f"{label}: value exceeds the direct minimum by {diff:.6e}; "
                            f"this extremal does not minimize the functional")
        elif diff < -tol:
            verdicts.append(f"{label}: value is below the direct minimum by {-diff:.6e}; "
                            f"ORDERING VIOLATED")
        else:
            verdicts.append(f"{label}: agrees with the direct minimum within {tol:g}")
    if not direct.converged:
        verdicts.append("direct: optimizer did not reach its gradient tolerance; oracle suspect")
    verdicts.append("optimality ordering direct <= candidates + tol: "
                    + ("holds" if ordering else "VIOLATED"))
    if not ordering:
        warnings.warn("direct minimizer is worse than an EL candidate", RuntimeWarning, stacklevel=2)
    return ComparisonReport(values, direct_value, discrete_objective(p, direct), diffs, residuals,
                            ordering, tol, verdicts)
