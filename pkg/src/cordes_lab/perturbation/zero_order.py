"""Zero-order perturbation: -L_gamma u = (1 + delta g) u^p on B_1, u = 0 on the boundary.

With u = w + phi and L = L_gamma + p w^{p-1} the correction solves

    -L(phi) = delta g |w+phi|^p + |w+phi|^p - w^p - p w^{p-1} phi

and the map J_delta(phi) = psi, -L(psi) = right side at phi, is iterated from
phi = 0. For gamma > N-2 the iteration runs in X (sigma < 0). For gamma < N-2 it
runs in the split norm

    ||phi|| = sup_r (|phi_0| + |phi_0'|) + ||phi_1||_X

with the radial part solved through the explicit K0 operator and the
non-radial part in X with sigma from the window that excludes k = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoContractionError
from ..grid import RadialGrid
from ..harmonics import sphere_area
from ..linear_solver import LinearizedSolver, mode_eigenvalue
from ..operator_core import Case, ProblemParams, sigma_window
from ..radial_solver import RadialProfile, evaluate_w
from ..weighted_spaces import ModeProfile, add_modes, x_norm
from .fields import TensorGrid

log = logging.getLogger(__name__)

BURN_IN = 2
STALL_LIMIT = 5


def active_route(params: ProblemParams) -> str:
    """'X' for gamma > N-2, 'W_hat' otherwise."""
    return "X" if params.gamma > params.N - 2 else "W_hat"


def default_sigma(params: ProblemParams, route: str) -> float:
    case = Case.TWO if route == "X" else Case.THREE
    lo, hi = sigma_window(case, params.N, params.gamma)
    return 0.5 * (lo + hi)


def radial_mode(grid: RadialGrid, N: int, values, derivs=None) -> ModeProfile:
    """Mode-0 profile of the radial function with the given samples."""
    c = math.sqrt(sphere_area(N - 1))  # psi_0 = 1/c
    d1, d2 = (None, None) if derivs is None else derivs
    return ModeProfile(
        0,
        grid,
        c * np.asarray(values, dtype=float),
        None if d1 is None else c * np.asarray(d1, dtype=float),
        None if d2 is None else c * np.asarray(d2, dtype=float),
    )


def g_constant(grid: RadialGrid, N: int, value: float = 1.0) -> list[ModeProfile]:
    return [radial_mode(grid, N, np.full(grid.n, value))]


def g_radial_bump(grid: RadialGrid, N: int) -> list[ModeProfile]:
    """g(x) = (1 - |x|^2)^2."""
    return [radial_mode(grid, N, (1 - grid.r**2) ** 2)]


def g_from_function(grid: RadialGrid, N: int, fn, k_max: int) -> list[ModeProfile]:
    """Zonal modes 0..k_max of g(r, cos(theta)) by angular quadrature."""
    T = TensorGrid(grid, N, k_max)
    coeffs, _ = T.project(fn(T.r, T.cos), k_max, check_budget=False)
    return [ModeProfile(k, grid, coeffs[:, k]) for k in range(k_max + 1)]


@dataclass
class ZeroOrderConfig:
    params: ProblemParams
    delta: float
    g_modes: list
    R: float = 0.1  # ball radius relative to sup w
    max_iter: int = 60
    tol: float = 1e-7  # PDE residual required for success
    step_tol: float = 1e-11  # iteration stops once diff <= step_tol * max(1, norm)
    m: int | None = None
    grid: RadialGrid = field(default_factory=RadialGrid)
    n_theta: int | None = None

    def __post_init__(self):
        if not 0 < self.R <= 1:
            raise ValueError("R must lie in (0, 1]")
        if self.max_iter < 1 or not self.tol > 0 or not self.step_tol > 0:
            raise ValueError("max_iter >= 1 and positive tolerances required")
        for g in self.g_modes:
            if g.grid != self.grid:
                raise ValueError("g modes must live on the configured grid")

    @property
    def mode_budget(self) -> int:
        if self.m is not None:
            return self.m
        kg = max((g.k for g in self.g_modes), default=0)
        return 0 if kg == 0 else kg + 2


@dataclass
class FixedPointTrace:
    iterate_norms: list = field(default_factory=list)
    diff_norms: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    tails: list = field(default_factory=list)
    final_residual: float = math.inf
    residual_per_mode: dict = field(default_factory=dict)
    positivity: float = -math.inf
    grad_sup_outer: float = math.inf
    positive_certified: bool = False
    boundary_positive: bool = False
    converged: bool = False
    tol: float = 1e-7
    route: str = "X"
    sigma: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.converged and self.final_residual <= self.tol

    @property
    def K0(self) -> float:
        """Largest contraction ratio after the burn-in."""
        tail = self.contraction_ratios[BURN_IN:]
        return max(tail) if tail else (max(self.contraction_ratios) if self.contraction_ratios else 0.0)

    def rows(self):
        """(iter, norm, diff, ratio, residual) rows for the trace CSV."""
        out = []
        for n, (nv, dv) in enumerate(zip(self.iterate_norms, self.diff_norms)):
            ratio = self.contraction_ratios[n - 1] if n >= 1 else math.nan
            res = self.residuals[n] if n < len(self.residuals) else math.nan
            out.append((n + 1, nv, dv, ratio, res))
        return out

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "success": self.success,
            "iterations": len(self.iterate_norms),
            "route": self.route,
            "sigma": self.sigma,
            "final_norm": self.iterate_norms[-1] if self.iterate_norms else 0.0,
            "K0": self.K0,
            "final_residual": self.final_residual,
            "residual_per_mode": {str(k): v for k, v in self.residual_per_mode.items()},
            "min_u": self.positivity,
            "grad_sup_outer": self.grad_sup_outer,
            "positive_certified": self.positive_certified,
            "boundary_positive": self.boundary_positive,
            "max_tail": max(self.tails) if self.tails else 0.0,
            **self.extras,
        }


class ActiveNorm:
    """X norm or the split norm, depending on the route."""

    def __init__(self, params: ProblemParams, route: str):
        self.params, self.route = params, route
        self.c0 = 1.0 / math.sqrt(sphere_area(params.N - 1))

    def __call__(self, modes: list[ModeProfile]) -> float:
        if not modes:
            return 0.0
        if self.route == "X":
            return x_norm(modes, self.params).norm_value
        rad = [m for m in modes if m.k == 0]
        rest = [m for m in modes if m.k > 0]
        val = 0.0
        if rad:
            m0 = rad[0]
            val = self.c0 * float(np.max(np.abs(m0.a) + np.abs(m0.a_prime)))
        if rest and any(np.any(m.a) for m in rest):
            val += x_norm(rest, self.params).norm_value
        return val


def _w_samples(w: RadialProfile, grid: RadialGrid):
    wv, dw, d2w = evaluate_w(w, grid.r)
    return np.maximum(wv, 0.0), dw, d2w


class _Problem:
    """Shared machinery for both fixed-point problems."""

    def __init__(self, params, w, grid, m, n_theta, route, extra_k=0):
        self.params, self.w, self.grid, self.m = params, w, grid, m
        self.route = route
        self.T = TensorGrid(grid, params.N, max(m, extra_k), n_theta)
        self.wv, self.dw, self.d2w = _w_samples(w, grid)
        self.w_mode = radial_mode(grid, params.N, self.wv, (self.dw, self.d2w))
        self.w_field = self.wv[:, None]
        self.solver = LinearizedSolver(w, params, grid)
        self.norm = ActiveNorm(params, route)

    def solve_modes(self, coeffs: np.ndarray) -> list[ModeProfile]:
        """L psi_k = coeffs[:, k] for every mode in the budget."""
        out = []
        for k in range(self.m + 1):
            b = coeffs[:, k]
            if self.route == "W_hat" and k == 0:
                rep = self.solver.solve_k0_route(b)
            else:
                rep = self.solver.solve(k, b)
            out.append(rep.solution)
        return out

    def zero_modes(self):
        z = np.zeros(self.grid.n)
        return [ModeProfile(k, self.grid, z, z, z) for k in range(self.m + 1)]

    def u_modes(self, phi):
        return add_modes([self.w_mode], phi)

    def certify(self, phi, trace: FixedPointTrace):
        T = self.T
        u = self.w_field + T.scalar(phi)
        trace.positivity = float(np.min(u[:-1]))  # u(1) = 0 by construction
        _, grad, _ = T.cartesian(phi)
        outer = self.grid.r > 0.5
        gnorm = np.sqrt(np.sum(grad**2, axis=-1))
        trace.grad_sup_outer = float(np.max(gnorm[outer]))
        w1 = abs(float(self.dw[-1]))
        trace.positive_certified = bool(trace.positivity > 0 and trace.grad_sup_outer < w1 / 2)
        trace.boundary_positive = self.boundary_positive(phi)
        trace.extras["w_prime_at_one"] = float(self.dw[-1])

    def boundary_positive(self, phi) -> bool:
        """u > 0 at radii 1 - 2^-j (j = 2..40) on every angular node."""
        rs = 1.0 - 2.0 ** -np.arange(2, 41, dtype=float)
        wv, _, _ = evaluate_w(self.w, rs)
        spl = self.grid.spline(np.stack([m.a for m in phi], axis=1))
        coeffs = spl(np.log(rs))
        vals = wv[:, None] + coeffs @ self.T.ang.psi[[m.k for m in phi]]
        return bool(np.all(vals > 0))

    def independent_second(self, modes):
        return {m.k: self.grid.derivative(m.a_prime) for m in modes}


def mode_residual(k, params, mode: ModeProfile, d2a, rhs, scale):
    """|mode operator(a) + rhs| scaled by max(scale, term magnitudes) per node."""
    N, g = params.N, params.gamma
    r = mode.grid.r
    lam = mode_eigenvalue(k, N)
    lhs = (1 + g) * d2a + (N - 1) * mode.a_prime / r - lam * mode.a / r**2
    terms = (1 + g) * np.abs(d2a) + (N - 1) * np.abs(mode.a_prime / r) + lam * np.abs(mode.a / r**2)
    return float(np.max(np.abs(lhs + rhs) / np.maximum(scale, terms)))


class ZeroOrderProblem(_Problem):
    def __init__(self, config: ZeroOrderConfig, w: RadialProfile):
        p0 = config.params
        route = active_route(p0)
        sigma = p0.sigma if p0.sigma is not None else default_sigma(p0, route)
        params = p0.with_(sigma=sigma)
        kg = max((g.k for g in config.g_modes), default=0)
        super().__init__(params, w, config.grid, config.mode_budget, config.n_theta, route, kg)
        self.config = config
        self.g_field = self.T.scalar(config.g_modes)

    def rhs_field(self, phi):
        p, delta = self.params.p, self.config.delta
        phi_f = self.T.scalar(phi)
        u = self.w_field + phi_f
        up = np.abs(u) ** p
        w = self.w_field
        return delta * self.g_field * up + up - w**p - p * w ** (p - 1) * phi_f

    def J(self, phi):
        coeffs, tail = self.T.project(self.rhs_field(phi), self.m)
        return self.solve_modes(-coeffs), tail

    def probe_constant(self) -> float:
        """||L^{-1}(g w^p)|| / sup|g w^p| in the active norm (at least 1)."""
        data = self.g_field * self.w_field**self.params.p
        sup = float(np.max(np.abs(data)))
        if sup == 0:
            return 1.0
        coeffs, _ = self.T.project(data, self.m, check_budget=False)
        return max(1.0, self.norm(self.solve_modes(-coeffs)) / sup)

    def residual(self, phi):
        """Per-mode residual of L_gamma u + (1 + delta g)|u|^p with independent u''."""
        u = self.u_modes(phi)
        field_u = self.T.scalar(u)
        src = (1 + self.config.delta * self.g_field) * np.abs(field_u) ** self.params.p
        coeffs, _ = self.T.project(src, self.m, check_budget=False)
        scale = max(1.0, float(np.max(np.abs(field_u))) ** self.params.p)
        d2 = self.independent_second(u)
        return {
            m.k: mode_residual(m.k, self.params, m, d2[m.k], coeffs[:, m.k], scale) for m in u
        }


def _iterate(problem, max_iter, step_tol, trace: FixedPointTrace):
    phi = problem.zero_modes()
    stall = 0
    for n in range(max_iter):
        new, tail = problem.J(phi)
        diff = problem.norm(add_modes(new, phi, -1.0))
        size = problem.norm(new)
        trace.iterate_norms.append(size)
        trace.diff_norms.append(diff)
        trace.tails.append(tail)
        if n >= 1:
            prev = trace.diff_norms[-2]
            ratio = diff / prev if prev > 0 else 0.0
            trace.contraction_ratios.append(ratio)
            stall = stall + 1 if ratio >= 1 else 0
            if stall >= STALL_LIMIT:
                raise NoContractionError(
                    f"no contraction at this (delta, R): {STALL_LIMIT} consecutive ratios >= 1 "
                    f"(last {ratio:.4g})"
                )
        phi = new
        log.debug("iter %d norm %.6e diff %.6e", n + 1, size, diff)
        if diff <= step_tol * max(1.0, size):
            trace.converged = True
            break
    return phi


def into_condition(C: float, R: float, delta: float, p: float, route: str) -> dict:
    """Record C (|delta| + R^2 + R^p) <= R (C doubled on the split route).

    Also reports the first delta in the halving schedule from ``delta`` that
    satisfies it, or None when R alone is too large.
    """
    factor = 2.0 if route == "W_hat" else 1.0

    def lhs(d):
        return factor * C * (abs(d) + R**2 + R**p)

    d = abs(delta)
    while d > 1e-12 and lhs(d) > R:
        d /= 2
    return {
        "C": C,
        "lhs": lhs(delta),
        "R": R,
        "holds": bool(lhs(delta) <= R),
        "delta_into": d if lhs(d) <= R else None,
    }


def fixed_point_zero_order(config: ZeroOrderConfig, w: RadialProfile):
    """Banach iteration phi_{n+1} = J_delta(phi_n) from phi_0 = 0."""
    problem = ZeroOrderProblem(config, w)
    params = problem.params
    trace = FixedPointTrace(route=problem.route, sigma=params.sigma, tol=config.tol)
    trace.extras["sigma_le_2_over_p_minus_1"] = bool(params.sigma <= 2 / (params.p - 1))
    R_abs = config.R * float(np.max(problem.wv))
    if config.delta != 0:
        C = problem.probe_constant()
        trace.extras["into"] = into_condition(C, config.R, config.delta, params.p, problem.route)
    phi = _iterate(problem, config.max_iter, config.step_tol, trace)
    res = problem.residual(phi)
    trace.residual_per_mode = res
    trace.final_residual = max(res.values())
    trace.residuals = [math.nan] * (len(trace.iterate_norms) - 1) + [trace.final_residual]
    trace.extras["R_abs"] = R_abs
    trace.extras["in_ball"] = bool(trace.iterate_norms[-1] <= R_abs) if trace.iterate_norms else True
    problem.certify(phi, trace)
    if not trace.positive_certified:
        log.warning("positivity not certified (min u = %.3g)", trace.positivity)
    return phi, trace


def linearized_response(config: ZeroOrderConfig, w: RadialProfile):
    """phi_lin with -L(phi_lin) = g w^p, solved on the same route as the iteration."""
    problem = ZeroOrderProblem(config, w)
    data = problem.g_field * problem.w_field**problem.params.p
    coeffs, _ = problem.T.project(data, problem.m)
    return problem.solve_modes(-coeffs), problem


def linearization_check(config: ZeroOrderConfig, w: RadialProfile) -> dict:
    """||phi(delta) - delta phi_lin|| at delta and delta/2; the ratio should be near 4."""
    lin, problem = linearized_response(config, w)
    errs = []
    for d in (config.delta, config.delta / 2):
        cfg = ZeroOrderConfig(**{**config.__dict__, "delta": d})
        phi, _ = fixed_point_zero_order(cfg, w)
        errs.append(problem.norm(add_modes(phi, lin, -d)))
    ratio = errs[0] / errs[1] if errs[1] > 0 else math.inf
    return {"errors": errs, "ratio": ratio, "deltas": [config.delta, config.delta / 2]}


def delta_scaling(config: ZeroOrderConfig, w: RadialProfile, deltas=(0.02, 0.01, 0.005)):
    """||phi(delta)|| / delta over a decreasing delta schedule."""
    out = []
    for d in deltas:
        cfg = ZeroOrderConfig(**{**config.__dict__, "delta": d})
        phi, trace = fixed_point_zero_order(cfg, w)
        out.append(trace.iterate_norms[-1] / d)
    return out


def zero_order_rhs(phi: list[ModeProfile], w: RadialProfile, config: ZeroOrderConfig, n_theta=None):
    """Projected right side (modes 0..m) and the truncation tail fraction."""
    cfg = config if n_theta is None else ZeroOrderConfig(**{**config.__dict__, "n_theta": n_theta})
    problem = ZeroOrderProblem(cfg, w)
    if not phi:
        phi = problem.zero_modes()
    coeffs, tail = problem.T.project(problem.rhs_field(phi), problem.m)
    return [ModeProfile(k, config.grid, coeffs[:, k]) for k in range(problem.m + 1)], tail
