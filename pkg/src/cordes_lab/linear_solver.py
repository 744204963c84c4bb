"""Mode-by-mode solution of L_gamma phi = f and L phi = f on B_1.

For the mode ODE (1+gamma) a'' + (N-1) a'/r - lambda_k a/r^2 = b, a(1) = 0,
variation of parameters with the indicial roots beta^+ >= 0 >= beta^- gives

    (1+gamma)(beta^- - beta^+) a(r) = P(r) + Q(r) - P(1) r^{beta^+}
    P(r) = r^{beta^-} int_0^r b(tau) tau^{1-beta^-} dtau
    Q(r) = r^{beta^+} int_r^1 b(tau) tau^{1-beta^+} dtau

P and Q are accumulated interval by interval on the log grid with factors
(r_i/r_j)^{beta} <= 1, so nothing overflows near the origin. Data are
interpolated by local degree-5 Lagrange polynomials in u = log r, which makes
the whole map an explicit matrix on grid samples. Below r_min the data are
continued by their leading power law.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrabilityError, KernelEncounteredError, WindowError
from .grid import PanelRule, RadialGrid, tail_exponent
from .operator_core import (
    Case,
    ProblemParams,
    check_mode_allowed,
    indicial_roots,
    infer_case,
    mode_eigenvalue,
)
from .radial_solver import RadialProfile, evaluate_w
from .weighted_spaces import ModeProfile, x_norm, y_norm

log = logging.getLogger(__name__)

INTEGRABILITY_MARGIN = 1e-9
RCOND_FLOOR = 1e-13
# the origin form needs tau^{1-beta+} b integrable at 0 with this much room in the exponent
ORIGIN_FORM_MARGIN = 0.5
ORIGIN_FORM_MAX_BETA = 1.5


@lru_cache(maxsize=16)
def _panel_rule(grid: RadialGrid) -> PanelRule:
    return PanelRule(grid)


class GreenOperator:
    """Matrix form of the variation-of-parameters solution for one mode."""

    def __init__(self, k: int, N: int, gamma: float, grid: RadialGrid):
        self.k, self.N, self.gamma, self.grid = k, N, gamma, grid
        roots = indicial_roots(k, ProblemParams(N, gamma))
        self.beta_plus, self.beta_minus = roots.beta_plus, roots.beta_minus
        if self.beta_plus == self.beta_minus:
            raise WindowError("degenerate indicial roots (k = 0, gamma = N-2)", "gamma != N-2")
        self.lam = mode_eigenvalue(k, N)
        self.denom = (1 + gamma) * (self.beta_minus - self.beta_plus)
        self._build()

    def _left(self, beta):
        """Rows of r_i^beta int_{r_0}^{r_i} c tau^{1-beta} dtau on the grid samples c."""
        grid, rule = self.grid, _panel_rule(self.grid)
        u, h, n = grid.u, grid.h, grid.n
        un = rule.u_nodes
        W = rule.weight_matrix(np.exp(2 * un + beta * (u[1:, None] - un)))
        i = np.arange(n)[:, None]
        l = np.arange(n - 1)[None, :]
        lag = (i - l - 1).astype(float)
        E = np.where(lag >= 0, np.exp(beta * h * np.maximum(lag, 0.0)), 0.0)
        return np.asarray((W.T @ E.T).T)

    def _build(self):
        grid, rule = self.grid, _panel_rule(self.grid)
        bm, bp = self.beta_minus, self.beta_plus
        u, h, n = grid.u, grid.h, grid.n
        un = rule.u_nodes
        MP = self._left(bm)
        W_plus = rule.weight_matrix(np.exp(2 * un + bp * (u[:-1, None] - un)))
        i = np.arange(n)[:, None]
        l = np.arange(n - 1)[None, :]
        lead = (l - i).astype(float)
        E_plus = np.where(lead >= 0, np.exp(-bp * h * np.maximum(lead, 0.0)), 0.0)
        MQ = np.asarray((W_plus.T @ E_plus.T).T)
        rp = grid.r**bp
        self.tail_vec = np.exp(bm * (u - u[0]))  # P(r_i) per unit of P(r_0)
        D = self.denom
        self.A = (MP + MQ - np.outer(rp, MP[-1])) / D
        self.dA = (bm * MP + bp * MQ - bp * np.outer(rp, MP[-1])) / (grid.r[:, None] * D)
        self.tail_a = (self.tail_vec - rp * self.tail_vec[-1]) / D
        self.tail_da = (bm * self.tail_vec - bp * rp * self.tail_vec[-1]) / (grid.r * D)
        self.P_row = MP[-1]
        self._MP = MP if bp < ORIGIN_FORM_MAX_BETA else None
        self._origin = None

    def origin_form(self):
        """Matrices of the form accumulated from the origin (beta^+ < ORIGIN_FORM_MAX_BETA).

        Q(r) - r^{beta+} P(1) = r^{beta+} (R(1) - P(1)) - R(r), R(r) = r^{beta+} int_0^r b tau^{1-beta+}.
        R is O(r^2) for bounded data, so a = O(r^2) is no longer the difference of two
        O(r^{beta+}) terms and keeps its relative accuracy near the origin.
        """
        if self._origin is None:
            grid, D = self.grid, self.denom
            bm, bp = self.beta_minus, self.beta_plus
            MP, MR = self._MP, self._left(bp)
            # the r^{beta+} part stays rank one: folding it into A would round every
            # row at the O(r^{beta+}) scale, which is what this form avoids
            A = (MP - MR) / D
            dA = (bm * MP - bp * MR) / (grid.r[:, None] * D)
            jump = MR[-1] - MP[-1]
            tail_r = np.exp(bp * (grid.u - grid.u[0]))
            self._origin = (A, dA, jump, tail_r)
        return self._origin

    def uses_origin_form(self, alpha: float) -> bool:
        return self._MP is not None and alpha + 2 - self.beta_plus > ORIGIN_FORM_MARGIN

    def tail_integral(self, c: np.ndarray, alpha: float | None = None, beta: float | None = None) -> float:
        """r_0^beta int_0^{r_0} c tau^{1-beta} with c ~ c_0 (tau/r_0)^alpha (beta defaults to beta^-)."""
        if c[0] == 0:
            return 0.0
        if alpha is None:
            alpha = tail_exponent(c, self.grid)
        beta = self.beta_minus if beta is None else beta
        expo = alpha + 2 - beta
        if expo <= INTEGRABILITY_MARGIN:
            raise IntegrabilityError(
                f"data ~ r^{alpha:.6g} is not integrable against tau^(1-beta_k^-) at the "
                f"origin (k={self.k}, beta_k^-={self.beta_minus:.6g}); the window condition "
                "beta_k^- + sigma < 0 fails for this data",
                "beta_k^- + sigma < 0",
            )
        return float(c[0] * self.grid.r[0] ** 2 / expo)

    def apply(self, c: np.ndarray, alpha: float | None = None):
        """(a, a') for the data samples c."""
        if alpha is None:
            alpha = tail_exponent(c, self.grid)
        T = self.tail_integral(c, alpha)
        if not self.uses_origin_form(alpha):
            return self.A @ c + self.tail_a * T, self.dA @ c + self.tail_da * T
        A, dA, jump, tail_r = self.origin_form()
        TR = self.tail_integral(c, alpha, self.beta_plus)
        bm, bp, D, r = self.beta_minus, self.beta_plus, self.denom, self.grid.r
        P_t, R_t = self.tail_vec * T, tail_r * TR
        K = float(jump @ c) + R_t[-1] - P_t[-1]
        a = A @ c + (P_t - R_t + r**bp * K) / D
        da = dA @ c + (bm * P_t - bp * R_t) / (r * D) + bp * r ** (bp - 1) * K / D
        return a, da

    def C_k(self, c: np.ndarray, alpha: float | None = None) -> float:
        """-int_0^1 b tau^{1-beta^-} dtau."""
        return -float(self.P_row @ c + self.tail_vec[-1] * self.tail_integral(c, alpha))


@lru_cache(maxsize=256)
def green_operator(k: int, N: int, gamma: float, grid: RadialGrid) -> GreenOperator:
    return GreenOperator(k, N, gamma, grid)


def mode_operator(k, N, gamma, r, a, da, d2a, potential=None):
    """(1+gamma) a'' + (N-1) a'/r - lambda_k a/r^2 (+ V a)."""
    out = (1 + gamma) * d2a + (N - 1) * da / r - mode_eigenvalue(k, N) * a / r**2
    if potential is not None:
        out = out + potential * a
    return out


def second_derivative(k, N, gamma, r, a, da, rhs, potential=None):
    """a'' recovered algebraically from the mode ODE."""
    lhs = rhs - (N - 1) * da / r + mode_eigenvalue(k, N) * a / r**2
    if potential is not None:
        lhs = lhs - potential * a
    return lhs / (1 + gamma)


@dataclass
class ModeSolveReport:
    k: int
    solution: ModeProfile
    ode_residual_sup: float
    boundary_value: float
    norm_ratio: float | None = None
    C_k: float | None = None
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "k": self.k,
            "ode_residual_sup": self.ode_residual_sup,
            "boundary_value": self.boundary_value,
            "norm_ratio": self.norm_ratio,
            "C_k": self.C_k,
            **self.extras,
        }


def residual_sup(k, params: ProblemParams, sol: ModeProfile, b, potential=None):
    """Independent ODE residual, a'' taken from a spline derivative of a'.

    Each node is scaled by max(sup|b|, sum of the term magnitudes there): near
    r_min the terms a'/r and a/r^2 are O(1/r) and cancel, so the unscaled
    check only measures rounding in a' amplified by 1/(h r).
    """
    grid = sol.grid
    r = grid.r
    N, g = params.N, params.gamma
    d2a = grid.derivative(sol.a_prime)
    res = mode_operator(k, N, g, r, sol.a, sol.a_prime, d2a, potential) - b
    terms = (
        (1 + g) * np.abs(d2a)
        + (N - 1) * np.abs(sol.a_prime / r)
        + mode_eigenvalue(k, N) * np.abs(sol.a / r**2)
    )
    if potential is not None:
        terms = terms + np.abs(potential * sol.a)
    scale = float(np.max(np.abs(b))) if np.any(b) else 1.0
    return float(np.max(np.abs(res) / np.maximum(scale, terms)))


def _samples(b, grid: RadialGrid) -> np.ndarray:
    if callable(b):
        b = b(grid.r)
    elif isinstance(b, ModeProfile):
        b = b.a
    b = np.asarray(b, dtype=float)
    if b.shape != (grid.n,):
        raise ValueError(f"data has shape {b.shape}, expected ({grid.n},)")
    if not np.all(np.isfinite(b)):
        raise DomainError("data samples are not finite")
    return b


def _norm_ratio(sol: ModeProfile, b: np.ndarray, params: ProblemParams) -> float | None:
    if params.sigma is None:
        return None
    f = ModeProfile(sol.k, sol.grid, b)
    ny = y_norm([f], params).norm_value
    if ny == 0:
        return 0.0
    return x_norm([sol], params).norm_value / ny


def solve_cordes_mode(
    k: int,
    b,
    params: ProblemParams,
    grid: RadialGrid | None = None,
    with_norms: bool = True,
) -> ModeSolveReport:
    """Solve (1+gamma) a'' + (N-1) a'/r - lambda_k a/r^2 = b_k with a(1) = 0."""
    grid = grid or RadialGrid()
    b = _samples(b, grid)
    G = green_operator(k, params.N, params.gamma, grid)
    alpha = tail_exponent(b, grid)
    G.tail_integral(b, alpha)  # integrability first: names the failed window condition
    case = infer_case(params)
    check_mode_allowed(k, case)
    a, da = G.apply(b, alpha)
    d2a = second_derivative(k, params.N, params.gamma, grid.r, a, da, b)
    sol = ModeProfile(k, grid, a, da, d2a)
    return ModeSolveReport(
        k=k,
        solution=sol,
        ode_residual_sup=residual_sup(k, params, sol, b),
        boundary_value=abs(float(a[-1])),
        norm_ratio=_norm_ratio(sol, b, params) if with_norms else None,
        C_k=G.C_k(b, alpha),
        extras={"case": case.name, "beta_plus": G.beta_plus, "beta_minus": G.beta_minus},
    )


class K0Operator:
    """u = K0 g: (gamma+1) u'' + (N-1) u'/r = g, u(1) = 0, via the explicit

        h(r) = r^{-m} int_0^r tau^m g(tau)/(gamma+1) dtau,  m = (N-1)/(gamma+1),
        u(r) = -int_r^1 h.
    """

    def __init__(self, N: int, gamma: float, grid: RadialGrid):
        self.N, self.gamma, self.grid = N, gamma, grid
        self.m = (N - 1) / (gamma + 1)
        rule = _panel_rule(grid)
        u, h, n = grid.u, grid.h, grid.n
        un = rule.u_nodes
        W_h = rule.weight_matrix(np.exp(un + self.m * (un - u[1:, None])) / (gamma + 1))
        i = np.arange(n)[:, None]
        l = np.arange(n - 1)[None, :]
        lag = (i - l - 1).astype(float)
        E = np.where(lag >= 0, np.exp(-self.m * h * np.maximum(lag, 0.0)), 0.0)
        self.H = np.asarray((W_h.T @ E.T).T)
        self.tail_h = np.exp(-self.m * (u - u[0]))
        W_int = rule.weight_matrix(np.exp(un))  # int h dr over each interval
        S = np.triu(np.ones((n, n - 1)))  # row i sums intervals l >= i
        self.S = -np.asarray((W_int.T @ S.T).T)
        self.K = self.S @ self.H
        self.tail_u = self.S @ self.tail_h

    def tail(self, g: np.ndarray, alpha: float | None = None) -> float:
        if g[0] == 0:
            return 0.0
        if alpha is None:
            alpha = tail_exponent(g, self.grid)
        expo = alpha + self.m + 1
        if expo <= INTEGRABILITY_MARGIN or alpha + 2 <= INTEGRABILITY_MARGIN:
            raise IntegrabilityError(
                f"g ~ r^{alpha:.6g} makes h non-integrable at the origin", "alpha > -2"
            )
        return float(g[0] * self.grid.r[0] / (expo * (self.gamma + 1)))

    def apply(self, g: np.ndarray, alpha: float | None = None):
        T = self.tail(g, alpha)
        return self.K @ g + self.tail_u * T, self.H @ g + self.tail_h * T


@lru_cache(maxsize=32)
def k0_operator(N: int, gamma: float, grid: RadialGrid) -> K0Operator:
    return K0Operator(N, gamma, grid)


@dataclass
class K0Result:
    u: np.ndarray
    u_prime: np.ndarray
    C3: float
    residual: float


def k0_green_apply(
    g, params: ProblemParams, grid: RadialGrid | None = None, allow_singular: bool = False
) -> K0Result:
    """Radial solution of (gamma+1) u'' + (N-1) u'/r = g, u(1) = 0."""
    grid = grid or RadialGrid()
    g = _samples(g, grid)
    alpha = tail_exponent(g, grid)
    if not allow_singular and alpha < -1e-6 and np.max(np.abs(g[: grid.per_octave])) > np.max(
        np.abs(g[grid.per_octave :])
    ):
        raise DomainError(f"g is unbounded near the origin (~ r^{alpha:.4g})")
    K0 = k0_operator(params.N, params.gamma, grid)
    u, du = K0.apply(g, alpha)
    gsup = float(np.max(np.abs(g)))
    C3 = float(np.max(np.abs(u) + np.abs(du))) / gsup if gsup > 0 else 0.0
    d2u = grid.derivative(du)
    res = (params.gamma + 1) * d2u + (params.N - 1) * du / grid.r - g
    residual = float(np.max(np.abs(res))) / gsup if gsup > 0 else float(np.max(np.abs(res)))
    return K0Result(u, du, C3, residual)


def _potential(w: RadialProfile, grid: RadialGrid) -> np.ndarray:
    wv, _, _ = evaluate_w(w, grid.r)
    return w.params.p * np.maximum(wv, 0.0) ** (w.params.p - 1)


def _factor(M: np.ndarray, what: str):
    lu, piv = sla.lu_factor(M, check_finite=False)
    anorm = np.linalg.norm(M, 1)
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    if not rcond > RCOND_FLOOR:
        raise KernelEncounteredError(
            f"numerical kernel encountered in the {what} (rcond={rcond:.3g}); "
            "check parameters and sigma window"
        )
    return lu, piv, rcond


class LinearizedSolver:
    """L a = b per mode, L = L_gamma + p w^{p-1}, as a second-kind collocation system.

    ``a = G_k (b - V a)`` with V = p w^{p-1}; the dense system ``(I + G_k V) a = G_k b``
    is factored once per mode and cached.
    """

    def __init__(self, w: RadialProfile, params: ProblemParams, grid: RadialGrid | None = None):
        self.w, self.params = w, params
        self.grid = grid or RadialGrid()
        self.V = _potential(w, self.grid)
        self._lu = {}
        self._lu_k0 = None

    def _system(self, k):
        if k not in self._lu:
            grid = self.grid
            G = green_operator(k, self.params.N, self.params.gamma, grid)
            V, n = self.V, grid.n
            # tails of V a below r_min: a bounded near 0, exponent 0
            w0 = V[0] * grid.r[0] ** 2
            if G.uses_origin_form(0.0):
                # unknowns (a, K) with K the r^{beta+} coefficient of G(V a), kept out of the rows
                A, _, jump, tail_r = G.origin_form()
                bm, bp, D = G.beta_minus, G.beta_plus, G.denom
                M = np.zeros((n + 1, n + 1))
                M[:n, :n] = np.eye(n) + A * V[None, :]
                M[:n, 0] += (G.tail_vec / (2 - bm) - tail_r / (2 - bp)) * w0 / D
                M[:n, n] = grid.r**bp / D
                M[n, :n] = -jump * V
                M[n, 0] -= (tail_r[-1] / (2 - bp) - G.tail_vec[-1] / (2 - bm)) * w0
                M[n, n] = 1.0
            else:
                M = np.eye(n) + G.A * V[None, :]
                M[:, 0] += G.tail_a * w0 / (2 - G.beta_minus)
            lu, piv, rcond = _factor(M, f"collocation matrix for k={k}")
            self._lu[k] = (G, lu, piv, rcond)
        return self._lu[k]

    def solve(self, k: int, b, check_window: bool = True, with_norms: bool = False):
        """a + G_k(V a) = G_k b; G_k b may use either form, the system matrix is fixed per k."""
        grid, params = self.grid, self.params
        b = _samples(b, grid)
        G, lu, piv, rcond = self._system(k)
        alpha = tail_exponent(b, grid)
        if check_window:
            G.tail_integral(b, alpha)
            check_mode_allowed(k, infer_case(params))
        gb, _ = G.apply(b, alpha)
        n = grid.n
        rhs = gb if lu.shape[0] == n else np.append(gb, 0.0)
        a = sla.lu_solve((lu, piv), rhs, check_finite=False)[:n]
        # one pass over c = b - V a: G b and G(V a) each carry an O(1) r^{beta+}
        # coefficient that cancels, so differencing them would lose a' near 0
        a, da = G.apply(b - self.V * a, min(alpha, 0.0))
        d2a = second_derivative(k, params.N, params.gamma, grid.r, a, da, b, self.V)
        sol = ModeProfile(k, grid, a, da, d2a)
        return ModeSolveReport(
            k=k,
            solution=sol,
            ode_residual_sup=residual_sup(k, params, sol, b, self.V),
            boundary_value=abs(float(a[-1])),
            norm_ratio=_norm_ratio(sol, b, params) if with_norms else None,
            extras={"rcond": rcond, "route": "collocation"},
        )

    def solve_k0_route(self, b):
        """Radial solve through a + K0(V a) = K0(b) (sup-norm theory, 0 < gamma < N-2)."""
        grid, params = self.grid, self.params
        b = _samples(b, grid)
        K0 = k0_operator(params.N, params.gamma, grid)
        if self._lu_k0 is None:
            M = np.eye(grid.n) + K0.K * self.V[None, :]
            M[:, 0] += K0.tail_u * self.V[0] * grid.r[0] / ((K0.m + 1) * (params.gamma + 1))
            self._lu_k0 = _factor(M, "K0 system")
        lu, piv, rcond = self._lu_k0
        alpha = tail_exponent(b, grid)
        Tb = K0.tail(b, alpha)
        a = sla.lu_solve((lu, piv), K0.K @ b + K0.tail_u * Tb, check_finite=False)
        c = b - self.V * a
        Tc = Tb - self.V[0] * a[0] * grid.r[0] / ((K0.m + 1) * (params.gamma + 1))
        da = K0.H @ c + K0.tail_h * Tc
        d2a = second_derivative(0, params.N, params.gamma, grid.r, a, da, b, self.V)
        sol = ModeProfile(0, grid, a, da, d2a)
        return ModeSolveReport(
            k=0,
            solution=sol,
            ode_residual_sup=residual_sup(0, params, sol, b, self.V),
            boundary_value=abs(float(a[-1])),
            extras={"rcond": rcond, "route": "K0"},
        )


def solve_linearized_mode(k, b, w: RadialProfile, params: ProblemParams, grid=None):
    """One-shot wrapper around :class:`LinearizedSolver`."""
    return LinearizedSolver(w, params, grid).solve(k, b, with_norms=params.sigma is not None)


@dataclass
class KernelCheck:
    boundary_value: float
    trivial: bool
    k: int

    def __iter__(self):
        return iter((self.boundary_value, self.trivial))


def kernel_check(k: int, w: RadialProfile, params: ProblemParams, r0: float = 1e-4) -> KernelCheck:
    """Shoot the homogeneous linearized mode ODE from the admissible branch at 0.

    A nonzero normalised |a(1)| means no element of the kernel satisfies a(1) = 0.
    """
    N, g, p = params.N, params.gamma, params.p
    lam = mode_eigenvalue(k, N)
    V = lambda r: p * max(evaluate_w(w, r)[0], 0.0) ** (p - 1)  # noqa: E731
    if k == 0:
        c = -V(r0) / (2 * (N + g))
        y0 = [1 + c * r0**2, 2 * c * r0]
    else:
        bp = indicial_roots(k, params).beta_plus
        y0 = [1.0, bp / r0]  # a = (r/r0)^{beta+} to leading order

    def rhs(r, y):
        a, da = y
        return [da, (-(N - 1) * da / r + lam * a / r**2 - V(r) * a) / (1 + g)]

    res = solve_ivp(rhs, (r0, 1.0), y0, method="DOP853", rtol=1e-10, atol=1e-14, dense_output=True)
    rs = np.linspace(r0, 1.0, 2001)
    scale = float(np.max(np.abs(res.sol(rs)[0])))
    value = abs(float(res.y[0, -1])) / scale
    return KernelCheck(value, bool(value > 1e-3), k)


def radial_derivative_at_one(w: RadialProfile) -> float:
    """w_r(1); the k = 1 structure needs it nonzero."""
    return float(evaluate_w(w, 1.0)[1])


@dataclass
class ProbeReport:
    estimates: dict
    trials: int
    seed: int
    params: ProblemParams
    ratios: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "estimates": {str(m): v for m, v in self.estimates.items()},
            "trials": self.trials,
            "seed": self.seed,
        }


def random_mode_data(rng: np.random.Generator, m: int, grid: RadialGrid, degree: int = 3):
    """Smooth data b_k(r) = sum_j c_kj r^j, k = 0..m."""
    coeffs = rng.standard_normal((m + 1, degree + 1))
    powers = grid.r[None, :] ** np.arange(degree + 1)[:, None]
    return coeffs @ powers


def probe_ratio(data: np.ndarray, params: ProblemParams, grid: RadialGrid) -> float:
    """||phi||_X / ||f||_Y for f = sum_k data[k] psi_k (Cordes operator)."""
    sols, fs = [], []
    for k, b in enumerate(data):
        if not np.any(b):
            continue
        G = green_operator(k, params.N, params.gamma, grid)
        a, da = G.apply(b)
        d2a = second_derivative(k, params.N, params.gamma, grid.r, a, da, b)
        sols.append(ModeProfile(k, grid, a, da, d2a))
        fs.append(ModeProfile(k, grid, b))
    ny = y_norm(fs, params).norm_value
    return x_norm(sols, params).norm_value / ny if ny > 0 else 0.0


def operator_norm_probe(
    params: ProblemParams,
    m: int | tuple = (2, 4, 8, 16),
    trials: int = 64,
    seed: int = 0,
    grid: RadialGrid | None = None,
    data: list | None = None,
) -> ProbeReport:
    """Empirical D_m = max ||phi||_X / ||f||_Y over seeded multi-mode data.

    Levels are nested, so each estimate is a sup over every datum with at most
    m modes generated so far and the sequence is non-decreasing by construction.
    """
    grid = grid or RadialGrid()
    case = infer_case(params)
    levels = (m,) if np.isscalar(m) else tuple(sorted(m))
    rng = np.random.default_rng(seed)
    estimates, ratios, best = {}, {}, 0.0
    for level in levels:
        batch = data if data is not None else [random_mode_data(rng, level, grid) for _ in range(trials)]
        vals = []
        for d in batch:
            d = np.atleast_2d(np.asarray(d, dtype=float))
            if case is Case.THREE:
                d = d.copy()
                d[0] = 0.0
            vals.append(probe_ratio(d, params, grid))
        ratios[level] = vals
        best = max(best, max(vals))
        estimates[level] = best
        log.info("D_%d estimate %.6g", level, best)
    return ProbeReport(estimates, trials, seed, params, ratios)


__all__ = [
    "GreenOperator",
    "green_operator",
    "ModeSolveReport",
    "solve_cordes_mode",
    "k0_green_apply",
    "K0Operator",
    "LinearizedSolver",
    "solve_linearized_mode",
    "kernel_check",
    "radial_derivative_at_one",
    "operator_norm_probe",
    "ProbeReport",
    "mode_operator",
    "residual_sup",
]
