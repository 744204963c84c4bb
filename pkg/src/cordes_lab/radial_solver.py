"""Positive radial solution w of -L_gamma w = w^p on B_1, w(1) = 0.

Radially the problem is the Lane-Emden ODE in the (possibly fractional)
effective dimension N_gamma, which is solved by shooting from the origin with
unit height and rescaled so that the first zero lands on r = 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import OdeSolution, solve_ivp

from .errors import DomainError, NoSignChangeError
from .operator_core import ProblemParams, critical_exponent, effective_dimension

log = logging.getLogger(__name__)

TAYLOR_START = 1e-4
RTOL = 1e-12
ATOL = 1e-14


@dataclass(frozen=True)
class RawProfile:
    """Unit-height shooting solution on [0, R0] (raw, unscaled radius)."""

    params: ProblemParams
    height: float
    R0: float
    t: np.ndarray
    y: np.ndarray  # rows: w, w'
    sol: OdeSolution
    c2: float  # w ~ height + c2 rho^2 + c4 rho^4 near 0
    c4: float
    r_start: float


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """w, w', w'' sampled on grid (0, 1] together with a dense interpolant."""

    params: ProblemParams
    grid: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    w_double_prime: np.ndarray
    raw: RawProfile

    @property
    def scale(self) -> float:
        return self.raw.R0

    @property
    def w0(self) -> float:
        """w(0)."""
        return self.raw.height * self.raw.R0 ** (2.0 / (self.params.p - 1))

    @property
    def w_prime_at_one(self) -> float:
        return float(self.w_prime[-1])

    def __call__(self, r):
        return evaluate_w(self, r)


def _series(params: ProblemParams, height: float):
    N, g, p = params.N, params.gamma, params.p
    n_eff = effective_dimension(N, g)
    c2 = -(height**p) / (2.0 * (N + g))
    c4 = -p * height ** (p - 1) * c2 / (4.0 * (1 + g) * (n_eff + 2))
    return c2, c4


def _rhs(params: ProblemParams):
    n1 = effective_dimension(params.N, params.gamma) - 1.0
    p, g1 = params.p, 1.0 + params.gamma

    def f(r, y):
        w, dw = y
        return [dw, -n1 * dw / r - max(w, 0.0) ** p / g1]

    return f


def solve_ivp_unit_height(
    params: ProblemParams, r_max: float = 1e3, height: float = 1.0
) -> RawProfile:
    """Shoot from w(0) = height, w'(0) = 0 until the first zero R0."""
    c2, c4 = _series(params, height)
    r0 = TAYLOR_START * height ** (-(params.p - 1) / 2)
    y0 = [height + c2 * r0**2 + c4 * r0**4, 2 * c2 * r0 + 4 * c4 * r0**3]

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    res = solve_ivp(
        _rhs(params),
        (r0, r_max),
        y0,
        method="DOP853",
        rtol=RTOL,
        atol=ATOL * height,
        events=hit_zero,
        dense_output=True,
    )
    if not res.success or res.t_events[0].size == 0:
        pc = critical_exponent(params.N, params.gamma)
        raise NoSignChangeError(
            f"no sign change before r_max={r_max:g}; parameters likely outside the "
            f"existence window (p={params.p}, p_crit={pc:g})"
        )
    R0 = float(res.t_events[0][0])
    return RawProfile(params, height, R0, res.t, res.y, res.sol, c2, c4, r0)


def _raw_eval(raw: RawProfile, rho: np.ndarray):
    rho = np.asarray(rho, dtype=float)
    w = np.empty_like(rho)
    dw = np.empty_like(rho)
    inner = rho < raw.r_start
    if np.any(inner):
        q = rho[inner]
        w[inner] = raw.height + raw.c2 * q**2 + raw.c4 * q**4
        dw[inner] = 2 * raw.c2 * q + 4 * raw.c4 * q**3
    outer = ~inner
    if np.any(outer):
        vals = raw.sol(np.minimum(rho[outer], raw.R0))
        w[outer], dw[outer] = vals[0], vals[1]
    return w, dw


def _second_derivative(params: ProblemParams, r, w, dw):
    g1 = 1.0 + params.gamma
    return -((params.N - 1) * dw / r + np.maximum(w, 0.0) ** params.p) / g1


def rescale_to_unit_ball(raw: RawProfile, R0: float | None = None) -> RadialProfile:
    """w(r) = R0^{2/(p-1)} w_raw(R0 r) sampled at the shooting nodes mapped to (0, 1]."""
    R0 = raw.R0 if R0 is None else R0
    if not (np.isfinite(R0) and R0 > 0):
        raise DomainError("R0 must be finite and positive")
    a = 2.0 / (raw.params.p - 1)
    grid = np.append(raw.t[raw.t < R0], R0) / R0
    grid[-1] = 1.0
    w, dw = _raw_eval(raw, grid * R0)
    w = R0**a * w
    dw = R0 ** (a + 1) * dw
    w[-1] = 0.0
    d2w = _second_derivative(raw.params, grid, w, dw)
    return RadialProfile(raw.params, grid, w, dw, d2w, raw)


def solve_radial(params: ProblemParams, r_max: float = 1e3, height: float = 1.0) -> RadialProfile:
    return rescale_to_unit_ball(solve_ivp_unit_height(params, r_max=r_max, height=height))


def evaluate_w(profile: RadialProfile, r):
    """(w, w', w'') at r in (0, 1]; stored samples are returned at grid nodes."""
    scalar = np.isscalar(r)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(~(r > 0)) or np.any(r > 1):
        raise DomainError("evaluate_w needs r in (0, 1]")
    raw = profile.raw
    R0 = raw.R0
    a = 2.0 / (profile.params.p - 1)
    w, dw = _raw_eval(raw, r * R0)
    w = R0**a * w
    dw = R0 ** (a + 1) * dw
    w = np.where(r == 1.0, 0.0, w)
    d2w = _second_derivative(profile.params, r, w, dw)
    idx = np.searchsorted(profile.grid, r)
    idx = np.clip(idx, 0, profile.grid.size - 1)
    hit = profile.grid[idx] == r
    w[hit] = profile.w[idx[hit]]
    dw[hit] = profile.w_prime[idx[hit]]
    d2w[hit] = profile.w_double_prime[idx[hit]]
    if scalar:
        return float(w[0]), float(dw[0]), float(d2w[0])
    return w, dw, d2w


def ode_residual(profile: RadialProfile, r, w, dw, d2w) -> np.ndarray:
    p = profile.params
    return (1 + p.gamma) * d2w + (p.N - 1) * dw / r + np.maximum(w, 0.0) ** p.p


def derivative_bounds(profile: RadialProfile, r_cut: float = 0.5) -> tuple[float, float]:
    """Constants C with |w'| <= C r and |w''| <= C on (0, r_cut]."""
    mask = profile.grid <= r_cut
    r = profile.grid[mask]
    return (
        float(np.max(np.abs(profile.w_prime[mask]) / r)),
        float(np.max(np.abs(profile.w_double_prime[mask]))),
    )


def scaled_family(profile: RadialProfile, lam: float, r):
    """lam^{2/(p-1)} w(lam r) and its derivatives, for lam r in (0, 1]."""
    a = 2.0 / (profile.params.p - 1)
    w, dw, d2w = evaluate_w(profile, lam * np.asarray(r, dtype=float))
    return lam**a * w, lam ** (a + 1) * dw, lam ** (a + 2) * d2w


def log_summary(profile: RadialProfile) -> None:
    log.info(
        "radial profile N=%s gamma=%s p=%s: R0=%.12g w(0)=%.12g w'(1)=%.12g",
        profile.params.N,
        profile.params.gamma,
        profile.params.p,
        profile.raw.R0,
        profile.w0,
        profile.w_prime_at_one,
    )


__all__ = [
    "RawProfile",
    "RadialProfile",
    "solve_ivp_unit_height",
    "rescale_to_unit_ball",
    "solve_radial",
    "evaluate_w",
    "ode_residual",
    "derivative_bounds",
    "scaled_family",
    "log_summary",
]
