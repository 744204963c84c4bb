"""Sign and boundedness certificates for 0 < gamma < N-2.

Barrier: if -L_gamma u = -f >= 0 and 0 < sigma < (N-2-gamma)/(1+gamma), then

    0 <= |y|^sigma u(y) <= sup_z |z|^{2+sigma} |f(z)| / (sigma (N-1-(sigma+1)(1+gamma))).

The epsilon-exhaustion solves the same forcing on the annulus eps < |x| < 1
with zero data on both spheres. Per mode this is the ball solution minus the
homogeneous combination r^{beta+} - r^{beta-} matching its value at eps, so
u_eps increases to u as eps decreases, at the rate (eps/r)^{|beta_k^-|}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import WindowError
from ..grid import RadialGrid
from ..linear_solver import green_operator, k0_green_apply, mode_operator, solve_cordes_mode
from ..operator_core import Case, ProblemParams, indicial_roots, sigma_window
from ..weighted_spaces import ModeProfile, x_norm
from .fields import TensorGrid

EPS_LEVELS = tuple(2.0**-j for j in range(4, 11))
MEASURE_FROM = 2.0**-4


def barrier_denominator(sigma: float, N: int, gamma: float) -> float:
    return sigma * (N - 1 - (sigma + 1) * (1 + gamma))


def check_barrier_window(sigma: float, N: int, gamma: float) -> float:
    if not gamma < N - 2:
        raise WindowError("the barrier needs gamma < N-2", "gamma < N-2")
    upper = (N - 2 - gamma) / (1 + gamma)
    if not 0 < sigma < upper:
        raise WindowError(
            f"sigma = {sigma:g} outside (0, {upper:g})", "0 < sigma < (N-2-gamma)/(1+gamma)"
        )
    den = barrier_denominator(sigma, N, gamma)
    if not den > 0:
        raise WindowError(
            f"barrier denominator sigma (N-1-(sigma+1)(1+gamma)) = {den:.6g} <= 0",
            "sigma (N-1-(sigma+1)(1+gamma)) > 0",
        )
    return den


@dataclass
class BarrierReport:
    barrier_ok: bool
    bound: float
    margin: float
    nonnegative: bool
    eps_levels: tuple
    eps_sup_diffs: list = field(default_factory=list)  # on |x| >= MEASURE_FROM
    eps_common_diffs: list = field(default_factory=list)  # on the whole common annulus
    eps_monotone: bool = True
    eps_nonnegative: bool = True
    eps_barrier_ok: bool = True
    predicted_rate: float = 0.0

    def __iter__(self):
        return iter((self.barrier_ok, self.bound))

    @property
    def observed_rates(self):
        d = self.eps_sup_diffs
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]

    def to_json(self):
        return {
            "barrier_ok": self.barrier_ok,
            "bound": self.bound,
            "margin": self.margin,
            "nonnegative": self.nonnegative,
            "eps_levels": list(self.eps_levels),
            "eps_sup_diffs": self.eps_sup_diffs,
            "eps_common_diffs": self.eps_common_diffs,
            "eps_monotone": self.eps_monotone,
            "eps_nonnegative": self.eps_nonnegative,
            "eps_barrier_ok": self.eps_barrier_ok,
            "predicted_rate": self.predicted_rate,
            "observed_rates": self.observed_rates,
        }


def annulus_solutions(f_modes, params: ProblemParams, eps_levels=EPS_LEVELS):
    """Per-mode coefficients of u_eps (zero below eps) for L_gamma u_eps = f."""
    grid = f_modes[0].grid
    r = grid.r
    ball = []
    for m in f_modes:
        G = green_operator(m.k, params.N, params.gamma, grid)
        a, _ = G.apply(m.a)
        ball.append((m.k, a, G.beta_plus, G.beta_minus))
    out = []
    for eps in eps_levels:
        cols = []
        for k, a, bp, bm in ball:
            a_eps = float(grid.interpolate(a, eps))
            # (r^bp - r^bm)/(eps^bp - eps^bm), written to stay finite for tiny eps
            shape = (r**bp - r**bm) / (eps**bp - eps**bm)
            col = np.where(r >= eps, a - a_eps * shape, 0.0)
            cols.append(col)
        out.append(np.stack(cols, axis=1))
    return [k for k, *_ in ball], [b[1] for b in ball], out


def maximum_principle_barrier(
    u_modes: list[ModeProfile],
    f_modes: list[ModeProfile],
    params: ProblemParams,
    radii=None,
    eps_levels=EPS_LEVELS,
    measure_from: float = MEASURE_FROM,
    n_theta: int | None = None,
) -> BarrierReport:
    """Evaluate the barrier bound for u and run the epsilon-exhaustion for f.

    ``radii`` optionally replaces |x| by |y| at the tensor points (perturbed domain).
    """
    N, gamma, sigma = params.N, params.gamma, params.require_sigma()
    den = check_barrier_window(sigma, N, gamma)
    grid = (u_modes or f_modes)[0].grid
    k_max = max([m.k for m in u_modes] + [m.k for m in f_modes])
    T = TensorGrid(grid, N, k_max, n_theta)
    rad = T.r * np.ones(T.shape) if radii is None else np.asarray(radii)
    f = T.scalar(f_modes)
    K = float(np.max(rad ** (2 + sigma) * np.abs(f))) / den
    u = T.scalar(u_modes)
    weighted = rad**sigma * u
    scale = max(1.0, float(np.max(np.abs(u))))
    nonneg = bool(np.all(u >= -1e-10 * scale))
    margin = float(np.min(K - weighted))
    ok = bool(nonneg and margin >= -1e-10 * scale)
    report = BarrierReport(ok, K, margin, nonneg, tuple(eps_levels))
    if not any(np.any(m.a) for m in f_modes):
        return report
    ks, _, sols = annulus_solutions(f_modes, params, eps_levels)
    psi = T.ang.psi[ks]
    fields = [c @ psi for c in sols]
    far = grid.r >= measure_from
    for i, (eps, U) in enumerate(zip(eps_levels, fields)):
        inside = grid.r >= eps
        report.eps_nonnegative &= bool(np.all(U[inside] >= -1e-10 * scale))
        report.eps_barrier_ok &= bool(np.all((rad**sigma * U)[inside] <= K + 1e-10 * scale))
        if i == 0:
            continue
        prev = fields[i - 1]
        common = grid.r >= eps_levels[i - 1]
        diff = U - prev
        report.eps_monotone &= bool(np.all(diff[common] >= -1e-10 * scale))
        report.eps_sup_diffs.append(float(np.max(np.abs(diff[far]))))
        report.eps_common_diffs.append(float(np.max(np.abs(diff[common]))))
    bm0 = abs(indicial_roots(min(ks), params).beta_minus)
    report.predicted_rate = 2.0**-bm0
    return report


def model_forcing(grid: RadialGrid, params: ProblemParams) -> list[ModeProfile]:
    """f(y) = -|y|^{-sigma p} as a mode-0 profile."""
    from .zero_order import radial_mode

    return [radial_mode(grid, params.N, -grid.r ** (-params.require_sigma() * params.p))]


def _cutoff(r):
    """Smooth chi with chi = 1 on r <= 1/4, chi = 0 on r >= 1/2, and chi', chi''."""
    s = np.clip(4 * r - 1, 0.0, 1.0)  # 0 at r = 1/4, 1 at r = 1/2

    def bump(t):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

    def dbump(t):
        with np.errstate(divide="ignore", over="ignore"):
            tt = np.where(t > 0, t, 1.0)
            return np.where(t > 0, np.exp(-1.0 / tt) / tt**2, 0.0)

    def d2bump(t):
        with np.errstate(divide="ignore", over="ignore"):
            tt = np.where(t > 0, t, 1.0)
            return np.where(t > 0, np.exp(-1.0 / tt) * (1 - 2 * tt) / tt**4, 0.0)

    A, B = bump(1 - s), bump(s)
    dA, dB = -dbump(1 - s), dbump(s)
    d2A, d2B = d2bump(1 - s), d2bump(s)
    S = A + B
    chi = A / S
    dchi = (dA * S - A * (dA + dB)) / S**2
    d2chi = (
        (d2A * S - A * (d2A + d2B)) / S**2 - 2 * (dA + dB) * (dA * S - A * (dA + dB)) / S**3
    )
    return chi, 4 * dchi, 16 * d2chi


def bootstrap_sigma1(params: ProblemParams) -> float:
    """Midpoint of (max(lower window end without k = 0, sigma p - 2), 0)."""
    lo, _ = sigma_window(Case.THREE, params.N, params.gamma)
    lower = max(lo, params.require_sigma() * params.p - 2)
    if not lower < 0:
        raise WindowError("no sigma_1 < 0 with sigma_1 + 2 - sigma p > 0", "sigma_1 + 2 - sigma p > 0")
    return 0.5 * lower


def boundedness_bootstrap(v_modes: list[ModeProfile], params: ProblemParams) -> dict:
    """U = chi v split into U_0 (explicit K0 integral) and U_1 (X_1 theory at sigma_1)."""
    grid = v_modes[0].grid
    r = grid.r
    chi, dchi, d2chi = _cutoff(r)
    sigma1 = bootstrap_sigma1(params)
    p1 = params.with_(sigma=sigma1)
    out = {"sigma1": sigma1, "U1_norm": 0.0, "U1_divergent": False, "U1_match": 0.0}
    U1 = []
    U0_sup = 0.0
    for m in v_modes:
        U = m.a * chi
        dU = m.a_prime * chi + m.a * dchi
        d2U = m.a_double_prime * chi + 2 * m.a_prime * dchi + m.a * d2chi
        g = mode_operator(m.k, params.N, params.gamma, r, U, dU, d2U)
        if m.k == 0:
            K = k0_green_apply(g, params, grid, allow_singular=True)
            U0_sup = float(np.max(np.abs(K.u)))
            out["U0_match"] = float(np.max(np.abs(K.u - U))) / max(U0_sup, 1e-300)
        else:
            rep = solve_cordes_mode(m.k, g, p1, grid, with_norms=False)
            U1.append(rep.solution)
            out["U1_match"] = max(out["U1_match"], float(np.max(np.abs(rep.solution.a - U))))
    out["U0_sup"] = U0_sup
    if U1 and any(np.any(s.a) for s in U1):
        rep = x_norm(U1, p1)
        out["U1_norm"] = rep.norm_value
        out["U1_divergent"] = rep.divergent
    out["bounded"] = bool(math.isfinite(U0_sup) and math.isfinite(out["U1_norm"]) and not out["U1_divergent"])
    return out
