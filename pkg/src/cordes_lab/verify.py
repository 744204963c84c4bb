"""Invariant suite behind ``cordes-lab verify``.

Each check is a small self-contained oracle that runs in seconds. The full
suite adds one zero-order fixed point and one domain fixed point; ``quick``
skips those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import WindowError
from .grid import RadialGrid
from .operator_core import (
    ProblemParams,
    cordes_ratio,
    critical_exponent,
    effective_dimension,
    indicial_residual,
    indicial_roots,
    mode_eigenvalue,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _exponents():
    ok = critical_exponent(4, 1) == 9 and effective_dimension(3, 1) == 2
    ok &= all(mode_eigenvalue(k, 5) == k * (k + 3) for k in range(9))
    ok &= abs(cordes_ratio(4, 1) - 25 / 7) < 1e-15
    worst = 0.0
    for N, g in [(3, 0.5), (4, 1.0), (5, 4.0), (10, 0.5)]:
        P = ProblemParams(N, g)
        for k in range(9):
            pair = indicial_roots(k, P)
            for b in (pair.beta_plus, pair.beta_minus):
                worst = max(worst, abs(indicial_residual(b, k, P)) / max(1.0, mode_eigenvalue(k, N)))
    return ok and worst < 1e-12, f"max indicial residual {worst:.2e}"


def _radial():
    from .radial_solver import ode_residual, solve_radial

    worst = 0.0
    monotone = True
    for N, g, p in [(3, 0.0, 3.0), (4, 1.0, 4.0), (4, 3.0, 3.0)]:
        w = solve_radial(ProblemParams(N, g, p))
        r = w.grid[1:-1]
        res = ode_residual(w, r, w.w[1:-1], w.w_prime[1:-1], w.w_double_prime[1:-1])
        worst = max(worst, float(np.max(np.abs(res))) / w.w0**p)
        monotone &= bool(np.all(w.w_prime[1:] < 0))
    return worst < 1e-8 and monotone, f"residual {worst:.2e}, monotone {monotone}"


def _linear_round_trip():
    from .linear_solver import mode_operator, solve_cordes_mode

    grid = RadialGrid(per_octave=32)
    r = grid.r
    worst = 0.0
    for P in [ProblemParams(4, 1.0, sigma=0.25), ProblemParams(4, 3.0, sigma=-0.1)]:
        for k in (0, 1, 2, 4):
            e = k + 2
            a = r**e * (1 - r)
            da = e * r ** (e - 1) - (e + 1) * r**e
            d2a = e * (e - 1) * r ** (e - 2) - (e + 1) * e * r ** (e - 1)
            b = mode_operator(k, P.N, P.gamma, r, a, da, d2a)
            rep = solve_cordes_mode(k, b, P, grid, with_norms=False)
            worst = max(worst, float(np.max(np.abs(rep.solution.a - a))))
    return worst < 1e-7, f"apply/solve mismatch {worst:.2e}"


def _k0_constant():
    from .linear_solver import k0_green_apply

    grid = RadialGrid(per_octave=32)
    P = ProblemParams(4, 1.0)
    res = k0_green_apply(np.ones(grid.n), P, grid)
    exact = (grid.r**2 - 1) / (2 * (P.N + P.gamma))
    err = float(np.max(np.abs(res.u - exact)))
    return err < 1e-10, f"K0 error {err:.2e}"


def _kernel():
    from .linear_solver import kernel_check, radial_derivative_at_one
    from .radial_solver import solve_radial

    P = ProblemParams(4, 1.0, 3.0)
    w = solve_radial(P)
    checks = [kernel_check(k, w, P) for k in range(9)]
    ok = all(c.trivial for c in checks) and radial_derivative_at_one(w) != 0
    return ok, f"min |a_k(1)| {min(c.boundary_value for c in checks):.3g}"


def _norms():
    from .harmonics import sphere_area
    from .weighted_spaces import ModeProfile, add_modes, y_norm

    grid = RadialGrid(per_octave=32)
    P = ProblemParams(4, 1.0, sigma=0.25)
    r = grid.r
    f = [ModeProfile(0, grid, np.cos(3 * r)), ModeProfile(2, grid, r * (1 - r))]
    g = [ModeProfile(1, grid, r**2), ModeProfile(2, grid, np.sin(r))]
    nf, ng = y_norm(f, P).norm_value, y_norm(g, P).norm_value
    hom = abs(y_norm([m.scaled(-2.5) for m in f], P).norm_value - 2.5 * nf) / nf
    tri = y_norm(add_modes(f, g), P).norm_value - (nf + ng)
    power = ModeProfile(0, grid, r ** (-(2 + P.sigma)) * math.sqrt(sphere_area(P.N - 1)))
    vals = [v for _, v in y_norm([power], P).per_annulus]
    flat = max(vals) / min(vals)
    ok = hom < 1e-10 and tri <= 1e-10 * (nf + ng) and flat <= 1.02
    return ok, f"homogeneity {hom:.1e}, triangle slack {tri:.1e}, power-law profile {flat:.4f}"


def _taylor():
    from .perturbation.taylor import sweep_samples, taylor_remainders

    ok = True
    for p in (1.5, 2.0, 3.0, 5.0):
        ok &= taylor_remainders(*sweep_samples(20000, 7), p).holds
    return ok, "remainder bounds on a fresh seed"


def _domain_maps():
    from .perturbation.domain import CATALOG, DomainMap, domain_map_invert, perturbation_terms
    from .perturbation.zero_order import radial_mode
    from .radial_solver import evaluate_w, solve_radial

    rng = np.random.default_rng(3)
    x = rng.uniform(-0.5, 0.5, (64, 3))
    worst = 0.0
    for name in CATALOG:
        m = DomainMap(name, 0.01, 3)
        worst = max(worst, float(np.max(np.abs(domain_map_invert(m, m.forward(x)) - x))))
    exact = float(np.max(np.abs(domain_map_invert(DomainMap("dilation", 0.01, 3), x) - x / 1.01)))
    grid = RadialGrid(per_octave=16)
    w = solve_radial(ProblemParams(3, 2.0, 5.0))
    vals, d1, d2 = evaluate_w(w, grid.r)
    v = [radial_mode(grid, 3, vals, (d1, d2))]
    zero = perturbation_terms(v, DomainMap("axial_quadratic", 0.0, 3), grid, 2.0).max_abs()
    coef = perturbation_terms(v, DomainMap("dilation", 0.01, 3), grid, 2.0).coefficient_delta_max
    ok = worst < 1e-12 and exact < 1e-15 and zero == 0.0 and coef < 1e-12
    return ok, f"round trip {worst:.1e}, dilation inverse {exact:.1e}, delta=0 terms {zero:.1e}, coefficient delta {coef:.1e}"


def _barrier_window():
    from .perturbation.barrier import check_barrier_window

    valid = check_barrier_window(0.4, 4, 1.0) > 0
    try:
        check_barrier_window(0.6, 4, 1.0)
        rejected = False
    except WindowError:
        rejected = True
    return valid and rejected, "sigma=0.4 accepted, sigma=0.6 rejected at N=4, gamma=1"


def _zero_order():
    from .perturbation.zero_order import ZeroOrderConfig, fixed_point_zero_order, g_constant
    from .radial_solver import solve_radial

    P = ProblemParams(4, 3.0, 3.0)
    grid = RadialGrid()
    phi, trace = fixed_point_zero_order(ZeroOrderConfig(P, 0.01, g_constant(grid, 4), grid=grid), solve_radial(P))
    ok = trace.success and trace.positive_certified and trace.K0 < 0.9
    return ok, f"residual {trace.final_residual:.2e}, K0 {trace.K0:.3g}"


def _domain_dilation():
    from .perturbation.domain import DomainMap, dilation_exact, fixed_point_domain
    from .radial_solver import solve_radial

    P = ProblemParams(4, 1.0, 4.0)
    w = solve_radial(P)
    res = fixed_point_domain(DomainMap("dilation", 0.01, 4), P, w, certify_barrier=False)
    y = np.zeros((200, 4))
    y[:, -1] = np.linspace(0.01, 1.0, 200)
    exact = dilation_exact(w, 0.01, y)
    err = float(np.max(np.abs(res.u(y) - exact)) / np.max(np.abs(exact)))
    return res.trace.success and err < 1e-6, f"relative error vs exact {err:.2e}"


QUICK: list[tuple[str, Callable]] = [
    ("exponent algebra", _exponents),
    ("radial profile", _radial),
    ("linear round trip", _linear_round_trip),
    ("K0 constant forcing", _k0_constant),
    ("kernel triviality", _kernel),
    ("weighted norms", _norms),
    ("Taylor remainders", _taylor),
    ("domain maps", _domain_maps),
    ("barrier window", _barrier_window),
]
FULL = QUICK + [
    ("zero-order fixed point", _zero_order),
    ("domain dilation oracle", _domain_dilation),
]


def run_suite(quick: bool = False) -> list[CheckResult]:
    out = []
    for name, fn in QUICK if quick else FULL:
        try:
            passed, detail = fn()
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(passed), detail))
    return out
