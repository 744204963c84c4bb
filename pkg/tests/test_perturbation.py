import math

import numpy as np
import pytest

from cordes_lab.errors import DomainError, ModeBudgetError, NoContractionError, WindowError
from cordes_lab.grid import RadialGrid
from cordes_lab.harmonics import zonal
from cordes_lab.operator_core import ProblemParams
from cordes_lab.perturbation.barrier import (
    _cutoff,
    barrier_denominator,
    bootstrap_sigma1,
    check_barrier_window,
    maximum_principle_barrier,
    model_forcing,
)
from cordes_lab.perturbation.domain import (
    DomainMap,
    dilation_exact,
    domain_map_invert,
    evaluate_modes,
    fixed_point_domain,
    perturbation_terms,
    transformed_operator,
)
from cordes_lab.perturbation.fields import TensorGrid
from cordes_lab.perturbation.taylor import sweep_samples, taylor_constant, taylor_remainders
from cordes_lab.perturbation.zero_order import (
    ZeroOrderConfig,
    delta_scaling,
    fixed_point_zero_order,
    g_constant,
    g_from_function,
    g_radial_bump,
    radial_mode,
    zero_order_rhs,
)
from cordes_lab.linear_solver import solve_cordes_mode
from cordes_lab.radial_solver import evaluate_w
from cordes_lab.weighted_spaces import ModeProfile


def w_modes(w, grid, N):
    vals, d1, d2 = evaluate_w(w, grid.r)
    return [radial_mode(grid, N, vals, (d1, d2))]


def analytic_mode(k, grid, e):
    r = grid.r
    return ModeProfile(
        k,
        grid,
        r**e * (1 - r**2),
        e * r ** (e - 1) - (e + 2) * r ** (e + 1),
        e * (e - 1) * r ** (e - 2) - (e + 2) * (e + 1) * r**e,
    )


# --- Taylor remainders -------------------------------------------------------


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0, 5.0])
def test_taylor_bounds_on_fresh_samples(p):
    assert taylor_remainders(*sweep_samples(50000, 12345), p).holds


def test_taylor_exact_for_p2():
    """For p = 2 the first remainder is phi^2 exactly wherever w + phi >= 0."""
    w = np.array([1.0, 2.0, 5.0])
    phi = np.array([0.5, -1.0, 3.0])
    R1, _, _, _ = taylor_remainders(w, phi, phi, 2.0)
    assert np.allclose(R1, phi**2)
    assert taylor_constant(2.0) >= 1.0


def test_taylor_rejects_nonpositive_w():
    with pytest.raises(DomainError):
        taylor_remainders(np.array([0.0]), np.array([1.0]), np.array([1.0]), 2.0)


# --- tensor fields -----------------------------------------------------------


@pytest.mark.parametrize("N,k", [(3, 0), (3, 2), (4, 1), (4, 3)])
def test_hessian_matches_brute_force(N, k):
    grid = RadialGrid(per_octave=16)
    mode = analytic_mode(k, grid, k + 2.0)
    T = TensorGrid(grid, N, k)
    _, grad, H = T.cartesian([mode])

    def phi(x):
        r = np.linalg.norm(x)
        return r ** (k + 2) * (1 - r**2) * zonal(k, N, x[-1] / r)

    h = 1e-4
    for i, q in [(grid.n - 40, 1), (grid.n - 100, 3), (grid.n - 200, 0)]:
        x = T.points[i, q]
        E = np.eye(N) * h
        fd_g = np.array([(phi(x + E[a]) - phi(x - E[a])) / (2 * h) for a in range(N)])
        fd_H = np.array(
            [
                [
                    (phi(x + E[a] + E[b]) - phi(x + E[a] - E[b]) - phi(x - E[a] + E[b]) + phi(x - E[a] - E[b]))
                    / (4 * h * h)
                    for b in range(N)
                ]
                for a in range(N)
            ]
        )
        assert np.allclose(grad[i, q], fd_g, atol=1e-7)
        assert np.allclose(H[i, q], fd_H, atol=1e-5)


def test_projection_budget_error():
    grid = RadialGrid(per_octave=8)
    T = TensorGrid(grid, 3, 2)
    spiky = np.where(T.cos > 0.9, 1.0, 0.0) * np.ones(T.shape)
    with pytest.raises(ModeBudgetError, match="mode budget exceeded"):
        T.project(spiky, 1)


# --- zero-order problem ------------------------------------------------------


def test_rhs_trivial_cases(grid, profiles):
    P = ProblemParams(4, 1.0, 4.0)
    w = profiles(4, 1.0, 4.0)
    cfg0 = ZeroOrderConfig(P, 0.0, g_constant(grid, 4), grid=grid)
    f, tail = zero_order_rhs([], w, cfg0)
    assert all(np.max(np.abs(m.a)) == 0 for m in f)
    cfg = ZeroOrderConfig(P, 0.01, g_radial_bump(grid, 4), grid=grid)
    f, tail = zero_order_rhs([], w, cfg)
    wv = evaluate_w(w, grid.r)[0]
    expect = radial_mode(grid, 4, 0.01 * (1 - grid.r**2) ** 2 * wv**4).a
    assert np.max(np.abs(f[0].a - expect)) <= 1e-12 * np.max(np.abs(expect))
    assert all(np.max(np.abs(m.a)) <= 1e-14 for m in f[1:])


def test_rhs_quadrature_refinement(grid, profiles):
    P = ProblemParams(4, 1.0, 4.0)
    w = profiles(4, 1.0, 4.0)
    g = g_from_function(grid, 4, lambda r, c: 1 + r * c, 1)
    cfg = ZeroOrderConfig(P, 0.01, g, m=2, grid=grid)
    phi = [analytic_mode(0, grid, 2.0).scaled(0.1), analytic_mode(1, grid, 1.0).scaled(0.05)]
    coarse, _ = zero_order_rhs(phi, w, cfg)
    fine, _ = zero_order_rhs(phi, w, cfg, n_theta=2 * TensorGrid(grid, 4, 2).ang.n)
    assert max(np.max(np.abs(a.a - b.a)) for a, b in zip(coarse, fine)) < 1e-9


def test_delta_zero_is_fixed(grid, profiles):
    P = ProblemParams(4, 3.0, 3.0)
    phi, trace = fixed_point_zero_order(ZeroOrderConfig(P, 0.0, g_constant(grid, 4), grid=grid), profiles(4, 3.0, 3.0))
    assert len(trace.iterate_norms) <= 2
    assert max(np.max(np.abs(m.a)) for m in phi) == 0


def test_contraction_failure(grid, profiles):
    P = ProblemParams(4, 3.0, 3.0)
    cfg = ZeroOrderConfig(P, 5.0, g_constant(grid, 4), grid=grid, max_iter=10)
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(NoContractionError):
        fixed_point_zero_order(cfg, profiles(4, 3.0, 3.0))


def test_delta_scaling_converges(grid, profiles):
    P = ProblemParams(4, 3.0, 3.0)
    cfg = ZeroOrderConfig(P, 0.02, g_constant(grid, 4), grid=grid)
    ratios = delta_scaling(cfg, profiles(4, 3.0, 3.0))
    assert all(np.isfinite(ratios))
    assert abs(ratios[2] - ratios[1]) < abs(ratios[1] - ratios[0])
    assert abs(ratios[2] - ratios[1]) / ratios[2] < 0.05


def test_positivity_implication(grid, profiles):
    """Certification implies a positive u on the grid and near the boundary."""
    P = ProblemParams(4, 1.0, 4.0)
    _, trace = fixed_point_zero_order(ZeroOrderConfig(P, 0.01, g_radial_bump(grid, 4), grid=grid), profiles(4, 1.0, 4.0))
    assert trace.positive_certified
    assert trace.positivity > 0 and trace.boundary_positive
    assert trace.grad_sup_outer < abs(trace.extras["w_prime_at_one"]) / 2


# --- domain maps -------------------------------------------------------------


@pytest.mark.parametrize("name", ["dilation", "axial_quadratic", "radial_bump"])
def test_map_round_trip(name):
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 3))
    x *= (rng.random(200) / np.linalg.norm(x, axis=1))[:, None]
    m = DomainMap(name, 0.01, 3)
    assert np.max(np.abs(domain_map_invert(m, m.forward(x)) - x)) <= 1e-12
    assert np.array_equal(domain_map_invert(DomainMap(name, 0.0, 3), x), x)


def test_dilation_inverse_closed_form():
    y = np.random.default_rng(1).uniform(-0.7, 0.7, (50, 4))
    x = domain_map_invert(DomainMap("dilation", 0.03, 4), y)
    assert np.max(np.abs(x - y / 1.03)) <= 1e-15


def test_unknown_map():
    with pytest.raises(DomainError):
        DomainMap("twist", 0.01, 3)


def test_perturbation_terms_vanish(grid, profiles):
    w = profiles(3, 2.0, 5.0)
    v = w_modes(w, grid, 3) + [analytic_mode(2, grid, 2.0)]
    for name in ("dilation", "axial_quadratic", "radial_bump"):
        F = perturbation_terms(v, DomainMap(name, 0.0, 3), grid, 2.0)
        assert F.max_abs() == 0.0
    F = perturbation_terms(v, DomainMap("dilation", 0.01, 3), grid, 2.0)
    assert F.coefficient_delta_max <= 1e-14
    assert np.max(np.abs(F.coefficient_term)) <= 1e-10


def test_dilation_oracle_residual(grid, profiles):
    """The exact solution v(x) = (1+d)^{-a} w(x) satisfies the transformed equation."""
    N, g, p, d = 4, 1.0, 4.0, 0.01
    w = profiles(N, g, p)
    scale = (1 + d) ** (-2 / (p - 1))
    v = [m.scaled(scale) for m in w_modes(w, grid, N)]
    L, T = transformed_operator(v, DomainMap("dilation", d, N), grid, g)
    vfield = T.scalar(v)
    res = L + np.abs(vfield) ** p
    assert np.max(np.abs(res[grid.r > 1e-3])) / np.max(np.abs(vfield)) ** p <= 1e-6


def test_chain_rule_against_finite_differences(grid, profiles):
    """L_gamma in y of u(y) = v(x(y)) by finite differences vs the transformed operator."""
    N, g = 3, 2.0
    dmap = DomainMap("axial_quadratic", 0.05, N)
    v = w_modes(profiles(N, g, 5.0), grid, N) + [analytic_mode(1, grid, 1.0), analytic_mode(2, grid, 2.0)]
    L, T = transformed_operator(v, dmap, grid, g)

    def U(y):
        return evaluate_modes(v, N, domain_map_invert(dmap, y[None, :]))[0]

    h = 1e-3
    for i, q in [(grid.n - 150, 1), (grid.n - 300, 4), (grid.n - 80, 7)]:
        y = dmap.forward(T.points[i, q][None, :])[0]
        E = np.eye(N) * h
        H = np.array(
            [
                [(U(y + E[a] + E[b]) - U(y + E[a] - E[b]) - U(y - E[a] + E[b]) + U(y - E[a] - E[b])) / (4 * h * h) for b in range(N)]
                for a in range(N)
            ]
        )
        e = y / np.linalg.norm(y)
        fd = np.trace(H) + g * e @ H @ e
        assert abs(fd - L[i, q]) <= 1e-4 * max(1.0, abs(L[i, q]))


def test_domain_dilation_matches_exact(grid, profiles):
    P = ProblemParams(4, 1.0, 4.0)
    w = profiles(4, 1.0, 4.0)
    res = fixed_point_domain(DomainMap("dilation", 0.01, 4), P, w, grid, certify_barrier=False)
    y = np.zeros((300, 4))
    y[:, -1] = np.linspace(0.002, 1.0, 300)
    y[:, 0] = 0.3 * y[:, -1] * (y[:, -1] < 0.7)
    y /= np.maximum(1.0, np.linalg.norm(y, axis=1))[:, None]
    exact = dilation_exact(w, 0.01, y)
    assert np.max(np.abs(res.u(y) - exact)) / np.max(np.abs(exact)) <= 1e-6
    assert res.trace.final_residual <= 1e-6


def test_domain_delta_zero(grid, profiles):
    P = ProblemParams(3, 2.0, 5.0)
    res = fixed_point_domain(DomainMap("axial_quadratic", 0.0, 3), P, profiles(3, 2.0, 5.0), grid)
    assert max(np.max(np.abs(m.a)) for m in res.phi) == 0


# --- barrier -----------------------------------------------------------------


def test_barrier_denominator_sign():
    assert barrier_denominator(0.4, 4, 1.0) == pytest.approx(0.4 * 0.2)
    assert check_barrier_window(0.4, 4, 1.0) > 0
    with pytest.raises(WindowError):
        check_barrier_window(0.6, 4, 1.0)
    with pytest.raises(WindowError):
        check_barrier_window(0.1, 3, 2.0)


def test_barrier_zero_data(grid):
    P = ProblemParams(4, 1.0, 2.0, sigma=0.2)
    z = np.zeros(grid.n)
    rep = maximum_principle_barrier([ModeProfile(0, grid, z)], [ModeProfile(0, grid, z)], P)
    assert rep.barrier_ok and rep.margin == 0 and rep.bound == 0


def test_barrier_model_forcing_and_exhaustion_rate(grid):
    P = ProblemParams(4, 1.0, 2.0, sigma=0.2)
    f = model_forcing(grid, P)
    u = solve_cordes_mode(0, f[0].a, P, grid, with_norms=False).solution
    rep = maximum_principle_barrier([u], f, P)
    assert rep.barrier_ok and rep.margin > 0
    assert rep.eps_monotone and rep.eps_nonnegative and rep.eps_barrier_ok
    # (eps / r)^{|beta_0^-|} decay: successive differences shrink by 2^{-1/2}
    assert rep.predicted_rate == pytest.approx(2**-0.5)
    assert all(abs(q - rep.predicted_rate) < 0.05 for q in rep.observed_rates[2:])


def test_cutoff_derivatives():
    r = np.linspace(0.2, 0.55, 701)
    chi, d1, d2 = _cutoff(r)
    assert np.all(chi[r <= 0.25] == 1) and np.all(chi[r >= 0.5] == 0)
    h = r[1] - r[0]
    assert np.max(np.abs(np.gradient(chi, h) - d1)[5:-5]) < 1e-3 * np.max(np.abs(d1))
    assert np.max(np.abs(np.gradient(d1, h) - d2)[5:-5]) < 1e-2 * np.max(np.abs(d2))


def test_bootstrap_sigma1():
    P = ProblemParams(4, 1.0, 4.0, sigma=0.125)
    s1 = bootstrap_sigma1(P)
    assert s1 < 0 and s1 + 2 - P.sigma * P.p > 0


def test_domain_certificates_below_threshold(grid, profiles):
    P = ProblemParams(4, 1.0, 4.0)
    res = fixed_point_domain(DomainMap("dilation", 0.01, 4), P, profiles(4, 1.0, 4.0), grid)
    assert res.certificates["nonnegative"] and res.certificates["bounded"]
    assert math.isfinite(res.certificates["barrier_margin"])
