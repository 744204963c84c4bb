import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cordes_lab.grid import RadialGrid
from cordes_lab.harmonics import AngularRule, sphere_area, zonal
from cordes_lab.operator_core import ProblemParams
from cordes_lab.weighted_spaces import (
    ModeProfile,
    add_modes,
    annulus_radii,
    pointwise_bound_check,
    x_norm,
    y_norm,
)

P = ProblemParams(4, 1.0, sigma=0.25, t=5.0)


def smooth_modes(grid, coeffs):
    r = grid.r
    out = []
    for k, (c0, c1) in enumerate(coeffs):
        a = r**k * (c0 + c1 * r**2) * (1 - r**2)
        out.append(ModeProfile(k, grid, a))
    return out


def with_derivs(k, grid, e, c=1.0):
    r = grid.r
    return ModeProfile(
        k,
        grid,
        c * r**e * (1 - r),
        c * (e * r ** (e - 1) - (e + 1) * r**e),
        c * (e * (e - 1) * r ** (e - 2) - (e + 1) * e * r ** (e - 1)),
    )


@settings(max_examples=25, deadline=None)
@given(
    coeffs=st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=4),
    scale=st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3),
)
def test_y_norm_homogeneity(coarse_grid, coeffs, scale):
    f = smooth_modes(coarse_grid, coeffs)
    base = y_norm(f, P).norm_value
    scaled = y_norm([m.scaled(scale) for m in f], P).norm_value
    assert abs(scaled - abs(scale) * base) <= 1e-10 * max(1.0, abs(scale) * base)


@settings(max_examples=25, deadline=None)
@given(
    a=st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=4),
    b=st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=4),
)
def test_y_norm_triangle(coarse_grid, a, b):
    f, g = smooth_modes(coarse_grid, a), smooth_modes(coarse_grid, b)
    lhs = y_norm(add_modes(f, g), P).norm_value
    rhs = y_norm(f, P).norm_value + y_norm(g, P).norm_value
    assert lhs <= rhs + 1e-10 * max(1.0, rhs)


def test_x_norm_homogeneity_and_triangle(coarse_grid):
    u = [with_derivs(0, coarse_grid, 2.0), with_derivs(2, coarse_grid, 3.0)]
    v = [with_derivs(1, coarse_grid, 2.5), with_derivs(2, coarse_grid, 4.0, -2.0)]
    nu, nv = x_norm(u, P).norm_value, x_norm(v, P).norm_value
    assert abs(x_norm([m.scaled(-3.0) for m in u], P).norm_value - 3 * nu) <= 1e-10 * nu
    assert x_norm(add_modes(u, v), P).norm_value <= nu + nv + 1e-10 * (nu + nv)


@pytest.mark.parametrize("sigma", [0.1, 0.25, 0.45])
def test_power_law_profile_is_flat(grid, sigma):
    params = P.with_(sigma=sigma)
    f = ModeProfile(0, grid, grid.r ** (-(2 + sigma)) * math.sqrt(sphere_area(3)))
    vals = [v for _, v in y_norm([f], params).per_annulus]
    assert max(vals) / min(vals) <= 1.02


def test_power_law_norm_value(grid):
    """|x|^{-(2+sigma)} on A_s weighted by s^{2+sigma}: the integral has a closed form."""
    f = ModeProfile(0, grid, grid.r ** (-(2 + P.sigma)) * math.sqrt(sphere_area(3)))
    t, s = P.t, P.sigma
    e = (2 + s) * t
    closed = sphere_area(3) * (2.0 ** (4 - e) - 1) / (4 - e)
    assert y_norm([f], P).norm_value == pytest.approx(closed ** (1 / t), rel=1e-10)


def test_refinement_stability():
    fine, coarse = RadialGrid(per_octave=64), RadialGrid(per_octave=32)
    vals = []
    for g in (coarse, fine):
        u = [with_derivs(0, g, 2.0), with_derivs(3, g, 3.0)]
        f = [ModeProfile(0, g, np.cos(4 * g.r)), ModeProfile(2, g, g.r * np.exp(-g.r))]
        vals.append((x_norm(u, P).norm_value, y_norm(f, P).norm_value))
    for a, b in zip(*vals):
        assert abs(a - b) / b <= 0.02


def test_divergence_flag(grid):
    """A sigma-weight that grows toward the origin sets the divergent flag."""
    e = -0.5  # |x|^sigma * r^e blows up for sigma = 0.25
    u = [with_derivs(0, grid, e)]
    rep = x_norm(u, P)
    assert rep.divergent and rep.achieving_s == annulus_radii(grid)[-1]
    assert not x_norm([with_derivs(0, grid, 2.0)], P).divergent


def test_pointwise_bound(coarse_grid):
    u = [with_derivs(0, coarse_grid, 2.0), with_derivs(1, coarse_grid, 2.0)]
    rep = pointwise_bound_check(u, P)
    assert rep.ok and 0 < rep.ratio < rep.C_embed


def test_mode_profile_validation(coarse_grid):
    with pytest.raises(ValueError):
        ModeProfile(0, coarse_grid, np.ones(3))
    bad = np.ones(coarse_grid.n)
    bad[4] = np.nan
    with pytest.raises(ValueError):
        ModeProfile(0, coarse_grid, bad)


@pytest.mark.parametrize("N", [3, 4, 6])
def test_zonal_orthonormal(N):
    ang = AngularRule(N, 8)
    gram = (ang.psi * ang.weights) @ ang.psi.T
    assert np.allclose(gram, np.eye(9), atol=1e-12)


def test_zonal_derivative_matches_fd():
    x = np.linspace(-0.9, 0.9, 19)
    h = 1e-6
    for k in range(6):
        fd = (zonal(k, 5, x + h) - zonal(k, 5, x - h)) / (2 * h)
        assert np.allclose(zonal(k, 5, x, derivative=1), fd, rtol=1e-6, atol=1e-6)
