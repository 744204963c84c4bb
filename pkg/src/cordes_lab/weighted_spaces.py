"""Dyadic-annulus weighted norms for axisymmetric functions.

For A_s = {s < |x| < 2s}:

    ||f||_Y^t   = sup_s s^{(2+sigma)t-N} int_{A_s} |f|^t
    ||phi||_X^t = sup_s s^{sigma t-N} ( int |phi|^t + s^t int |grad phi|^t
                                        + s^{2t} int |D^2 phi|^t )

Functions are given as zonal-harmonic expansions sum_k a_k(r) psi_k(x) with
radial coefficients sampled on a shared :class:`~cordes_lab.grid.RadialGrid`.
The sup over s runs over a geometric grid of ratio 2^{1/4} from s = 1/2 down to
s = 2 r_min. |D^2 phi| is the exact Frobenius norm of the Cartesian Hessian,
assembled from a, a', a'' in the (e_r, e_theta, azimuthal) frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import RadialGrid
from .harmonics import AngularRule
from .operator_core import ProblemParams

RADIAL_NODES = 16


@dataclass(frozen=True, eq=False)
class ModeProfile:
    """Radial coefficient a_k of one zonal mode, with optional derivatives."""

    k: int
    grid: RadialGrid
    a: np.ndarray
    a_prime: np.ndarray | None = None
    a_double_prime: np.ndarray | None = None

    def __post_init__(self):
        for name in ("a", "a_prime", "a_double_prime"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (self.grid.n,):
                raise ValueError(f"{name} has shape {arr.shape}, grid needs ({self.grid.n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite samples")
            object.__setattr__(self, name, arr)

    @property
    def r_min(self) -> float:
        return self.grid.r_min

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def boundary_value(self) -> float:
        return abs(float(self.a[-1]))

    def scaled(self, c: float) -> "ModeProfile":
        return ModeProfile(
            self.k,
            self.grid,
            c * self.a,
            None if self.a_prime is None else c * self.a_prime,
            None if self.a_double_prime is None else c * self.a_double_prime,
        )

    @classmethod
    def from_function(cls, k, grid, f, df=None, d2f=None) -> "ModeProfile":
        r = grid.r
        return cls(
            k,
            grid,
            f(r),
            None if df is None else df(r),
            None if d2f is None else d2f(r),
        )


def add_modes(left: list[ModeProfile], right: list[ModeProfile], beta: float = 1.0):
    """Mode-wise left + beta*right (derivatives kept only where both carry them)."""
    out = {m.k: m for m in left}
    for m in right:
        if m.k not in out:
            out[m.k] = m.scaled(beta)
            continue
        a = out[m.k]

        def comb(x, y):
            return None if x is None or y is None else x + beta * y

        out[m.k] = ModeProfile(
            m.k,
            m.grid,
            a.a + beta * m.a,
            comb(a.a_prime, m.a_prime),
            comb(a.a_double_prime, m.a_double_prime),
        )
    return [out[k] for k in sorted(out)]


@dataclass
class WeightedNormReport:
    norm_value: float
    per_annulus: list[tuple[float, float]]
    achieving_s: float
    divergent: bool = False
    tail_slope: float = 0.0
    kind: str = "Y"
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "norm": self.norm_value,
            "achieving_s": self.achieving_s,
            "divergent": self.divergent,
            "tail_slope": self.tail_slope,
            "kind": self.kind,
            "annuli": [{"s": s, "value": v} for s, v in self.per_annulus],
            **self.extras,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def annulus_radii(grid: RadialGrid, per_octave: int = 4) -> np.ndarray:
    """Inner radii s of the dyadic annuli, from 1/2 down to 2 r_min."""
    j_max = int(math.floor(per_octave * (math.log2(0.5) - math.log2(2 * grid.r_min)) + 1e-9))
    return 2.0 ** (-1.0 - np.arange(j_max + 1) / per_octave)


def _common_grid(modes: list[ModeProfile]) -> RadialGrid:
    grid = modes[0].grid
    for m in modes[1:]:
        if m.grid != grid:
            raise ValueError("modes live on mismatched grids")
    return grid


def _stack(modes, attr):
    cols = []
    for m in modes:
        arr = getattr(m, attr)
        if arr is None:
            raise ValueError(f"mode k={m.k} lacks {attr} samples")
        cols.append(arr)
    return np.stack(cols, axis=1)


class _AnnulusSampler:
    """Gauss nodes in u on every annulus plus the angular rule for the modes."""

    def __init__(self, modes, params: ProblemParams, per_octave: int = 4):
        self.grid = _common_grid(modes)
        self.s = annulus_radii(self.grid, per_octave)
        xi, wq = np.polynomial.legendre.leggauss(RADIAL_NODES)
        self.wq = 0.5 * math.log(2.0) * wq
        self.u = np.log(self.s)[:, None] + 0.5 * math.log(2.0) * (xi + 1.0)[None, :]
        self.r = np.exp(self.u)
        self.ks = np.array([m.k for m in modes])
        k_max = int(self.ks.max())
        self.ang = AngularRule(params.N, k_max)
        self.N = params.N

    def values(self, modes, attr):
        spl = self.grid.spline(_stack(modes, attr))
        return spl(self.u)  # (J, Q, K)

    def synth(self, coeffs, table):
        return np.einsum("jqk,kn->jqn", coeffs, table[self.ks])

    def integrate(self, density):
        """sum over annulus nodes of r^N * angular integral; density (J, Q, n)."""
        ang = density @ self.ang.weights
        return (ang * (self.r / self.s[:, None]) ** self.N) @ self.wq


def _report(s, powers, t, kind) -> WeightedNormReport:
    contrib = np.maximum(powers, 0.0) ** (1.0 / t)
    j = int(np.argmax(contrib))
    tail = max(5, len(s) // 18)
    slope = 0.0
    if len(s) >= tail and np.all(contrib[-tail:] > 0):
        slope = float(np.polyfit(np.log(s[-tail:]), np.log(contrib[-tail:]), 1)[0])
    divergent = bool(j == len(s) - 1 and slope < -1e-3)
    return WeightedNormReport(
        norm_value=float(contrib[j]),
        per_annulus=[(float(a), float(b)) for a, b in zip(s, contrib)],
        achieving_s=float(s[j]),
        divergent=divergent,
        tail_slope=slope,
        kind=kind,
    )


def y_norm(modes: list[ModeProfile], params: ProblemParams, per_octave: int = 4):
    """||sum_k b_k psi_k||_Y with the sup over a ratio-2^{1/per_octave} s-grid."""
    sigma, t = params.require_sigma(), params.t
    if not modes:
        return WeightedNormReport(0.0, [], 0.5, kind="Y")
    S = _AnnulusSampler(modes, params, per_octave)
    b = S.values(modes, "a")
    f = S.synth(b, S.ang.psi) * (S.s[:, None, None] ** (2 + sigma))
    powers = S.integrate(np.abs(f) ** t)
    return _report(S.s, powers, t, "Y")


@dataclass
class PolarFields:
    """phi and its polar derivatives on an (r, angle) grid; see :func:`polar_fields`."""

    phi: np.ndarray
    phi_r: np.ndarray
    phi_t: np.ndarray
    phi_rr: np.ndarray
    phi_rt: np.ndarray
    phi_tt: np.ndarray
    h_az: np.ndarray
    r: np.ndarray

    @property
    def grad_norm(self):
        return np.sqrt(self.phi_r**2 + (self.phi_t / self.r) ** 2)

    def hessian_frame(self):
        """(H_rr, H_rt, H_tt, H_az) of the Cartesian Hessian in the (e_r, e_theta, azimuthal) frame."""
        r = self.r
        h_rt = self.phi_rt / r - self.phi_t / r**2
        h_tt = self.phi_tt / r**2 + self.phi_r / r
        return self.phi_rr, h_rt, h_tt, self.h_az

    def hessian_norm(self, N: int):
        h_rr, h_rt, h_tt, h_az = self.hessian_frame()
        return np.sqrt(h_rr**2 + 2 * h_rt**2 + h_tt**2 + (N - 2) * h_az**2)


def polar_fields(a, da, d2a, ang: AngularRule, ks, r) -> PolarFields:
    """Synthesize sum_k a_k(r) psi_k and derivatives; a, da, d2a have shape (..., K).

    r must broadcast against the synthesized (..., n_angles) arrays.
    """
    ks = np.asarray(ks)
    x, sin = ang.x, ang.sin
    psi, dpsi, d2psi = ang.psi[ks], ang.dpsi[ks], ang.d2psi[ks]
    a_dpsi = a @ dpsi
    phi_r = da @ psi
    return PolarFields(
        phi=a @ psi,
        phi_r=phi_r,
        phi_t=-sin * a_dpsi,
        phi_rr=d2a @ psi,
        phi_rt=-sin * (da @ dpsi),
        phi_tt=sin**2 * (a @ d2psi) - x * a_dpsi,
        h_az=phi_r / r - x * a_dpsi / r**2,
        r=r,
    )


def _derivative_fields(S: _AnnulusSampler, modes):
    a = S.values(modes, "a")
    da = S.values(modes, "a_prime")
    d2a = S.values(modes, "a_double_prime")
    F = polar_fields(a, da, d2a, S.ang, S.ks, S.r[:, :, None])
    return F.phi, F.grad_norm, F.hessian_norm(S.N)


def x_norm(modes: list[ModeProfile], params: ProblemParams, per_octave: int = 4):
    """||sum_k a_k psi_k||_X; needs a, a', a'' samples for every mode."""
    sigma, t = params.require_sigma(), params.t
    if not modes:
        return WeightedNormReport(0.0, [], 0.5, kind="X")
    S = _AnnulusSampler(modes, params, per_octave)
    phi, grad, hess = _derivative_fields(S, modes)
    s = S.s[:, None, None]
    # scale each term by the power of s that makes the annulus weight O(1)
    density = (
        np.abs(s**sigma * phi) ** t
        + np.abs(s ** (sigma + 1) * grad) ** t
        + np.abs(s ** (sigma + 2) * hess) ** t
    )
    powers = S.integrate(density)
    report = _report(S.s, powers, t, "X")
    report.extras["boundary_value"] = max(m.boundary_value for m in modes)
    return report


def grid_fields(modes: list[ModeProfile], N: int, n_theta: int | None = None):
    """phi and |grad phi| on the (grid r) x (angular nodes) tensor grid."""
    grid = _common_grid(modes)
    ks = np.array([m.k for m in modes])
    ang = AngularRule(N, int(ks.max()), n_theta)
    a = _stack(modes, "a")
    phi = a @ ang.psi[ks]
    if all(m.a_prime is not None for m in modes):
        da = _stack(modes, "a_prime")
        phi_r = da @ ang.psi[ks]
        phi_t = -ang.sin * (a @ ang.dpsi[ks])
        grad = np.sqrt(phi_r**2 + (phi_t / grid.r[:, None]) ** 2)
    else:
        grad = None
    return grid, ang, phi, grad


@dataclass
class PointwiseBound:
    C_sup: float
    ok: bool
    x_norm: float
    C_embed: float
    ratio: float

    def __iter__(self):
        return iter((self.C_sup, self.ok))


def pointwise_bound_check(modes, params: ProblemParams, C_embed: float = 50.0) -> PointwiseBound:
    """sup |x|^sigma |phi| + |x|^{sigma+1} |grad phi| against C_embed * ||phi||_X."""
    sigma = params.require_sigma()
    norm = x_norm(modes, params).norm_value if modes else 0.0
    if not modes:
        return PointwiseBound(0.0, True, 0.0, C_embed, 0.0)
    grid, _, phi, grad = grid_fields(modes, params.N)
    r = grid.r[:, None]
    sup = float(np.max(r**sigma * np.abs(phi) + r ** (sigma + 1) * grad))
    ok = sup <= C_embed * norm
    ratio = sup / norm if norm > 0 else 0.0
    return PointwiseBound(sup, bool(ok), norm, C_embed, ratio)
