"""Perturbed-domain problem -L_gamma u = u^p on Omega_delta = {x + delta psi(x)}.

Pulling back by y = x + delta psi(x), v(x) = u(y), the second derivatives are

    u_{y_i y_j} = sum_kl v_kl J_ki J_lj + sum_k v_k X^k_ij,
    J = (I + delta D psi)^{-1},
    X^k_ij = -delta sum_m J_km psi^m_ab J_ai J_bj   (second derivatives of x(y)).

Writing u_{y_i y_j} = v_ij + E^{ij}(v), E = sum_i E^{ii} and with
c^y_ij = y_i y_j/|y|^2, c^x_ij = x_i x_j/|x|^2 the pulled-back equation is

    L_gamma v + P(v) + |v|^p = 0,
    P(v) = E(v) + gamma sum c^y_ij E^{ij}(v) + gamma sum (c^y_ij - c^x_ij) v_ij,

which vanishes identically at delta = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NewtonFailure
from ..grid import RadialGrid
from ..operator_core import Case, ProblemParams, sigma_window
from ..radial_solver import RadialProfile
from ..weighted_spaces import ModeProfile
from .fields import TensorGrid
from .zero_order import FixedPointTrace, _iterate, _Problem, mode_residual

log = logging.getLogger(__name__)


def _dilation(x):
    N = x.shape[-1]
    eye = np.broadcast_to(np.eye(N), x.shape + (N,))
    return x.copy(), eye.copy(), np.zeros(x.shape + (N, N))


def _axial_quadratic(x):
    N = x.shape[-1]
    psi = np.zeros_like(x)
    psi[..., -1] = np.sum(x**2, axis=-1)
    D = np.zeros(x.shape + (N,))
    D[..., -1, :] = 2 * x
    D2 = np.zeros(x.shape + (N, N))
    D2[..., -1, :, :] = 2 * np.eye(N)
    return psi, D, D2


def _radial_bump(x):
    N = x.shape[-1]
    q = 1.0 - np.sum(x**2, axis=-1)
    qq = q[..., None]
    psi = x * qq**2
    eye = np.eye(N)
    xx = x[..., :, None] * x[..., None, :]
    D = eye * (q**2)[..., None, None] - 4 * xx * q[..., None, None]
    xxx = x[..., :, None, None] * x[..., None, :, None] * x[..., None, None, :]
    sym = (
        eye[:, :, None] * x[..., None, None, :]
        + eye[:, None, :] * x[..., None, :, None]
        + eye[None, :, :] * x[..., :, None, None]
    )
    D2 = -4 * q[..., None, None, None] * sym + 8 * xxx
    return psi, D, D2


@dataclass(frozen=True)
class CatalogEntry:
    fn: object
    radial: bool  # the pulled-back problem stays radial


CATALOG = {
    "dilation": CatalogEntry(_dilation, True),
    "axial_quadratic": CatalogEntry(_axial_quadratic, False),
    "radial_bump": CatalogEntry(_radial_bump, True),
}


@dataclass(frozen=True)
class DomainMap:
    """x -> x + delta psi(x) with psi from the named catalog.

    ``psi(x)`` returns (psi, D psi, D^2 psi) with D psi[..., i, j] = d_j psi^i and
    D^2 psi[..., i, j, k] = d_j d_k psi^i.
    """

    name: str
    delta: float
    N: int

    def __post_init__(self):
        if self.name not in CATALOG:
            raise DomainError(f"unknown map {self.name!r}; choose from {sorted(CATALOG)}")
        if self.delta < 0:
            raise DomainError("delta must be >= 0")
        psi0, _, _ = self.psi(np.zeros((1, self.N)))
        if np.any(psi0 != 0):
            raise DomainError("psi(0) must vanish")
        self.check_injective()

    @property
    def radial(self) -> bool:
        return CATALOG[self.name].radial

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        return CATALOG[self.name].fn(x)

    def forward(self, x):
        return x + self.delta * self.psi(x)[0]

    def jacobian(self, x):
        return np.eye(self.N) + self.delta * self.psi(x)[1]

    def check_injective(self, n: int = 33):
        """det(I + delta D psi) > 0 on a sample grid of the closed ball."""
        r = np.linspace(0, 1, n)
        th = np.linspace(0, math.pi, n)
        R, T = np.meshgrid(r, th, indexing="ij")
        x = np.zeros(R.shape + (self.N,))
        x[..., 0] = R * np.sin(T)
        x[..., -1] = R * np.cos(T)
        det = np.linalg.det(self.jacobian(x))
        if not np.all(det > 0):
            raise DomainError(
                f"x + delta psi(x) is not a diffeomorphism at delta={self.delta} "
                f"(min det {det.min():.3g})"
            )


def domain_map_invert(dmap: DomainMap, y, max_steps: int = 50, tol: float = 1e-12):
    """Newton for x + delta psi(x) = y from x0 = y (vectorised over points)."""
    y = np.asarray(y, dtype=float)
    x = y.copy()
    for _ in range(max_steps):
        psi, D, _ = dmap.psi(x)
        F = x + dmap.delta * psi - y
        if np.max(np.abs(F), initial=0.0) <= tol:
            return x
        A = np.eye(dmap.N) + dmap.delta * D
        x = x - np.linalg.solve(A, F[..., None])[..., 0]
    F = x + dmap.delta * dmap.psi(x)[0] - y
    if np.max(np.abs(F), initial=0.0) <= tol:
        return x
    raise NewtonFailure(f"domain map inversion did not converge in {max_steps} steps")


class DomainGeometry:
    """Change-of-variables tensors at every point of a tensor grid."""

    def __init__(self, dmap: DomainMap, T: TensorGrid, gamma: float):
        if dmap.N != T.N:
            raise ValueError("map and grid dimensions differ")
        x = T.points
        if np.any(np.linalg.norm(x, axis=-1) > 1 + 1e-14):
            raise DomainError("grid points outside the closed unit ball")
        self.map, self.T, self.gamma = dmap, T, gamma
        d = dmap.delta
        psi, D, D2 = dmap.psi(x)
        self.y = x + d * psi
        self.J = np.linalg.inv(np.eye(T.N) + d * D)
        # X^k_ij = -delta sum_m J_km psi^m_ab J_ai J_bj
        N = T.N
        Jt = np.swapaxes(self.J, -1, -2)[..., None, :, :]
        B = Jt @ D2 @ self.J[..., None, :, :]  # B^m = J^T D^2 psi^m J
        self.X = -d * (self.J @ B.reshape(B.shape[:-3] + (N, N * N))).reshape(B.shape)
        ex = x / np.linalg.norm(x, axis=-1, keepdims=True)
        ey = self.y / np.linalg.norm(self.y, axis=-1, keepdims=True)
        self.cx = ex[..., :, None] * ex[..., None, :]
        self.cy = ey[..., :, None] * ey[..., None, :]
        self.y_radius = np.linalg.norm(self.y, axis=-1)

    @property
    def coefficient_delta(self):
        return self.cy - self.cx


@dataclass
class PerturbationFields:
    E: np.ndarray  # E_delta(v) = sum_i E^{ii}(v)
    E_weighted: np.ndarray  # gamma sum c^y_ij E^{ij}(v)
    coefficient_term: np.ndarray  # gamma sum (c^y - c^x)_ij v_ij
    E_ij: np.ndarray
    coefficient_delta_max: float

    @property
    def total(self):
        return self.E + self.E_weighted + self.coefficient_term

    def max_abs(self) -> float:
        return float(
            max(np.max(np.abs(self.E)), np.max(np.abs(self.E_weighted)), np.max(np.abs(self.coefficient_term)))
        )


def _perturbation(geo: DomainGeometry, grad, H) -> PerturbationFields:
    N = H.shape[-1]
    Hy = np.swapaxes(geo.J, -1, -2) @ H @ geo.J
    Hy += (grad[..., None, :] @ geo.X.reshape(geo.X.shape[:-3] + (N, N * N))).reshape(H.shape)
    E_ij = Hy - H
    g = geo.gamma
    cd = geo.coefficient_delta
    return PerturbationFields(
        E=np.trace(E_ij, axis1=-2, axis2=-1),
        E_weighted=g * np.sum(geo.cy * E_ij, axis=(-2, -1)),
        coefficient_term=g * np.sum(cd * H, axis=(-2, -1)),
        E_ij=E_ij,
        coefficient_delta_max=float(np.max(np.abs(cd))),
    )


def perturbation_terms(
    v: list[ModeProfile], dmap: DomainMap, grid: RadialGrid, gamma: float, k_max=None, n_theta=None
) -> PerturbationFields:
    """All perturbation fields of v on the (r, angle) grid of the unit ball."""
    k_max = max(m.k for m in v) if k_max is None else k_max
    T = TensorGrid(grid, dmap.N, k_max, n_theta)
    geo = DomainGeometry(dmap, T, gamma)
    _, grad, H = T.cartesian(v)
    return _perturbation(geo, grad, H)


def transformed_operator(v: list[ModeProfile], dmap: DomainMap, grid: RadialGrid, gamma: float, n_theta=None):
    """L_gamma v + P(v) on the tensor grid, i.e. L_gamma applied in y to u(y) = v(x)."""
    T = TensorGrid(grid, dmap.N, max(m.k for m in v), n_theta)
    geo = DomainGeometry(dmap, T, gamma)
    _, grad, H = T.cartesian(v)
    base = np.trace(H, axis1=-2, axis2=-1) + gamma * np.sum(geo.cx * H, axis=(-2, -1))
    return base + _perturbation(geo, grad, H).total, T


def default_domain_sigma(params: ProblemParams) -> float:
    """Midpoint of the negative window for gamma > N-2, a quarter of the positive one otherwise."""
    if params.gamma > params.N - 2:
        lo, hi = sigma_window(Case.TWO, params.N, params.gamma)
        return 0.5 * (lo + hi)
    lo, hi = sigma_window(Case.ONE, params.N, params.gamma)
    return lo + 0.25 * (hi - lo)


class DomainProblem(_Problem):
    def __init__(self, dmap: DomainMap, params: ProblemParams, w: RadialProfile, grid, m, n_theta):
        sigma = params.sigma if params.sigma is not None else default_domain_sigma(params)
        params = params.with_(sigma=sigma)
        if m is None:
            m = 0 if dmap.radial else 4
        super().__init__(params, w, grid, m, n_theta, "X")
        self.map = dmap
        self.geo = DomainGeometry(dmap, self.T, params.gamma)

    def rhs_field(self, phi):
        p = self.params.p
        v = self.u_modes(phi)
        _, grad, H = self.T.cartesian(v)
        pert = _perturbation(self.geo, grad, H).total
        phi_f = self.T.scalar(phi)
        w = self.w_field
        R1 = np.abs(w + phi_f) ** p - w**p - p * w ** (p - 1) * phi_f
        return R1 + pert

    def J(self, phi):
        coeffs, tail = self.T.project(self.rhs_field(phi), self.m)
        return self.solve_modes(-coeffs), tail

    def residual(self, phi):
        """Per-mode residual of L_gamma v + P(v) + |v|^p with independent second derivatives."""
        v = self.u_modes(phi)
        d2 = self.independent_second(v)
        _, grad, H = self.T.cartesian(v, d2_override=d2)
        pert = _perturbation(self.geo, grad, H).total
        field_v = self.T.scalar(v)
        src = pert + np.abs(field_v) ** self.params.p
        coeffs, _ = self.T.project(src, self.m, check_budget=False)
        scale = max(1.0, float(np.max(np.abs(field_v))) ** self.params.p)
        return {m.k: mode_residual(m.k, self.params, m, d2[m.k], coeffs[:, m.k], scale) for m in v}


@dataclass
class DomainResult:
    phi: list
    v: list
    trace: FixedPointTrace
    map: DomainMap
    params: ProblemParams
    certificates: dict = field(default_factory=dict)

    def u(self, y):
        """u(y) = v(x(y)) at points y of Omega_delta (shape (..., N))."""
        x = domain_map_invert(self.map, y)
        return evaluate_modes(self.v, self.params.N, x)


def evaluate_modes(modes: list[ModeProfile], N: int, x) -> np.ndarray:
    """sum_k a_k(|x|) psi_k(x_N/|x|) at Cartesian points (inside (r_min, 1])."""
    from ..harmonics import zonal

    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    cos = np.clip(x[..., -1] / r, -1.0, 1.0)
    grid = modes[0].grid
    if np.any(r < grid.r_min) or np.any(r > 1 + 1e-12):
        raise DomainError("evaluation points must satisfy r_min <= |x| <= 1")
    spl = grid.spline(np.stack([m.a for m in modes], axis=1))
    coeffs = spl(np.log(np.minimum(r, 1.0)))
    out = np.zeros(r.shape)
    for j, m in enumerate(modes):
        out += coeffs[..., j] * zonal(m.k, N, cos)
    return out


def fixed_point_domain(
    dmap: DomainMap,
    params: ProblemParams,
    w: RadialProfile,
    grid: RadialGrid | None = None,
    m: int | None = None,
    max_iter: int = 60,
    tol: float = 1e-6,
    step_tol: float = 1e-11,
    n_theta: int | None = None,
    certify_barrier: bool = True,
) -> DomainResult:
    """Banach iteration for the pulled-back problem, then the sign certificates."""
    grid = grid or RadialGrid()
    problem = DomainProblem(dmap, params, w, grid, m, n_theta)
    params = problem.params
    trace = FixedPointTrace(route="X", sigma=params.sigma, tol=tol)
    trace.extras["sigma_le_2_over_p_minus_1"] = bool(params.sigma <= 2 / (params.p - 1))
    trace.extras["map"] = dmap.name
    trace.extras["delta"] = dmap.delta
    phi = _iterate(problem, max_iter, step_tol, trace)
    res = problem.residual(phi)
    trace.residual_per_mode = res
    trace.final_residual = max(res.values())
    trace.residuals = [math.nan] * (len(trace.iterate_norms) - 1) + [trace.final_residual]
    problem.certify(phi, trace)
    v = problem.u_modes(phi)
    result = DomainResult(phi, v, trace, dmap, params)
    if params.gamma < params.N - 2 and certify_barrier:
        from .barrier import boundedness_bootstrap, maximum_principle_barrier

        field_v = problem.T.scalar(v)
        f_coeffs, _ = problem.T.project(-np.abs(field_v) ** params.p, problem.m, check_budget=False)
        f_modes = [ModeProfile(k, grid, f_coeffs[:, k]) for k in range(problem.m + 1)]
        barrier = maximum_principle_barrier(v, f_modes, params, radii=problem.geo.y_radius)
        boot = boundedness_bootstrap(v, params)
        result.certificates = {
            "nonnegative": barrier.barrier_ok,
            "barrier_margin": barrier.margin,
            "barrier_bound": barrier.bound,
            "bounded": boot["bounded"],
            "sigma1": boot["sigma1"],
        }
    else:
        result.certificates = {"positive": trace.positive_certified}
    trace.extras.update({f"cert_{k}": v_ for k, v_ in result.certificates.items()})
    log.info("domain fixed point: %s", trace.summary())
    return result


def dilation_exact(w: RadialProfile, delta: float, y) -> np.ndarray:
    """u*(y) = (1+delta)^{-2/(p-1)} w(|y|/(1+delta)) on the dilated ball."""
    from ..radial_solver import evaluate_w

    p = w.params.p
    r = np.linalg.norm(np.asarray(y, dtype=float), axis=-1) / (1 + delta)
    return (1 + delta) ** (-2 / (p - 1)) * evaluate_w(w, np.minimum(r, 1.0))[0]


__all__ = [
    "CATALOG",
    "DomainMap",
    "domain_map_invert",
    "DomainGeometry",
    "PerturbationFields",
    "perturbation_terms",
    "transformed_operator",
    "fixed_point_domain",
    "DomainResult",
    "evaluate_modes",
    "dilation_exact",
]
