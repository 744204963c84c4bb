"""Axisymmetric fields on the (r, angle) tensor grid.

Points sit in the meridian plane x = r (sin(theta) e_1 + cos(theta) e_N), with
angular nodes x_q = cos(theta_q) from :class:`AngularRule`. Cartesian index 0 is
e_1, index N-1 is e_N and the indices in between are azimuthal directions.
"""

from __future__ import annotations

import numpy as np

from ..errors import ModeBudgetError
from ..grid import RadialGrid
from ..harmonics import AngularRule
from ..weighted_spaces import ModeProfile, polar_fields

TAIL_LIMIT = 0.10


class TensorGrid:
    def __init__(self, grid: RadialGrid, N: int, k_max: int, n_theta: int | None = None):
        self.grid, self.N, self.k_max = grid, N, k_max
        self.ang = AngularRule(N, k_max, n_theta)
        self.r = grid.r[:, None]
        self.cos = self.ang.x[None, :]
        self.sin = self.ang.sin[None, :]
        shape = (grid.n, self.ang.n)
        self.points = np.zeros(shape + (N,))
        self.points[..., 0] = self.r * self.sin
        self.points[..., -1] = self.r * self.cos
        self.e_r = np.zeros(shape + (N,))
        self.e_r[..., 0] = self.sin
        self.e_r[..., -1] = self.cos
        self.e_t = np.zeros(shape + (N,))
        self.e_t[..., 0] = self.cos
        self.e_t[..., -1] = -self.sin
        self._radial_weight = grid.r**N  # r^{N-1} dr = r^N du

    @property
    def shape(self):
        return self.points.shape[:-1]

    def _coeffs(self, modes: list[ModeProfile], attr: str, fallback=None):
        cols = []
        for m in modes:
            arr = getattr(m, attr)
            if arr is None:
                if fallback is None:
                    raise ValueError(f"mode k={m.k} lacks {attr}")
                arr = fallback(m)
            cols.append(arr)
        return np.stack(cols, axis=1)

    def scalar(self, modes: list[ModeProfile]) -> np.ndarray:
        if not modes:
            return np.zeros(self.shape)
        ks = [m.k for m in modes]
        return self._coeffs(modes, "a") @ self.ang.psi[ks]

    def cartesian(self, modes: list[ModeProfile], d2_override: dict | None = None):
        """(v, grad v, Hessian v) at every tensor point; Hessian from a, a', a''.

        ``d2_override`` maps k to replacement a'' samples (used for independent checks).
        """
        N = self.N
        if not modes:
            z = np.zeros(self.shape)
            return z, np.zeros(self.shape + (N,)), np.zeros(self.shape + (N, N))
        ks = [m.k for m in modes]
        a = self._coeffs(modes, "a")
        da = self._coeffs(modes, "a_prime")
        if d2_override:
            d2a = np.stack(
                [d2_override.get(m.k, m.a_double_prime) for m in modes], axis=1
            )
        else:
            d2a = self._coeffs(modes, "a_double_prime")
        F = polar_fields(a, da, d2a, self.ang, ks, self.r)
        h_rr, h_rt, h_tt, h_az = F.hessian_frame()
        er, et = self.e_r, self.e_t
        grad = F.phi_r[..., None] * er + (F.phi_t / self.r)[..., None] * et
        H = (
            h_rr[..., None, None] * er[..., :, None] * er[..., None, :]
            + h_rt[..., None, None] * (er[..., :, None] * et[..., None, :] + et[..., :, None] * er[..., None, :])
            + h_tt[..., None, None] * et[..., :, None] * et[..., None, :]
        )
        for i in range(1, N - 1):
            H[..., i, i] = h_az
        return F.phi, grad, H

    def project(self, values: np.ndarray, k_max: int | None = None, check_budget: bool = True):
        """Zonal coefficients (n_r, k_max+1) and the relative energy left in higher modes."""
        k_max = self.k_max if k_max is None else k_max
        coeffs = self.ang.project(values, k_max)
        total = (values**2) @ self.ang.weights
        kept = np.sum(coeffs**2, axis=1)
        wts = self._radial_weight
        tot = float(total @ wts)
        tail = max(tot - float(kept @ wts), 0.0) / tot if tot > 0 else 0.0
        if check_budget and tail > TAIL_LIMIT:
            raise ModeBudgetError(
                f"mode budget exceeded: {100 * tail:.3g}% of the energy lies above k={k_max}"
            )
        return coeffs, tail


def modes_from_coeffs(grid: RadialGrid, coeffs: np.ndarray, ks=None) -> list[ModeProfile]:
    ks = range(coeffs.shape[1]) if ks is None else ks
    return [ModeProfile(k, grid, coeffs[:, j]) for j, k in enumerate(ks)]

