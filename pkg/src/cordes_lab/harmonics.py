"""Zonal spherical harmonics on S^{N-1} and quadrature in the polar angle.

For axisymmetric data the angular variable is x = cos(theta_1) and the surface
measure reduces to |S^{N-2}| (1 - x^2)^{(N-3)/2} dx. The zonal harmonic of
degree k is the Gegenbauer polynomial C_k^{(N-2)/2}(x), normalised in
L^2(S^{N-1}).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import eval_gegenbauer, gammaln, roots_jacobi


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^dim in R^{dim+1}."""
    return 2.0 * math.pi ** ((dim + 1) / 2) / math.gamma((dim + 1) / 2)


def _gegenbauer_norm_sq(k: int, alpha: float) -> float:
    # int_{-1}^{1} C_k^alpha(x)^2 (1-x^2)^(alpha-1/2) dx
    log_h = (
        math.log(math.pi)
        + (1 - 2 * alpha) * math.log(2.0)
        + gammaln(k + 2 * alpha)
        - gammaln(k + 1)
        - math.log(k + alpha)
        - 2 * gammaln(alpha)
    )
    return math.exp(log_h)


def zonal_normalisation(k: int, N: int) -> float:
    alpha = (N - 2) / 2
    return 1.0 / math.sqrt(sphere_area(N - 2) * _gegenbauer_norm_sq(k, alpha))


def zonal(k: int, N: int, x, derivative: int = 0):
    """psi_k(x) or its first/second derivative in x = cos(theta_1)."""
    alpha = (N - 2) / 2
    c = zonal_normalisation(k, N)
    x = np.asarray(x, dtype=float)
    if derivative == 0:
        return c * eval_gegenbauer(k, alpha, x)
    if derivative == 1:
        return c * 2 * alpha * eval_gegenbauer(k - 1, alpha + 1, x) if k >= 1 else 0 * x
    if derivative == 2:
        if k < 2:
            return 0 * x
        return c * 4 * alpha * (alpha + 1) * eval_gegenbauer(k - 2, alpha + 2, x)
    raise ValueError("derivative must be 0, 1 or 2")


def angular_node_count(k_max: int) -> int:
    return max(64, 4 * k_max + 16)


@lru_cache(maxsize=64)
def _angular_rule(N: int, n: int):
    a = (N - 3) / 2
    x, w = roots_jacobi(n, a, a)
    w = w * sphere_area(N - 2)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


class AngularRule:
    """Gauss-Jacobi nodes in x with weights that integrate over S^{N-1}.

    ``psi[k]``, ``dpsi[k]``, ``d2psi[k]`` tabulate the zonal harmonics and
    their x-derivatives at the nodes for k = 0..k_max.
    """

    def __init__(self, N: int, k_max: int, n: int | None = None):
        self.N = N
        self.k_max = k_max
        self.n = n or angular_node_count(k_max)
        self.x, self.weights = _angular_rule(N, self.n)
        self.sin = np.sqrt(1.0 - self.x**2)
        ks = range(k_max + 1)
        self.psi = np.array([zonal(k, N, self.x) for k in ks])
        self.dpsi = np.array([zonal(k, N, self.x, 1) for k in ks])
        self.d2psi = np.array([zonal(k, N, self.x, 2) for k in ks])
        self.eigenvalues = np.array([k * (k + N - 2) for k in ks], dtype=float)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """sum_k coeffs[..., k] psi_k(x_q) -> array (..., n)."""
        return coeffs @ self.psi[: coeffs.shape[-1]]

    def project(self, values: np.ndarray, k_max: int | None = None) -> np.ndarray:
        """Coefficients int values psi_k dsigma for k <= k_max; values (..., n)."""
        k_max = self.k_max if k_max is None else k_max
        return (values * self.weights) @ self.psi[: k_max + 1].T

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return values @ self.weights
