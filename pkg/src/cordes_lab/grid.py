"""Log-spaced radial grids on (r_min, 1] and the interpolation they carry.

All radial arrays in the package live on a :class:`RadialGrid`: nodes
``r_i = exp(u_i)`` with uniform spacing ``h`` in ``u = log r`` and
``r[-1] == 1`` exactly. Power laws are exponentials in ``u``, which is why the
interpolation below works in the log variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import make_interp_spline

STENCIL = 6  # local Lagrange interpolation uses 6 nodes (degree 5)


@dataclass(frozen=True)
class RadialGrid:
    r_min: float = 2.0**-20
    per_octave: int = 64

    def __post_init__(self):
        if not 0 < self.r_min < 1:
            raise ValueError("r_min must lie in (0, 1)")
        if self.per_octave < 4:
            raise ValueError("per_octave must be at least 4")

    @cached_property
    def n(self) -> int:
        octaves = math.log2(1.0 / self.r_min)
        return int(round(octaves * self.per_octave)) + 1

    @cached_property
    def h(self) -> float:
        return -math.log(self.r_min) / (self.n - 1)

    @cached_property
    def u(self) -> np.ndarray:
        u = math.log(self.r_min) + self.h * np.arange(self.n)
        u[-1] = 0.0
        return u

    @cached_property
    def r(self) -> np.ndarray:
        r = np.exp(self.u)
        r[-1] = 1.0
        return r

    @property
    def key(self) -> tuple:
        return (self.r_min, self.per_octave)

    def refined(self) -> "RadialGrid":
        return RadialGrid(self.r_min, 2 * self.per_octave)

    def spline(self, values, k: int = 5):
        """Interpolating spline in u; values may carry trailing axes."""
        return make_interp_spline(self.u, np.asarray(values), k=k, axis=0)

    def interpolate(self, values, r):
        """Evaluate sampled values at radii ``r`` (inside [r_min, 1])."""
        return self.spline(values)(np.log(np.asarray(r, dtype=float)))

    def derivative(self, values):
        """d/dr of sampled values, via a degree-7 spline in u (independent of any ODE)."""
        spl = make_interp_spline(self.u, np.asarray(values), k=7, axis=0).derivative()
        d = spl(self.u)
        return d / self.r.reshape((-1,) + (1,) * (d.ndim - 1))


def _lagrange_basis(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """L[q, m] = m-th Lagrange basis polynomial on ``nodes`` evaluated at x[q]."""
    L = np.ones((x.size, nodes.size))
    for m in range(nodes.size):
        for j in range(nodes.size):
            if j != m:
                L[:, m] *= (x - nodes[j]) / (nodes[m] - nodes[j])
    return L


@dataclass(frozen=True)
class PanelRule:
    """Gauss-Legendre nodes inside each grid interval plus the interpolation
    weights that express values there through neighbouring grid samples.

    ``start[l]`` is the first grid index of the stencil for interval l and
    ``basis[l]`` (shape (q, STENCIL)) maps the stencil samples to the q
    Gauss nodes of interval l.
    """

    grid: RadialGrid
    order: int = 8

    @cached_property
    def gauss(self):
        x, wts = np.polynomial.legendre.leggauss(self.order)
        return 0.5 * (x + 1.0), 0.5 * wts

    @cached_property
    def start(self) -> np.ndarray:
        n = self.grid.n
        left = np.arange(n - 1) - (STENCIL // 2 - 1)
        return np.clip(left, 0, n - STENCIL)

    @cached_property
    def basis(self) -> np.ndarray:
        xi, _ = self.gauss
        n = self.grid.n
        out = np.empty((n - 1, self.order, STENCIL))
        nodes = np.arange(STENCIL, dtype=float)
        cache = {}
        for l in range(n - 1):
            offset = l - self.start[l]
            if offset not in cache:
                cache[offset] = _lagrange_basis(nodes, offset + xi)
            out[l] = cache[offset]
        return out

    @cached_property
    def u_nodes(self) -> np.ndarray:
        """u coordinates of the Gauss nodes, shape (n-1, order)."""
        xi, _ = self.gauss
        return self.grid.u[:-1, None] + self.grid.h * xi[None, :]

    def node_values(self, samples: np.ndarray) -> np.ndarray:
        """Interpolated values at the Gauss nodes, shape (n-1, order)."""
        idx = self.start[:, None] + np.arange(STENCIL)[None, :]
        return np.einsum("lqm,lm->lq", self.basis, samples[idx])

    def weight_matrix(self, kernel: np.ndarray):
        """Sparse (n-1, n) matrix W with (W c)_l = sum_q h w_q kernel[l,q] c(u_lq)."""
        from scipy.sparse import csr_matrix

        _, wts = self.gauss
        n = self.grid.n
        coef = np.einsum("lq,lqm->lm", kernel * (self.grid.h * wts)[None, :], self.basis)
        rows = np.repeat(np.arange(n - 1), STENCIL)
        cols = (self.start[:, None] + np.arange(STENCIL)[None, :]).ravel()
        return csr_matrix((coef.ravel(), (rows, cols)), shape=(n - 1, n))


def tail_exponent(samples: np.ndarray, grid: RadialGrid, span: int | None = None) -> float:
    """Leading power law alpha with samples ~ r^alpha at the inner edge.

    Estimated from the log-slope over the innermost octave; returns 0 when the
    samples vanish or change sign there (treated as bounded data).
    """
    span = span or grid.per_octave
    head = np.asarray(samples[: span + 1], dtype=float)
    if head.size < 2 or np.any(head == 0) or not (np.all(head > 0) or np.all(head < 0)):
        return 0.0
    return float(np.log(np.abs(head[-1]) / np.abs(head[0])) / (grid.u[span] - grid.u[0]))
