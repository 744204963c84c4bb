"""Pointwise Taylor remainders of s -> |s|^p about s = w > 0 and their bounds.

    R1 = |w+phi|^p - p w^{p-1} phi - w^p
    R2 = |w+phi_hat|^p - |w+phi|^p - p w^{p-1} (phi_hat - phi)

    |R1| <= C_p (w^{p-2} phi^2 + |phi|^p)
    |R2| <= C_p (w^{p-2} (|phi| + |phi_hat|) + |phi|^{p-1} + |phi_hat|^{p-1}) |phi_hat - phi|

C_p is not available in closed form; it is estimated once per p by a seeded
sweep and frozen with a safety factor of 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import DomainError

SWEEP_SAMPLES = 100_000
SWEEP_SEED = 20240607
SAFETY = 2.0


@dataclass(frozen=True)
class TaylorRemainders:
    R1: np.ndarray
    R2: np.ndarray
    bound1: np.ndarray
    bound2: np.ndarray

    def __iter__(self):
        return iter((self.R1, self.R2, self.bound1, self.bound2))

    @property
    def holds(self) -> bool:
        return bool(np.all(np.abs(self.R1) <= self.bound1) and np.all(np.abs(self.R2) <= self.bound2))


def _remainders(w, phi, phi_hat, p):
    R1 = np.abs(w + phi) ** p - p * w ** (p - 1) * phi - w**p
    R2 = np.abs(w + phi_hat) ** p - np.abs(w + phi) ** p - p * w ** (p - 1) * (phi_hat - phi)
    shape1 = w ** (p - 2) * phi**2 + np.abs(phi) ** p
    shape2 = (
        w ** (p - 2) * (np.abs(phi) + np.abs(phi_hat))
        + np.abs(phi) ** (p - 1)
        + np.abs(phi_hat) ** (p - 1)
    ) * np.abs(phi_hat - phi)
    return R1, R2, shape1, shape2


def sweep_samples(n: int, seed: int):
    rng = np.random.default_rng(seed)
    w = 10.0 * (1.0 - rng.random(n))  # (0, 10]
    phi = rng.uniform(-5.0, 5.0, n)
    phi_hat = rng.uniform(-5.0, 5.0, n)
    return w, phi, phi_hat


@lru_cache(maxsize=32)
def taylor_constant(p: float, n: int = SWEEP_SAMPLES, seed: int = SWEEP_SEED) -> float:
    """Swept sup of |R_i| / shape_i over (0,10] x [-5,5]^2, times the safety factor."""
    w, phi, phi_hat = sweep_samples(n, seed)
    R1, R2, s1, s2 = _remainders(w, phi, phi_hat, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        q1 = np.where(s1 > 0, np.abs(R1) / s1, 0.0)
        q2 = np.where(s2 > 0, np.abs(R2) / s2, 0.0)
    return SAFETY * float(max(q1.max(), q2.max()))


def taylor_remainders(w, phi, phi_hat, p: float, C_p: float | None = None) -> TaylorRemainders:
    """R1, R2 and their bounding expressions (vectorised over the inputs)."""
    w = np.asarray(w, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("taylor remainders need w > 0")
    phi = np.asarray(phi, dtype=float)
    phi_hat = np.asarray(phi_hat, dtype=float)
    C = taylor_constant(float(p)) if C_p is None else C_p
    R1, R2, s1, s2 = _remainders(w, phi, phi_hat, p)
    return TaylorRemainders(R1, R2, C * s1, C * s2)
