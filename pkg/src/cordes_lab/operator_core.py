"""Closed-form quantities attached to L_gamma = Delta + gamma d_rr on the unit ball.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import WindowError


class Case(enum.Enum):
    """Parameter regimes of the isomorphism theorem for L_gamma: X -> Y."""

    ONE = 1  # 0 < gamma < N-2, sigma > 0
    TWO = 2  # gamma > N-2, sigma < 0
    THREE = 3  # 0 < gamma < N-2, sigma < 0, no k=0 mode

    @classmethod
    def parse(cls, value) -> "Case":
        if isinstance(value, Case):
            return value
        text = str(value).strip().lower().replace("case", "").strip()
        if text.upper() in cls.__members__:
            return cls[text.upper()]
        return cls(int(text))


@dataclass(frozen=True)
class ProblemParams:
    """The tuple (N, gamma, p, sigma, t).

    ``gamma = 0`` is accepted so the classical Lane-Emden problem can be used
    as a regression oracle. ``sigma`` is optional for purely radial work.
    """

    N: int
    gamma: float
    p: float = 2.0
    sigma: float | None = None
    t: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise WindowError(f"N must be an integer >= 3, got {self.N}", "N >= 3")
        if not self.gamma >= 0:
            raise WindowError(f"gamma must be >= 0, got {self.gamma}", "gamma >= 0")
        if not self.p > 1:
            raise WindowError(f"p must exceed 1, got {self.p}", "p > 1")
        if self.t is None:
            object.__setattr__(self, "t", float(self.N + 1))
        if not self.t > self.N:
            raise WindowError(f"t must exceed N={self.N}, got {self.t}", "t > N")

    @property
    def critical_exponent(self) -> float:
        return critical_exponent(self.N, self.gamma)

    @property
    def effective_dimension(self) -> float:
        return effective_dimension(self.N, self.gamma)

    def require_sigma(self) -> float:
        if self.sigma is None:
            raise WindowError("sigma is required for weighted-space work", "sigma given")
        return float(self.sigma)

    def with_(self, **changes) -> "ProblemParams":
        fields = dict(N=self.N, gamma=self.gamma, p=self.p, sigma=self.sigma, t=self.t)
        fields.update(changes)
        return ProblemParams(**fields)

    def as_dict(self) -> dict:
        return dict(N=self.N, gamma=self.gamma, p=self.p, sigma=self.sigma, t=self.t)


@dataclass(frozen=True)
class IndicialPair:
    beta_plus: float
    beta_minus: float
    k: int


def critical_exponent(N: int, gamma: float) -> float:
    """(N+2+3 gamma)/(N-2-gamma) below gamma = N-2, +inf from there on."""
    if gamma >= N - 2:
        return math.inf
    return (N + 2 + 3 * gamma) / (N - 2 - gamma)


def effective_dimension(N: int, gamma: float) -> float:
    """N_gamma with N_gamma - 1 = (N-1)/(1+gamma)."""
    return (N + gamma) / (1 + gamma)


def cordes_ratio(N: int, gamma: float) -> float:
    """(trace a)^2 / |a|^2 for a_ij = delta_ij + gamma x_i x_j/|x|^2."""
    return (N + gamma) ** 2 / (N + 2 * gamma + gamma**2)


def mode_eigenvalue(k: int, N: int) -> float:
    if k < 0:
        raise ValueError("mode index must be nonnegative")
    return float(k * (k + N - 2))


def indicial_roots(k: int, params: ProblemParams) -> IndicialPair:
    """Roots of (1+gamma) beta^2 + (N-2-gamma) beta - lambda_k = 0.

    Uses the cancellation-free form of the quadratic formula, so the k = 0
    root at the origin is returned as an exact zero.
    """
    a = 1.0 + params.gamma
    b = params.N - 2.0 - params.gamma
    c = -mode_eigenvalue(k, params.N)
    disc = math.sqrt(b * b - 4.0 * a * c)
    if b == 0.0 and c == 0.0:
        return IndicialPair(0.0, 0.0, k)
    q = -0.5 * (b + math.copysign(disc, b))
    r1, r2 = q / a, c / q
    return IndicialPair(max(r1, r2), min(r1, r2), k)


def indicial_residual(beta: float, k: int, params: ProblemParams) -> float:
    g = params.gamma
    return (1 + g) * beta**2 + (params.N - 2 - g) * beta - mode_eigenvalue(k, params.N)


def sigma_window(case, N: int, gamma: float) -> tuple[float, float]:
    """Open sigma interval on which L_gamma: X -> Y is an isomorphism."""
    case = Case.parse(case)
    if case in (Case.ONE, Case.THREE) and not (0 < gamma < N - 2):
        raise WindowError(
            f"{case.name.title()} case requires 0 < gamma < N-2 (N={N}, gamma={gamma})",
            "0 < gamma < N-2",
        )
    if case is Case.TWO and not gamma > N - 2:
        raise WindowError(
            f"Case two requires gamma > N-2 (N={N}, gamma={gamma})", "gamma > N-2"
        )
    edge = (N - 2 - gamma) / (1 + gamma)
    if case is Case.ONE:
        return (0.0, edge)
    if case is Case.TWO:
        return (edge, 0.0)
    lower = 0.5 * edge - math.sqrt((N - 2 - gamma) ** 2 + 4 * (1 + gamma) * (N - 2)) / (
        2 * (1 + gamma)
    )
    return (lower, 0.0)


def infer_case(params: ProblemParams) -> Case:
    """Pick the theorem case from (gamma, sign of sigma) and check the window."""
    sigma = params.require_sigma()
    N, g = params.N, params.gamma
    if g > N - 2:
        case = Case.TWO
    elif 0 < g < N - 2:
        case = Case.ONE if sigma > 0 else Case.THREE
    else:
        raise WindowError(
            f"gamma = {g} is not covered by any case (gamma = 0 or gamma = N-2)",
            "gamma > 0 and gamma != N-2",
        )
    lo, hi = sigma_window(case, N, g)
    if not lo < sigma < hi:
        raise WindowError(
            f"sigma = {sigma} outside the {case.name.lower()} window ({lo:.6g}, {hi:.6g})",
            f"{lo:.6g} < sigma < {hi:.6g}",
        )
    return case


def check_mode_allowed(k: int, case: Case) -> None:
    if case is Case.THREE and k == 0:
        raise WindowError(
            "the k = 0 mode is excluded when sigma < 0 and gamma < N-2", "k >= 1 in case three"
        )
