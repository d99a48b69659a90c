"""The spike random variable ``x = eps * max(1, eta * R)`` and its moments.

``eps`` is a symmetric sign and ``eta`` a Bernoulli(delta) indicator, so
``|x|`` is 1 with probability ``1 - delta`` and ``R`` with probability
``delta``.  The variable is kept unnormalized; its variance is
``c1_norm ** 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvalidParameterError",
    "SpikeParams",
    "MomentProfile",
    "DominationCheck",
    "abs_moment",
    "moment_profile",
    "moment_condition_holds",
    "linear_form_even_moment",
    "gaussian_even_moment",
    "verify_domination",
    "phi_decreasing_check",
    "sample_x",
    "sample_many",
]

GRID_POINTS = 1024
CONDITION_TOL = 1e-9


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SpikeParams:
    delta: float
    R: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidParameterError(f"delta must lie in [0, 1], got {self.delta}")
        if not (self.R >= 1.0 and math.isfinite(self.R)):
            raise InvalidParameterError(f"R must be a finite real >= 1, got {self.R}")

    @property
    def c1_norm(self) -> float:
        """L2 norm of x, i.e. ``sqrt((1 - delta) + R**2 * delta)``."""
        return math.sqrt((1.0 - self.delta) + self.R ** 2 * self.delta)


@dataclass
class MomentProfile:
    q_values: list[float]
    abs_moments: list[float] = field(default_factory=list)
    ratio_to_gaussian: list[float] = field(default_factory=list)


def abs_moment(params: SpikeParams, q: float) -> float:
    """E|x|^q = (1 - delta) + delta * R^q."""
    if q < 1:
        raise InvalidParameterError(f"q must be >= 1, got {q}")
    return (1.0 - params.delta) + params.delta * params.R ** q


def moment_profile(params: SpikeParams, q_values) -> MomentProfile:
    qs = [float(q) for q in q_values]
    moments = [abs_moment(params, q) for q in qs]
    ratios = [m ** (1.0 / q) / math.sqrt(q) for m, q in zip(moments, qs)]
    return MomentProfile(q_values=qs, abs_moments=moments, ratio_to_gaussian=ratios)


def moment_condition_holds(params: SpikeParams, p: float, L: float) -> tuple[bool, float]:
    """Check ``R * delta**(1/q) <= L * sqrt(q)`` for all q in [2, p].

    Evaluated on a dense grid plus both endpoints.  Returns the verdict and
    the q where ``R * delta**(1/q) / sqrt(q)`` is largest.
    """
    if p < 2:
        raise InvalidParameterError(f"p must be >= 2, got {p}")
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    if params.delta == 0.0:
        return True, 2.0
    qs = np.unique(np.concatenate(([2.0, float(p)], np.linspace(2.0, p, GRID_POINTS))))
    ratio = params.R * params.delta ** (1.0 / qs) / (L * np.sqrt(qs))
    i = int(np.argmax(ratio))
    return bool(ratio[i] <= 1.0 + CONDITION_TOL), float(qs[i])


def _check_even(q) -> int:
    if int(q) != q or int(q) % 2 or q < 2:
        raise InvalidParameterError(f"q must be an even integer >= 2, got {q}")
    return int(q)


def gaussian_even_moment(q: int) -> float:
    """(q-1)!!, the q-th moment of a standard Gaussian."""
    q = _check_even(q)
    return float(math.prod(range(q - 1, 0, -2)))


def linear_form_even_moment(t, params: SpikeParams, q: int) -> float:
    """E (sum_j t_j x_j)^q for independent copies x_j, q even.

    Dynamic program over coordinates on the moment sequence of the partial
    sums; odd moments of x vanish by symmetry.
    """
    q = _check_even(q)
    t = np.asarray(t, dtype=float).ravel()
    if not np.isfinite(t).all():
        raise InvalidParameterError("t must have finite entries")
    xm = [1.0] + [abs_moment(params, i) if i % 2 == 0 else 0.0 for i in range(1, q + 1)]
    binom = [[math.comb(r, i) for i in range(r + 1)] for r in range(q + 1)]
    S = [1.0] + [0.0] * q
    for tk in t:
        if tk == 0.0:
            continue
        powers = [tk ** i for i in range(q + 1)]
        new = [0.0] * (q + 1)
        for r in range(0, q + 1, 2):
            acc = 0.0
            for i in range(0, r + 1, 2):
                acc += binom[r][i] * S[r - i] * powers[i] * xm[i]
            new[r] = acc
        S = new
    return S[q]


@dataclass
class DominationCheck:
    """Outcome of comparing a spike linear form against its Gaussian twin.

    ``failing_order`` is the first even order r at which the per-coordinate
    hypothesis ``||x||_r <= L ||g||_r`` fails (None if it holds for all
    r <= q).  ``verdict`` is only defined when the hypothesis holds.
    """

    lhs: float
    rhs: float
    failing_order: int | None = None
    failing_values: tuple[float, float] | None = None

    @property
    def bound_holds(self) -> bool:
        return bool(self.lhs <= self.rhs * (1.0 + 1e-12))

    @property
    def precondition_ok(self) -> bool:
        return self.failing_order is None

    @property
    def verdict(self) -> bool | None:
        return self.bound_holds if self.precondition_ok else None


def verify_domination(t, params: SpikeParams, q: int, L: float) -> DominationCheck:
    q = _check_even(q)
    failing = None
    for r in range(2, q + 1, 2):
        x_norm = abs_moment(params, r) ** (1.0 / r)
        g_norm = L * gaussian_even_moment(r) ** (1.0 / r)
        if x_norm > g_norm * (1.0 + 1e-12):
            failing = (r, (x_norm, g_norm))
            break
    t = np.asarray(t, dtype=float).ravel()
    lhs = float(linear_form_even_moment(t, params, q))
    rhs = L ** q * float(np.linalg.norm(t)) ** q * gaussian_even_moment(q)
    if failing is None:
        return DominationCheck(lhs=lhs, rhs=rhs)
    return DominationCheck(lhs=lhs, rhs=rhs, failing_order=failing[0],
                           failing_values=failing[1])


def phi_decreasing_check(d: int, c1: float, p: float) -> bool:
    """Is ``phi(x) = sqrt(x) * (d/c1)**(1/x)`` nonincreasing on [2, p]?

    True iff ``p <= 2 log(d/c1)``; in that case the grid evaluation must
    agree, otherwise a RuntimeError is raised.
    """
    if d < 2 or c1 < 1:
        raise InvalidParameterError("need d >= 2 and c1 >= 1")
    ratio = d / c1
    if ratio <= 1:
        raise InvalidParameterError(f"d/c1 must exceed 1, got {ratio}")
    bound = 2.0 * math.log(ratio)
    ok = p <= bound * (1.0 + 1e-12)
    if ok and p > 2:
        xs = np.linspace(2.0, p, GRID_POINTS)
        phi = np.sqrt(xs) * ratio ** (1.0 / xs)
        if np.any(np.diff(phi) > 1e-12 * phi[:-1]):
            raise RuntimeError("phi grid is not monotone below 2 log(d/c1)")
    return bool(ok)


def _from_uniforms(params: SpikeParams, u_sign, u_spike):
    sign = np.where(u_sign < 0.5, -1.0, 1.0)
    spike = u_spike < params.delta
    return sign, spike


def sample_x(params: SpikeParams, rng: np.random.Generator) -> float:
    """One draw of x; consumes two uniforms (sign, then spike indicator)."""
    u = rng.random(2)
    sign, spike = _from_uniforms(params, u[0], u[1])
    return float(sign * (params.R if spike else 1.0))


def sample_many(params: SpikeParams, rng: np.random.Generator, size) -> np.ndarray:
    """Vectorized draws, consuming uniforms in the same order as sample_x."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    u = rng.random(shape + (2,))
    sign, spike = _from_uniforms(params, u[..., 0], u[..., 1])
    return sign * np.where(spike, params.R, 1.0)
