"""Inradius of A.B_1, restricted singular values and the rescaling identity.

The largest c with c.B_2^m inside A.B_1^n is ``min_{|w|_2 = 1} |A^T w|_inf``,
because A.B_1^n is the convex hull of the signed columns and its support
function in direction w is ``max_j |<a_j, w>|``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .ensemble import EnsembleDraw, NormalizedMatrix
from .recovery import BudgetExceeded
from .spike import InvalidParameterError

__all__ = [
    "InradiusResult",
    "inradius",
    "inradius_grid_oracle",
    "check_ball_inclusion",
    "ball_inclusion_comparison",
    "restricted_min_singular",
    "lemma16_order",
    "rescaling_identity_check",
]

DEFAULT_STARTS = 256
DEFAULT_STEPS = 2000
SUPPORT_BUDGET = 10 ** 6


@dataclass
class InradiusResult:
    radius: float
    minimizing_direction: np.ndarray
    certificate_gap: float


def _objective(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    return np.abs(W @ A).max(axis=-1)


def _subgradient_search(A, starts, steps, rng):
    m, _ = A.shape
    W = rng.standard_normal((starts, m))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    best_val = _objective(A, W)
    best_W = W.copy()
    scale = float(np.linalg.norm(A, axis=0).max())
    idx = np.arange(starts)
    for k in range(1, steps + 1):
        G = W @ A
        j = np.abs(G).argmax(axis=1)
        g = np.sign(G[idx, j])[:, None] * A[:, j].T
        W = W - (0.5 / (scale * math.sqrt(k))) * g
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        val = _objective(A, W)
        better = val < best_val
        best_val = np.where(better, val, best_val)
        best_W[better] = W[better]
    # deterministic reduction: min value, ties to the lowest start index
    i = int(np.argmin(best_val))
    return float(best_val[i]), best_W[i]


def _polar_vertex(A: np.ndarray, w0: np.ndarray) -> np.ndarray | None:
    """Vertex of {w : |A^T w| <= 1} maximizing <w0, w>."""
    m, n = A.shape
    # variables: w (free, m), slacks s_plus, s_minus >= 0
    lhs = np.zeros((2 * n, m + 2 * n))
    lhs[:n, :m] = A.T
    lhs[n:, :m] = -A.T
    lhs[:, m:] = np.eye(2 * n)
    rhs = np.ones(2 * n)
    c = np.zeros(m + 2 * n)
    c[:m] = -w0
    lower = np.zeros(m + 2 * n)
    lower[:m] = -np.inf
    res = lp.solve(lp.LPInstance(c, lhs, rhs, lower=lower))
    if not res.optimal:
        return None
    return np.asarray(res.point[:m], dtype=float)


def _polish(A: np.ndarray, w: np.ndarray, max_rounds: int = 50) -> np.ndarray:
    """Climb vertices of the polar body; the norm increases at every step."""
    cur = w / np.abs(A.T @ w).max()
    for _ in range(max_rounds):
        v = _polar_vertex(A, cur)
        if v is None or np.linalg.norm(v) < np.linalg.norm(cur):
            break
        gained = np.linalg.norm(v) > np.linalg.norm(cur) * (1 + 1e-13)
        cur = v
        if not gained:
            break
    return cur


def inradius(A, budget: int = DEFAULT_STARTS, steps: int = DEFAULT_STEPS,
             seed: int = 0, check_grid: bool = True) -> InradiusResult:
    """Largest c with c.B_2^m inside A.B_1^n.

    Multi-start projected subgradient descent of ``|A^T w|_inf`` on the
    sphere, then an exact polish that walks vertices of the polar body
    ``{w : |A^T w|_inf <= 1}`` (its farthest vertex from the origin sits at
    distance 1/radius).  For m <= 3 the result is compared against an
    angular grid search.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if budget < 1:
        raise InvalidParameterError("budget must be at least one start")
    if not np.any(A):
        e = np.zeros(m)
        e[0] = 1.0
        return InradiusResult(radius=0.0, minimizing_direction=e, certificate_gap=0.0)
    if np.linalg.matrix_rank(A) < m:
        u = np.linalg.svd(A)[0][:, -1]
        return InradiusResult(radius=0.0, minimizing_direction=u,
                              certificate_gap=float(np.abs(A.T @ u).max()))
    rng = np.random.default_rng(seed)
    sampled, w = _subgradient_search(A, budget, steps, rng)
    v = _polish(A, w)
    direction = v / np.linalg.norm(v)
    radius = float(np.abs(A.T @ direction).max())
    if radius > sampled:
        radius, direction = sampled, w
    if check_grid and m <= 3:
        grid = inradius_grid_oracle(A)
        if abs(grid - radius) > 1e-3 * max(grid, 1e-12):
            raise RuntimeError(f"inradius {radius} disagrees with grid oracle {grid}")
    return InradiusResult(radius=radius, minimizing_direction=direction,
                          certificate_gap=sampled - radius)


def _sphere_points(theta, phi=None):
    if phi is None:
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def inradius_grid_oracle(A, coarse: int = 720, zoom_rounds: int = 12,
                         keep: int = 16) -> float:
    """Angular-grid minimum of ``|A^T w|_inf`` for m <= 3.

    A coarse grid over the half sphere, then repeated local grids around
    the best ``keep`` cells.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[0]
    if m == 1:
        return float(np.abs(A).max())
    if m > 3:
        raise InvalidParameterError("grid oracle supports m <= 3")
    if m == 2:
        th = np.linspace(0.0, np.pi, 8 * coarse, endpoint=False)
        vals = _objective(A, _sphere_points(th))
        order = np.argsort(vals)[:keep]
        best = float(vals.min())
        h = np.pi / (8 * coarse)
        for t0 in th[order]:
            c, step = t0, h
            for _ in range(zoom_rounds):
                loc = c + np.linspace(-step, step, 41)
                lv = _objective(A, _sphere_points(loc))
                i = int(np.argmin(lv))
                best = min(best, float(lv[i]))
                c, step = loc[i], step / 8
        return best
    th = np.linspace(0.0, np.pi / 2, coarse // 2 + 1)
    ph = np.linspace(0.0, 2 * np.pi, 2 * coarse, endpoint=False)
    TT, PP = np.meshgrid(th, ph, indexing="ij")
    vals = _objective(A, _sphere_points(TT, PP))
    flat = np.argsort(vals, axis=None)[:keep]
    best = float(vals.min())
    step0 = np.pi / coarse
    for f in flat:
        ct, cp = TT.flat[f], PP.flat[f]
        step = step0
        for _ in range(zoom_rounds):
            lt, lp_ = np.meshgrid(ct + np.linspace(-step, step, 21),
                                  cp + np.linspace(-step, step, 21), indexing="ij")
            lv = _objective(A, _sphere_points(lt, lp_))
            i = int(np.argmin(lv))
            best = min(best, float(lv.flat[i]))
            ct, cp = lt.flat[i], lp_.flat[i]
            step /= 4
    return best


def _spike_free_block(dr: EnsembleDraw, J) -> np.ndarray:
    J = np.asarray(J, dtype=int)
    if np.any(dr.eta[:, J]):
        bad = J[np.any(dr.eta[:, J], axis=0)].tolist()
        raise ValueError(f"columns {bad} of J carry spikes")
    return dr.gamma[:, J]


def check_ball_inclusion(dr: EnsembleDraw, J, c: float, **kw) -> bool:
    """Is c.B_2^m contained in Gamma.B_1^J?"""
    return inradius(_spike_free_block(dr, J), **kw).radius >= c


def ball_inclusion_comparison(dr: EnsembleDraw, J, **kw) -> tuple[float, float, bool]:
    """Compare sqrt(m)/R against radius(Gamma^J)/sqrt(m).

    When the first is at most the second, the witness image lies inside
    the normalized image of the l1 ball on J.
    """
    radius = inradius(_spike_free_block(dr, J), **kw).radius
    lhs = math.sqrt(dr.m) / dr.params.R
    rhs = radius / math.sqrt(dr.m)
    return lhs, rhs, lhs <= rhs


def restricted_min_singular(matrix, s: int, budget: int = SUPPORT_BUDGET):
    """Smallest singular value over all m x s column submatrices.

    Returns (alpha, worst_support).
    """
    A = np.asarray(matrix, dtype=float)
    m, d = A.shape
    if not 1 <= s <= d:
        raise InvalidParameterError(f"need 1 <= s <= d, got s={s}")
    if math.comb(d, s) > budget:
        raise BudgetExceeded(f"C({d},{s}) supports exceed the budget of {budget}")
    if s > m:
        return 0.0, tuple(range(s))
    best, worst = math.inf, None
    combos = itertools.combinations(range(d), s)
    while True:
        chunk = list(itertools.islice(combos, 4096))
        if not chunk:
            break
        idx = np.array(chunk)
        sub = A[:, idx].transpose(1, 0, 2)  # (batch, m, s)
        sv = np.linalg.svd(sub, compute_uv=False)[:, -1]
        i = int(np.argmin(sv))
        if sv[i] < best:
            best, worst = float(sv[i]), tuple(int(x) for x in idx[i])
    return best, worst


def lemma16_order(alpha: float, beta: float, s: int) -> int:
    """floor(alpha^2 (s-1) / (4 beta^2)) - 1; values <= 0 guarantee nothing."""
    if beta <= 0:
        raise InvalidParameterError("beta must be positive")
    if alpha < 0 or s < 1:
        raise InvalidParameterError("need alpha >= 0 and s >= 1")
    return math.floor(alpha ** 2 * (s - 1) / (4 * beta ** 2)) - 1


def rescaling_identity_check(dr: EnsembleDraw, normalized: NormalizedMatrix, t) -> float:
    """max-norm of Gamma~ t - Gamma t~ with t~_j = t_j / |Gamma e_j|_2."""
    t = np.asarray(t, dtype=float)
    t_tilde = t / normalized.col_norms
    return float(np.max(np.abs(normalized.gamma_tilde @ t - dr.gamma @ t_tilde), initial=0.0))
