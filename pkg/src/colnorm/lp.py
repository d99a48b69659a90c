"""Dense two-phase simplex solver with Bland anti-cycling.

The solver works on the full tableau, which is fine for the small,
well-scaled instances used by the recovery and geometry code.  The same
code path runs in floating point or, with ``exact=True``, on
:class:`fractions.Fraction` entries with zero tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "LPInstance",
    "LPResult",
    "Tolerances",
    "SolverFailure",
    "solve",
    "EXACT_MAX_VARS",
]

EXACT_MAX_VARS = 64
BLAND_AFTER = 8


class SolverFailure(RuntimeError):
    """Raised when the simplex method exceeds its iteration budget."""


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-9
    opt: float = 1e-9
    # iterations allowed per (n + k)
    iter_factor: int = 50


@dataclass
class LPInstance:
    """``min objective @ x`` s.t. ``eq_lhs @ x == eq_rhs``, ``lower <= x <= upper``.

    ``lower`` defaults to 0 and ``upper`` to +inf; infinite bounds on
    either side are allowed.
    """

    objective: np.ndarray
    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        self.eq_lhs = np.asarray(self.eq_lhs, dtype=float).reshape(-1, n)
        rhs = np.asarray(self.eq_rhs, dtype=object).ravel()
        if any(isinstance(v, Fraction) for v in rhs):
            # exact right-hand sides are honoured by exact solves
            self.eq_rhs = rhs
        else:
            self.eq_rhs = rhs.astype(float)
        if self.eq_rhs.size != self.eq_lhs.shape[0]:
            raise ValueError("eq_rhs length does not match eq_lhs rows")
        self.lower = (np.zeros(n) if self.lower is None
                      else np.asarray(self.lower, dtype=float).ravel())
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float).ravel())
        for arr in (self.objective, self.eq_lhs, self.eq_rhs.astype(float)):
            if np.isnan(arr).any() or np.isinf(arr).any():
                raise ValueError("LP data must be finite")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ValueError("bounds must not be NaN")
        if (self.lower > self.upper).any():
            raise ValueError("lower bound exceeds upper bound")
        if (self.lower == np.inf).any() or (self.upper == -np.inf).any():
            raise ValueError("bounds must leave each variable a nonempty range")

    @property
    def n(self) -> int:
        return self.objective.size

    @property
    def k(self) -> int:
        return self.eq_lhs.shape[0]


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | Fraction | None = None
    point: np.ndarray | None = None
    dual_degenerate: bool = False
    # direction of unbounded descent, in the original variables
    ray: np.ndarray | None = None
    iterations: int = 0
    exact: bool = False
    basis: tuple = field(default_factory=tuple)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class _StdForm:
    # min c @ y, A y = b, y >= 0; original x = offset + M @ y
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    offset: np.ndarray
    M: np.ndarray
    # mirror[j] = partner column of a split free variable, else -1
    mirror: np.ndarray


def _standard_form(inst: LPInstance, exact: bool) -> _StdForm:
    n, k = inst.n, inst.k
    lo, hi = inst.lower, inst.upper
    lo_fin, hi_fin = np.isfinite(lo), np.isfinite(hi)
    free = ~lo_fin & ~hi_fin
    upper_only = ~lo_fin & hi_fin
    boxed = np.flatnonzero(lo_fin & hi_fin)

    width = 1 + free.astype(int)
    starts = np.concatenate(([0], np.cumsum(width)[:-1])).astype(int)
    n_main = int(width.sum())
    orig = np.repeat(np.arange(n), width)
    sign = np.ones(n_main)
    sign[starts[upper_only]] = -1.0
    sign[starts[free] + 1] = -1.0
    mirror = np.full(n_main + boxed.size, -1, dtype=int)
    mirror[starts[free]] = starts[free] + 1
    mirror[starts[free] + 1] = starts[free]

    n_box = boxed.size
    n_std, k_std = n_main + n_box, k + n_box
    A = np.zeros((k_std, n_std))
    A[:k, :n_main] = inst.eq_lhs[:, orig] * sign
    rows = k + np.arange(n_box)
    A[rows, starts[boxed]] = 1.0
    A[rows, n_main + np.arange(n_box)] = 1.0
    c = np.zeros(n_std)
    c[:n_main] = inst.objective[orig] * sign
    M = np.zeros((n, n_std))
    M[orig, np.arange(n_main)] = sign

    off = np.where(lo_fin, lo, np.where(hi_fin, hi, 0.0))
    if exact:
        offset = _to_fraction(off)
        b = np.empty(k_std, dtype=object)
        b[:k] = _to_fraction(inst.eq_rhs) - _to_fraction(inst.eq_lhs).dot(offset)
        for r, i in enumerate(boxed):
            b[k + r] = Fraction(hi[i]) - Fraction(lo[i])
        return _StdForm(c=_to_fraction(c), A=_to_fraction(A), b=b,
                        offset=offset, M=M.astype(int).astype(object),
                        mirror=mirror)
    b = np.empty(k_std)
    b[:k] = inst.eq_rhs.astype(float) - inst.eq_lhs @ off
    b[k:] = hi[boxed] - lo[boxed]
    return _StdForm(c=c, A=A, b=b, offset=off, M=M, mirror=mirror)


def _to_fraction(arr: np.ndarray) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    flat_in = np.asarray(arr).ravel()
    flat_out = out.ravel()
    for idx, v in enumerate(flat_in):
        flat_out[idx] = Fraction(v)
    return out


class _Tableau:
    """Row-reduced tableau: k constraint rows plus one reduced-cost row."""

    def __init__(self, T: np.ndarray, basis: list[int], tol: float):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    @property
    def k(self) -> int:
        return self.T.shape[0] - 1

    def pivot(self, r: int, c: int) -> None:
        T = self.T
        T[r] = T[r] / T[r, c]
        f = T[:, c].copy()
        f[r] = 0
        T -= f[:, None] * T[r][None, :]
        if self.tol > 0:
            T[:, c] = 0.0
            T[r, c] = 1.0
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: int, max_iter: int,
            stop_at_zero: bool = False) -> tuple[str, int]:
        """Minimize over columns ``< allowed``; returns (status, entering col).

        Pricing is Dantzig's rule; after ``BLAND_AFTER`` consecutive
        degenerate pivots it switches to the smallest-index rule until the
        objective moves again, which rules out cycling.
        """
        T, tol, k = self.T, self.tol, self.k
        stall = 0
        while True:
            if self.iterations > max_iter:
                raise SolverFailure(
                    f"simplex did not terminate within {max_iter} iterations")
            if stop_at_zero and T[k, -1] >= -tol:
                return "optimal", -1
            rc = T[k, :allowed]
            neg = np.flatnonzero(rc < -tol)
            if neg.size == 0:
                return "optimal", -1
            if stall >= BLAND_AFTER:
                c = int(neg[0])
            else:
                c = int(neg[np.argmin(rc[neg])])
            col = T[:k, c]
            pos = np.flatnonzero(col > tol)
            if pos.size == 0:
                return "unbounded", c
            rhs = T[pos, -1]
            ratios = rhs / col[pos]
            best = ratios.min()
            if tol > 0:
                ties = pos[ratios <= best + tol * max(1.0, abs(float(best)))]
            else:
                ties = pos[ratios == best]
            r = int(min(ties, key=lambda i: self.basis[i]))
            stall = stall + 1 if best <= tol else 0
            self.pivot(r, c)


def solve(inst: LPInstance, tol: Tolerances | None = None,
          exact: bool = False) -> LPResult:
    """Solve ``inst`` to a vertex optimum.

    Leaving variable is the smallest basic index among minimum-ratio
    ties; entering variable follows Dantzig pricing with a fallback to the
    smallest-index rule on degenerate stalls, so runs are deterministic
    and cannot cycle.  ``dual_degenerate`` is
    set when some nonbasic variable has zero reduced cost at the optimum,
    i.e. the optimum may be non-unique.
    """
    tol = tol or Tolerances()
    if exact and inst.n > EXACT_MAX_VARS:
        raise ValueError(
            f"exact mode supports at most {EXACT_MAX_VARS} variables, got {inst.n}")
    eps = 0 if exact else tol.feas
    eps_opt = 0 if exact else tol.opt
    std = _standard_form(inst, exact)
    A, b, c = std.A, std.b, std.c
    k, n = A.shape
    max_iter = tol.iter_factor * (inst.n + inst.k + 1)

    # flip rows so that b >= 0
    neg = (b < 0).astype(bool)
    if neg.any():
        A = A.copy()
        b = b.copy()
        A[neg] = -A[neg]
        b[neg] = -b[neg]

    # reuse unit columns as a starting basis where possible
    basis = [-1] * k
    if k:
        nz = (A != 0)
        single = np.flatnonzero(nz.sum(axis=0) == 1)
        for j in single:
            r = int(nz[:, j].argmax())
            if basis[r] == -1 and A[r, j] == 1:
                basis[r] = int(j)
    art_rows = [r for r in range(k) if basis[r] == -1]
    n_art = len(art_rows)

    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    dtype = object if exact else float
    T = np.full((k + 1, n + n_art + 1), zero, dtype=dtype)
    T[:k, :n] = A
    T[:k, -1] = b
    for a, r in enumerate(art_rows):
        T[r, n + a] = one
        basis[r] = n + a

    tab = _Tableau(T, basis, eps)
    if n_art:
        # phase 1: minimize the sum of artificials
        for r in art_rows:
            T[k] -= T[r]
        T[k, n:n + n_art] = zero
        status, _ = tab.run(n + n_art, max_iter, stop_at_zero=True)
        infeas = -T[k, -1]
        if infeas > (eps * max(1.0, float(np.abs(np.asarray(b, dtype=float)).max(initial=0.0)))
                     if not exact else 0):
            return LPResult(status="infeasible", iterations=tab.iterations,
                            exact=exact)
        # drive remaining artificials out, dropping redundant rows
        r = 0
        while r < tab.k:
            if tab.basis[r] >= n:
                row = T[r, :n]
                cand = np.flatnonzero(np.abs(np.asarray(row, dtype=float)) > eps
                                      if not exact else row != 0)
                if cand.size:
                    tab.pivot(r, int(cand[0]))
                else:
                    T = np.delete(T, r, axis=0)
                    tab.T = T
                    del tab.basis[r]
                    continue
            r += 1
        T = tab.T[:, list(range(n)) + [-1]]
        tab.T = T
    k = tab.k

    # phase 2 reduced costs
    T[k, :] = zero
    T[k, :n] = c
    for r, j in enumerate(tab.basis):
        if c[j] != 0:
            T[k] -= c[j] * T[r]
    status, enter = tab.run(n, max_iter)

    if status == "unbounded":
        y = np.full(n, zero, dtype=dtype)
        y[enter] = one
        for r, j in enumerate(tab.basis):
            y[j] = -T[r, enter]
        ray = std.M.dot(y)
        return LPResult(status="unbounded", ray=np.asarray(ray),
                        iterations=tab.iterations, exact=exact,
                        basis=tuple(tab.basis))

    y = np.full(n, zero, dtype=dtype)
    for r, j in enumerate(tab.basis):
        y[j] = T[r, -1]
    if exact:
        point = std.offset + std.M.dot(y)
        value = sum((Fraction(ci) * xi for ci, xi in
                     zip(inst.objective, point)), Fraction(0))
    else:
        point = std.offset + std.M @ y
        value = float(inst.objective @ point)

    nonbasic = np.ones(n, dtype=bool)
    nonbasic[tab.basis] = False
    rc = T[k, :n]
    flat = (rc == 0) if exact else (np.abs(rc) <= eps_opt)
    # the mirror of a basic split column always prices at zero
    partner = std.mirror[:n]
    shadow = (partner >= 0) & ~nonbasic[np.maximum(partner, 0)]
    degenerate = bool(np.any(flat & nonbasic & ~shadow))
    return LPResult(status="optimal", value=value, point=point,
                    dual_degenerate=degenerate, iterations=tab.iterations,
                    exact=exact, basis=tuple(tab.basis))
