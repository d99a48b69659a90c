"""Basis pursuit, exact-reconstruction certification and the 2-sparse witness."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import lp
from .ensemble import EnsembleDraw, EventFindings, NormalizedMatrix, detect_events, normalize_columns
from .spike import InvalidParameterError

__all__ = [
    "BudgetExceeded",
    "RecoveryProblem",
    "BPSolution",
    "Violation",
    "ERPVerdict",
    "WitnessReport",
    "make_problem",
    "basis_pursuit",
    "nsp_value",
    "certify_erp",
    "erp_bruteforce_oracle",
    "construct_witness",
    "witness_consistency",
]

BOUNDARY_TOL = 1e-7
LP_BUDGET = 10 ** 6
TIEBREAK_SEED = 20240601


class BudgetExceeded(RuntimeError):
    """The requested enumeration exceeds the LP budget."""


@dataclass
class RecoveryProblem:
    matrix: np.ndarray
    target: np.ndarray
    measurements: np.ndarray


def make_problem(matrix, v) -> RecoveryProblem:
    matrix = np.asarray(matrix, dtype=float)
    v = np.asarray(v, dtype=float)
    return RecoveryProblem(matrix=matrix, target=v, measurements=matrix @ v)


@dataclass
class BPSolution:
    status: str
    t_star: np.ndarray | None = None
    value: float | Fraction | None = None
    maybe_nonunique: bool = False

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def _bp_instance(A: np.ndarray, y: np.ndarray) -> lp.LPInstance:
    d = A.shape[1]
    return lp.LPInstance(objective=np.ones(2 * d), eq_lhs=np.hstack([A, -A]), eq_rhs=y)


def _face_is_thick(A, y, value, exact, tol) -> bool:
    """Optimize a fixed random functional both ways over the optimal face."""
    d = A.shape[1]
    g = np.random.default_rng(TIEBREAK_SEED).standard_normal(d)
    lhs = np.vstack([np.hstack([A, -A]), np.ones((1, 2 * d))])
    rhs = np.empty(y.size + 1, dtype=object)
    rhs[:-1] = y
    rhs[-1] = value
    points = []
    for sign in (1.0, -1.0):
        c = sign * np.concatenate([g, -g])
        inst = lp.LPInstance(objective=c, eq_lhs=lhs, eq_rhs=rhs)
        res = lp.solve(inst, lp.Tolerances(feas=tol, opt=tol), exact=exact)
        if not res.optimal:
            return True
        u = res.point
        points.append(u[:d] - u[d:])
    diff = points[0] - points[1]
    if exact:
        return any(x != 0 for x in diff)
    return float(np.max(np.abs(diff))) > 1e-7


def basis_pursuit(matrix, y, tol: float = 1e-9, exact: bool = False) -> BPSolution:
    """Minimize ||t||_1 subject to matrix @ t = y.

    Solved as an LP over the split t = t_plus - t_minus.  When the simplex
    optimum is dual degenerate, a random linear functional is maximized
    and minimized over the optimal face; distinct optimizers confirm that
    the minimizer is not unique.
    """
    A = np.asarray(matrix, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if A.ndim != 2 or A.shape[0] != y.size:
        raise InvalidParameterError("matrix and y have inconsistent shapes")
    d = A.shape[1]
    res = lp.solve(_bp_instance(A, y), lp.Tolerances(feas=tol, opt=tol), exact=exact)
    if res.status == "infeasible":
        return BPSolution(status="infeasible")
    if not res.optimal:  # pragma: no cover - objective is bounded below by 0
        raise lp.SolverFailure(f"unexpected LP status {res.status}")
    u = res.point
    t = u[:d] - u[d:]
    nonunique = False
    if res.dual_degenerate:
        nonunique = _face_is_thick(A, y, res.value, exact, tol)
    if exact:
        t = np.array([float(x) for x in t])
    return BPSolution(status="optimal", t_star=np.asarray(t, dtype=float),
                      value=res.value, maybe_nonunique=nonunique)


@dataclass
class Violation:
    support: tuple[int, ...]
    sigma: tuple[int, ...]
    h: np.ndarray
    value: float


@dataclass
class ERPVerdict:
    order: int
    holds: bool
    violation: Violation | None = None
    lps_solved: int = 0
    max_value: float = 0.0
    screened: bool = False


def _nsp_instance(A: np.ndarray, S, sigma) -> lp.LPInstance:
    m, d = A.shape
    s = len(S)
    mask = np.ones(d, dtype=bool)
    mask[list(S)] = False
    comp = A[:, mask]
    r = d - s
    n = s + 2 * r + 1
    lhs = np.zeros((m + 1, n))
    lhs[:m, :s] = A[:, list(S)]
    lhs[:m, s:s + r] = comp
    lhs[:m, s + r:s + 2 * r] = -comp
    lhs[m, s:] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    c = np.zeros(n)
    c[:s] = -np.asarray(sigma, dtype=float)
    lower = np.zeros(n)
    lower[:s] = -np.inf
    return lp.LPInstance(objective=c, eq_lhs=lhs, eq_rhs=rhs, lower=lower)


def _assemble_h(x, S, d):
    s = len(S)
    r = d - s
    x = np.asarray([float(v) for v in x])
    mask = np.ones(d, dtype=bool)
    mask[list(S)] = False
    h = np.zeros(d)
    h[list(S)] = x[:s]
    h[mask] = x[s:s + r] - x[s + r:s + 2 * r]
    return h


def nsp_value(matrix, S, sigma, exact: bool = False):
    """max sigma . h_S over kernel vectors h with ||h off S||_1 <= 1.

    Returns (value, h); value is +inf (with h a normalized ray) when the
    columns in S are linearly dependent in a direction favoured by sigma.
    """
    A = np.asarray(matrix, dtype=float)
    d = A.shape[1]
    res = lp.solve(_nsp_instance(A, S, sigma), exact=exact)
    if res.status == "unbounded":
        h = _assemble_h(res.ray, S, d)
        gain = float(np.dot(np.asarray(sigma, float), h[list(S)]))
        return math.inf, h / gain
    if not res.optimal:  # pragma: no cover - h = 0 is always feasible
        raise lp.SolverFailure(f"NSP program reported {res.status}")
    value = -res.value
    return value, _assemble_h(res.point, S, d)


def _kernel_coordinate_mass(A: np.ndarray) -> np.ndarray:
    """alpha_j = max{h_j : A h = 0, ||h||_1 <= 1} for each coordinate."""
    m, d = A.shape
    lhs = np.zeros((m + 1, 2 * d + 1))
    lhs[:m, :d] = A
    lhs[:m, d:2 * d] = -A
    lhs[m, :] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    out = np.empty(d)
    for j in range(d):
        c = np.zeros(2 * d + 1)
        c[j], c[d + j] = -1.0, 1.0
        res = lp.solve(lp.LPInstance(c, lhs, rhs))
        out[j] = -res.value
    return out


def certify_erp(matrix, s: int, mode: str = "float", budget: int = LP_BUDGET,
                screen: bool = True) -> ERPVerdict:
    """Decide the exact reconstruction property of order s.

    ERP(s) holds iff for every support S of size s and sign pattern sigma,
    every nonzero kernel vector satisfies sigma . h_S < ||h off S||_1,
    i.e. iff every ``nsp_value`` is < 1.  Patterns sigma and -sigma give
    the same optimum, so only patterns with sigma[0] = +1 are solved.

    In float mode, optima within 1e-7 of 1 are re-solved in exact
    arithmetic when the program is small enough; ``mode="exact"`` solves
    every program exactly.  With ``screen`` (float mode), a sufficient
    test first bounds each coordinate's share of the l1 mass of kernel
    vectors; if the s largest shares sum below 1/2 the property holds and
    the enumeration is skipped.
    """
    if mode not in ("float", "exact"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    A = np.asarray(matrix, dtype=float)
    m, d = A.shape
    if not 1 <= s <= d:
        raise InvalidParameterError(f"need 1 <= s <= d, got s={s}, d={d}")
    n_lps = math.comb(d, s) * 2 ** s
    if n_lps > budget:
        raise BudgetExceeded(
            f"C({d},{s}) * 2^{s} = {n_lps} programs exceeds the budget of {budget}")
    exact_all = mode == "exact"
    n_vars = s + 2 * (d - s) + 1
    exact_ok = n_vars <= lp.EXACT_MAX_VARS

    if screen and not exact_all and s < d:
        alpha = _kernel_coordinate_mass(A)
        top = np.sort(alpha)[::-1][:s].sum()
        if top < 0.5 - BOUNDARY_TOL:
            return ERPVerdict(order=s, holds=True, lps_solved=d,
                              max_value=float(top / (1 - top)), screened=True)

    solved = 0
    worst = -math.inf
    for S in itertools.combinations(range(d), s):
        for tail in itertools.product((-1, 1), repeat=s - 1):
            sigma = (1,) + tail
            value, h = nsp_value(A, S, sigma, exact=exact_all)
            solved += 1
            if not exact_all and value != math.inf and value >= 1 - BOUNDARY_TOL:
                if exact_ok:
                    value, h = nsp_value(A, S, sigma, exact=True)
                    solved += 1
                    violated = value >= 1
                else:
                    violated = value >= 1 - 1e-9
            else:
                violated = value >= 1
            worst = max(worst, float(value))
            if violated:
                return ERPVerdict(order=s, holds=False,
                                  violation=Violation(S, sigma, h, float(value)),
                                  lps_solved=solved, max_value=float(value))
    return ERPVerdict(order=s, holds=True, lps_solved=solved, max_value=worst)


def erp_bruteforce_oracle(matrix, s: int, trials: int = 3, seed: int = 0) -> bool:
    """Check ERP(s) by running basis pursuit on sampled s-sparse vectors.

    Every support and sign pattern is tried with ``trials`` random
    magnitude vectors; recovery must be exact to 1e-7 and unique.
    """
    A = np.asarray(matrix, dtype=float)
    d = A.shape[1]
    if d > 12:
        raise InvalidParameterError("oracle is meant for d <= 12")
    rng = np.random.default_rng(seed)
    for S in itertools.combinations(range(d), s):
        for sigma in itertools.product((-1, 1), repeat=s):
            for _ in range(trials):
                v = np.zeros(d)
                v[list(S)] = np.asarray(sigma) * (0.5 + rng.random(s))
                sol = basis_pursuit(A, A @ v)
                if not sol.feasible or sol.maybe_nonunique:
                    return False
                if np.max(np.abs(sol.t_star - v)) > 1e-7:
                    return False
    return True


@dataclass
class WitnessReport:
    events: EventFindings
    verdict: str  # erp2_broken | witness_unavailable | feasibility_failed
    v: np.ndarray | None = None
    z: np.ndarray | None = None
    z_norm1: float = math.nan
    w_norm2: float = math.nan
    bound: float = math.nan  # sqrt(m) / R
    exact_resolved: bool = False

    @property
    def margin(self) -> float:
        return 1.0 - self.z_norm1


class WitnessStructureError(AssertionError):
    """A structural identity of the witness construction failed."""


def construct_witness(dr: EnsembleDraw, normalized: NormalizedMatrix | None = None,
                      exact_boundary: bool = True) -> WitnessReport:
    """Build the 2-sparse witness v and look for a cheaper representation on J.

    With (j1, j2, l) the same-row single-spike pair, v = (e_j1 + e_j2)/2 if
    the spike signs differ and (e_j1 - e_j2)/2 otherwise, so the spikes
    cancel in row l.  ERP(2) is broken when some z supported on the
    spike-free columns J has the same measurements and ||z||_1 <= 1.
    """
    if normalized is None:
        normalized = normalize_columns(dr)
    ev = detect_events(dr)
    if not ev.both:
        return WitnessReport(events=ev, verdict="witness_unavailable")
    j1, j2, ell = ev.spike_pair
    G = normalized.gamma_tilde
    m, d = G.shape
    R = dr.params.R
    v = np.zeros(d)
    v[j1] = 0.5
    v[j2] = 0.5 if dr.eps[ell, j1] != dr.eps[ell, j2] else -0.5
    w = G @ v
    cap = (R * R + m - 1) ** -0.5
    bound = math.sqrt(m) / R
    if abs(w[ell]) > 1e-12:
        raise WitnessStructureError(f"spike row does not cancel: w_l = {w[ell]}")
    others = np.delete(np.abs(w), ell)
    if others.size and others.max() > cap * (1 + 1e-12):
        raise WitnessStructureError("off-spike coordinates exceed (R^2+m-1)^(-1/2)")
    w_norm = float(np.linalg.norm(w))
    if w_norm > bound + 1e-9:
        raise WitnessStructureError(f"||w||_2 = {w_norm} exceeds sqrt(m)/R = {bound}")

    J = ev.zero_cols
    sub = G[:, J]
    sol = basis_pursuit(sub, w)
    if not sol.feasible:
        return WitnessReport(events=ev, verdict="feasibility_failed", v=v,
                             w_norm2=w_norm, bound=bound)
    value = float(sol.value)
    zJ = sol.t_star
    exact_resolved = False
    if exact_boundary and abs(value - 1.0) <= BOUNDARY_TOL and 4 * J.size <= 2 * lp.EXACT_MAX_VARS:
        ex = basis_pursuit(sub, w, exact=True)
        broken = ex.value <= 1
        value, zJ, exact_resolved = float(ex.value), ex.t_star, True
    else:
        broken = value <= 1.0 + 1e-9
    z = np.zeros(d)
    z[J] = zJ
    return WitnessReport(events=ev, verdict="erp2_broken" if broken else "feasibility_failed",
                         v=v, z=z, z_norm1=value, w_norm2=w_norm, bound=bound,
                         exact_resolved=exact_resolved)


def witness_consistency(matrix_tilde, report: WitnessReport) -> bool:
    """Independent basis-pursuit confirmation that v is not the unique minimizer."""
    if report.verdict != "erp2_broken":
        raise ValueError("consistency check needs an erp2_broken report")
    G = np.asarray(matrix_tilde, dtype=float)
    sol = basis_pursuit(G, G @ report.v)
    if not sol.feasible or float(sol.value) > 1 + 1e-8:
        return False
    return bool(sol.maybe_nonunique or np.max(np.abs(sol.t_star - report.v)) > 1e-7)
