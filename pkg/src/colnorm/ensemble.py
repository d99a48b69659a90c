"""Spike measurement matrices, column normalization and structural events."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .spike import InvalidParameterError, SpikeParams

__all__ = [
    "EnsembleDraw",
    "NormalizedMatrix",
    "EventFindings",
    "draw",
    "gaussian_matrix",
    "rademacher_matrix",
    "normalize_columns",
    "detect_events",
    "event_expectations",
    "event_probabilities",
    "conditions_hold",
    "write_draw",
    "read_draw",
]


@dataclass
class EnsembleDraw:
    m: int
    d: int
    gamma: np.ndarray
    eps: np.ndarray
    eta: np.ndarray
    params: SpikeParams
    seed: int


@dataclass
class NormalizedMatrix:
    gamma_tilde: np.ndarray
    col_norms: np.ndarray


@dataclass
class EventFindings:
    # (j1, j2, row) with j1 < j2, 0-based
    spike_pair: tuple[int, int, int] | None
    zero_cols: np.ndarray | None
    found_1: bool
    found_2: bool

    @property
    def both(self) -> bool:
        return self.found_1 and self.found_2


def draw(m: int, d: int, params: SpikeParams, seed: int) -> EnsembleDraw:
    """Sample the m x d matrix with entries eps_ij * max(1, eta_ij * R).

    Entries are generated row by row, column ascending, each consuming a
    sign uniform then a spike uniform from a PCG64 stream seeded by
    ``seed``; this matches repeated calls of ``spike.sample_x``.
    """
    if not 1 <= m <= d:
        raise InvalidParameterError(f"need 1 <= m <= d, got m={m}, d={d}")
    rng = np.random.default_rng(seed)
    u = rng.random((m, d, 2))
    eps = np.where(u[..., 0] < 0.5, -1, 1).astype(np.int8)
    eta = (u[..., 1] < params.delta).astype(np.int8)
    gamma = eps * np.where(eta == 1, params.R, 1.0)
    return EnsembleDraw(m=m, d=d, gamma=gamma, eps=eps, eta=eta,
                        params=params, seed=seed)


def rademacher_matrix(m: int, d: int, seed: int) -> np.ndarray:
    return draw(m, d, SpikeParams(0.0, 1.0), seed).gamma


def gaussian_matrix(m: int, d: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((m, d))


def _column_norms(gamma: np.ndarray) -> np.ndarray:
    # sort before summing so equal multisets of entries give equal norms
    sq = np.sort(gamma * gamma, axis=0)
    return np.sqrt(sq.sum(axis=0))


def normalize_columns(source) -> NormalizedMatrix:
    """Divide each column by its Euclidean norm.

    Accepts an EnsembleDraw or a plain matrix.
    """
    gamma = source.gamma if isinstance(source, EnsembleDraw) else np.asarray(source, float)
    norms = _column_norms(gamma)
    if np.any(norms == 0):
        raise ValueError(f"zero column(s) at {np.flatnonzero(norms == 0).tolist()}")
    return NormalizedMatrix(gamma_tilde=gamma / norms, col_norms=norms)


def detect_events(dr: EnsembleDraw) -> EventFindings:
    """Find a same-row pair of single-spike columns and 2m spike-free columns.

    The pair is the lexicographically first (j1, j2); J is the first 2m
    spike-free columns in column order.
    """
    eta = dr.eta
    counts = eta.sum(axis=0)
    singles = np.flatnonzero(counts == 1)
    rows = eta[:, singles].argmax(axis=0) if singles.size else np.array([], int)
    first_in_row: dict[int, int] = {}
    pair = None
    for j, r in zip(singles.tolist(), rows.tolist()):
        if r in first_in_row:
            cand = (first_in_row[r], j, r)
            if pair is None or cand[0] < pair[0]:
                pair = cand
        else:
            first_in_row[r] = j
    zero = np.flatnonzero(counts == 0)
    if pair is not None:
        zero = zero[(zero != pair[0]) & (zero != pair[1])]
    found_2 = zero.size >= 2 * dr.m
    return EventFindings(spike_pair=pair,
                         zero_cols=zero[:2 * dr.m] if found_2 else None,
                         found_1=pair is not None, found_2=bool(found_2))


def event_expectations(m: int, delta: float) -> tuple[float, float]:
    """(E Y, E Z): chance that a column has exactly one spike / no spike."""
    if m < 1 or not 0 <= delta <= 1:
        raise InvalidParameterError("need m >= 1 and 0 <= delta <= 1")
    return m * delta * (1 - delta) ** (m - 1), (1 - delta) ** m


def conditions_hold(m: int, d: int, delta: float) -> tuple[bool, bool]:
    if not 1 <= m <= d:
        raise InvalidParameterError(f"need 1 <= m <= d, got m={m}, d={d}")
    ey, ez = event_expectations(m, delta)
    return ey >= 2 * m / d, ez >= 4 * m / d


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def event_probabilities(m: int, d: int, delta: float) -> tuple[float, float, float]:
    """Exact P(event 1), P(event 2) and P(both) for detect_events.

    Columns are iid; each is single-spiked in a given row with probability
    ``p1 = delta (1-delta)^(m-1)``, spike-free with probability
    ``pz = (1-delta)^m``.  Event 1 fails iff no row holds two single-spike
    columns.
    """
    ey, pz = event_expectations(m, delta)
    p1 = ey / m
    po = max(0.0, 1.0 - ey - pz)
    need = 2 * m
    p2 = float(stats.binom.sf(need - 1, d, pz))
    # P(not E1) and P(not E1, E2): k single columns in k distinct rows
    not1 = 0.0
    not1_and2 = 0.0
    for k in range(0, min(m, d) + 1):
        if p1 == 0.0 and k > 0:
            break
        log_w = _log_comb(d, k) + math.lgamma(m + 1) - math.lgamma(m - k + 1)
        if k:
            log_w += k * math.log(p1)
        rest = d - k
        w = math.exp(log_w)
        # remaining columns are spike-free or multi-spike
        not1 += w * (1.0 - ey) ** rest
        if pz + po > 0:
            share = pz / (pz + po)
            tail = float(stats.binom.sf(need - 1, rest, share))
            not1_and2 += w * (pz + po) ** rest * tail
    p_1 = 1.0 - not1
    p_both = p2 - not1_and2
    return min(max(p_1, 0.0), 1.0), p2, min(max(p_both, 0.0), 1.0)


def _fmt_row(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_draw(dr: EnsembleDraw, path) -> tuple[Path, Path]:
    """Write ``path`` (entries) and ``path.eta`` (indicators).

    Header line ``m d delta R seed``; floats use the shortest repr that
    round-trips.
    """
    path = Path(path)
    eta_path = path.with_name(path.name + ".eta")
    header = f"{dr.m} {dr.d} {dr.params.delta!r} {dr.params.R!r} {dr.seed}\n"
    with open(path, "w") as fh:
        fh.write(header)
        for row in dr.gamma:
            fh.write(_fmt_row(row) + "\n")
    with open(eta_path, "w") as fh:
        fh.write(header)
        for row in dr.eta:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
    return path, eta_path


def _read_block(path: Path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 5:
            raise ValueError(f"{path}: malformed header")
        m, d = int(head[0]), int(head[1])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != m or any(len(r) != d for r in rows):
        raise ValueError(f"{path}: expected {m} rows of {d} entries")
    return m, d, float(head[2]), float(head[3]), int(head[4]), rows


def read_draw(path) -> EnsembleDraw:
    path = Path(path)
    m, d, delta, R, seed, rows = _read_block(path)
    gamma = np.array([[float(v) for v in r] for r in rows])
    eta_path = path.with_name(path.name + ".eta")
    if eta_path.exists():
        _, _, _, _, _, erows = _read_block(eta_path)
        eta = np.array([[int(v) for v in r] for r in erows], dtype=np.int8)
    else:
        eta = (np.abs(gamma) != 1.0).astype(np.int8)
    eps = np.where(gamma < 0, -1, 1).astype(np.int8)
    return EnsembleDraw(m=m, d=d, gamma=gamma, eps=eps, eta=eta,
                        params=SpikeParams(delta, R), seed=seed)
