"""Experiment orchestration: counterexample trials, sweeps, moments, controls."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import ensemble, recovery, spike
from .reports import Table
from .spike import SpikeParams

log = logging.getLogger(__name__)

__all__ = [
    "ConfigRefused",
    "ConsistencyError",
    "ExperimentConfig",
    "Derived",
    "derive",
    "TrialReport",
    "SweepRow",
    "SweepTable",
    "MomentRow",
    "PositiveControlResult",
    "run_counterexample_trial",
    "run_sweep",
    "run_moment_experiment",
    "run_positive_control",
    "trials_table",
]

TRIAL_BUDGET = 10 ** 4
CROSS_CHECK_MAX_D = 30
MC_SAMPLES = 10 ** 6
EXACT_SUPPORT_MAX = 12


class ConfigRefused(ValueError):
    """The configuration violates a precondition; nothing was sampled."""


class ConsistencyError(RuntimeError):
    """Two independent routes disagreed about a verdict."""


@dataclass
class ExperimentConfig:
    d: int = 200
    p: float = 4.0
    m: int | None = None
    m_list: list[int] | None = None
    trials: int = 200
    seed_base: int = 0
    delta_override: float | None = None
    R_override: float | None = None
    exact: bool = False
    out: str | None = None
    format: str = "csv"
    # positive control
    s: int = 2
    ensemble: str = "gaussian"
    # moment experiment
    q_list: list[float] = field(default_factory=lambda: [2.0, 4.0])
    n_vectors: int = 200
    support: int = 10
    moment_bound: float = 1.5
    moment_method: str = "auto"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigRefused(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigRefused(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigRefused(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def as_meta(self) -> dict:
        meta = dataclasses.asdict(self)
        meta.pop("out", None)
        meta.pop("format", None)
        return meta


@dataclass(frozen=True)
class Derived:
    delta: float
    R: float
    m: int
    params: SpikeParams


def default_m(d: int, p: float) -> int:
    return max(1, math.floor(0.7 * math.sqrt(p) * d ** (1.0 / p)))


def derive(cfg: ExperimentConfig, m: int | None = None) -> Derived:
    """Resolve (delta, R, m) and refuse configurations outside the regime.

    Defaults: delta = 4/d, R = sqrt(p) d^(1/p), m = floor(0.7 sqrt(p) d^(1/p)).
    phi(x) = sqrt(x) (d/c)^(1/x), with c = delta d, must be nonincreasing on
    [2, p], i.e. p <= 2 log(d / c).
    """
    d, p = cfg.d, cfg.p
    if d < 2:
        raise ConfigRefused(f"d must be at least 2, got {d}")
    if p < 2:
        raise ConfigRefused(f"p must be at least 2, got {p}")
    delta = 4.0 / d if cfg.delta_override is None else float(cfg.delta_override)
    R = math.sqrt(p) * d ** (1.0 / p) if cfg.R_override is None else float(cfg.R_override)
    if not 0.0 <= delta <= 0.5:
        raise ConfigRefused(f"delta = {delta} outside [0, 1/2]")
    if R < 1.0:
        raise ConfigRefused(f"R = {R} must be at least 1")
    if delta > 0:
        c = max(1.0, delta * d)
        if d / c <= 1:
            raise ConfigRefused(f"delta * d = {delta * d} leaves d/c <= 1")
        if not spike.phi_decreasing_check(d, c, p):
            raise ConfigRefused(
                f"p = {p} exceeds 2 log(d/c) = {2 * math.log(d / c):.6g} "
                f"(c = delta d = {c:.6g}); phi is not monotone on [2, p]")
    if m is None:
        m = cfg.m if cfg.m is not None else default_m(d, p)
    if not 1 <= m <= d:
        raise ConfigRefused(f"need 1 <= m <= d, got m={m}, d={d}")
    return Derived(delta=delta, R=R, m=m, params=SpikeParams(delta, R))


@dataclass
class TrialReport:
    seed: int
    m: int
    d: int
    p: float
    delta: float
    R: float
    found_1: bool
    found_2: bool
    verdict: str
    z_norm1: float
    margin: float
    w_norm2: float
    bound: float
    exact_resolved: bool
    bp_confirms: bool | None = None
    erp2_violated: bool | None = None
    elapsed: float = 0.0

    # elapsed is wall-clock and stays out of emitted reports
    REPORT_FIELDS = ("seed", "m", "d", "p", "delta", "R", "found_1", "found_2",
                     "verdict", "z_norm1", "margin", "w_norm2", "bound",
                     "exact_resolved", "bp_confirms", "erp2_violated")


def run_counterexample_trial(cfg: ExperimentConfig, trial_index: int,
                             m: int | None = None) -> TrialReport:
    """One seeded draw: events, witness, and (for d <= 30) an ERP(2) cross-check."""
    der = derive(cfg, m)
    seed = cfg.seed_base + trial_index
    t0 = time.perf_counter()
    dr = ensemble.draw(der.m, cfg.d, der.params, seed)
    norm = ensemble.normalize_columns(dr)
    rep = recovery.construct_witness(dr, norm)
    bp_ok = None
    if rep.verdict == "erp2_broken":
        bp_ok = recovery.witness_consistency(norm.gamma_tilde, rep)
        if not bp_ok:
            raise ConsistencyError(f"seed {seed}: basis pursuit does not confirm the witness")
    violated = None
    if cfg.d <= CROSS_CHECK_MAX_D:
        verdict = recovery.certify_erp(norm.gamma_tilde, 2,
                                       mode="exact" if cfg.exact else "float")
        violated = not verdict.holds
        if rep.verdict == "erp2_broken" and not violated:
            raise ConsistencyError(
                f"seed {seed}: witness breaks ERP(2) but certify_erp says it holds")
    return TrialReport(
        seed=seed, m=der.m, d=cfg.d, p=float(cfg.p), delta=der.delta, R=der.R,
        found_1=rep.events.found_1, found_2=rep.events.found_2,
        verdict=rep.verdict, z_norm1=float(rep.z_norm1), margin=float(rep.margin),
        w_norm2=float(rep.w_norm2), bound=float(rep.bound),
        exact_resolved=rep.exact_resolved, bp_confirms=bp_ok,
        erp2_violated=violated, elapsed=time.perf_counter() - t0)


def trials_table(reports: list[TrialReport], cfg: ExperimentConfig) -> Table:
    cols = list(TrialReport.REPORT_FIELDS)
    rows = [[getattr(r, c) for c in cols]
            for r in sorted(reports, key=lambda r: r.seed)]
    return Table(columns=cols, rows=rows,
                 meta={"kind": "trials", "config": cfg.as_meta(),
                       "seeds": [r.seed for r in sorted(reports, key=lambda r: r.seed)]})


@dataclass
class SweepRow:
    m: int
    d: int
    p: float
    delta: float
    R: float
    trials: int
    event1_rate: float
    event2_rate: float
    both_rate: float
    witness_rate: float
    witness_rate_given_events: float
    mean_margin: float
    exp_Y: float
    exp_Z: float
    p_event1: float
    p_event2: float
    p_both: float


@dataclass
class SweepTable:
    rows: list[SweepRow]
    config: ExperimentConfig
    reports: dict[int, list[TrialReport]] = field(default_factory=dict)

    def to_table(self) -> Table:
        cols = [f.name for f in dataclasses.fields(SweepRow)]
        rows = [[getattr(r, c) for c in cols] for r in self.rows]
        ms = [r.m for r in self.rows]
        return Table(columns=cols, rows=rows,
                     meta={"kind": "sweep", "config": self.config.as_meta(),
                           "seeds": [self.config.seed_base,
                                     self.config.seed_base + self.config.trials - 1],
                           "m_values": ms})


def run_sweep(cfg: ExperimentConfig) -> SweepTable:
    """Aggregate counterexample trials for each m, next to the closed forms."""
    ms = list(cfg.m_list) if cfg.m_list else [derive(cfg).m]
    total = len(ms) * cfg.trials
    if total > TRIAL_BUDGET:
        raise ConfigRefused(f"{total} trials exceed the budget of {TRIAL_BUDGET}")
    for m in ms:
        derive(cfg, m)
    rows, kept = [], {}
    for m in ms:
        der = derive(cfg, m)
        reps = [run_counterexample_trial(cfg, i, m) for i in range(cfg.trials)]
        kept[m] = reps
        n = len(reps)
        both = [r for r in reps if r.found_1 and r.found_2]
        broken = [r for r in reps if r.verdict == "erp2_broken"]
        margins = [r.margin for r in reps if not math.isnan(r.margin)]
        ey, ez = ensemble.event_expectations(m, der.delta)
        p1, p2, pb = ensemble.event_probabilities(m, cfg.d, der.delta)
        rows.append(SweepRow(
            m=m, d=cfg.d, p=float(cfg.p), delta=der.delta, R=der.R, trials=n,
            event1_rate=sum(r.found_1 for r in reps) / n,
            event2_rate=sum(r.found_2 for r in reps) / n,
            both_rate=len(both) / n,
            witness_rate=len(broken) / n,
            witness_rate_given_events=len(broken) / len(both) if both else math.nan,
            mean_margin=float(np.mean(margins)) if margins else math.nan,
            exp_Y=ey, exp_Z=ez, p_event1=p1, p_event2=p2, p_both=pb))
        log.info("m=%d: events %.3f, witness %.3f", m, len(both) / n, len(broken) / n)
    return SweepTable(rows=rows, config=cfg, reports=kept)


@dataclass
class MomentRow:
    q: float
    method: str
    n_vectors: int
    max_ratio: float
    bound: float
    passed: bool


def _unit_sampler(k: int) -> Callable[[np.random.Generator], np.ndarray]:
    def sample(rng):
        t = rng.standard_normal(k)
        return t / np.linalg.norm(t)
    return sample


def run_moment_experiment(params: SpikeParams, q_list, n_vectors: int = 200,
                          support: int = 10, t_sampler=None, seed: int = 0,
                          method: str = "auto", bound: float = 1.5,
                          mc_samples: int = MC_SAMPLES) -> list[MomentRow]:
    """Largest ||<X,t>||_q / (sqrt(q) ||<X,t>||_2) over sampled unit t.

    Even integer q with at most 12 active coordinates use the exact moment
    recursion (``method="auto"``); otherwise Monte Carlo with ``mc_samples``
    draws.  The L2 norm is the exact ``c1_norm * |t|_2``.
    """
    if method not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)
    sampler = t_sampler or _unit_sampler(support)
    ts = [np.asarray(sampler(rng), dtype=float) for _ in range(n_vectors)]
    k = max(t.size for t in ts)
    X = None
    rows = []
    for q in q_list:
        q = float(q)
        even = q == int(q) and int(q) % 2 == 0
        use_exact = method == "exact" or (method == "auto" and even and k <= EXACT_SUPPORT_MAX)
        if use_exact and not even:
            raise ValueError(f"exact moments need even integer q, got {q}")
        if not use_exact and X is None:
            X = spike.sample_many(params, np.random.default_rng(seed + 1), (mc_samples, k))
        worst = 0.0
        for t in ts:
            l2 = params.c1_norm * float(np.linalg.norm(t))
            if use_exact:
                lq = spike.linear_form_even_moment(t, params, int(q)) ** (1.0 / q)
            else:
                S = X[:, :t.size] @ t
                lq = float(np.mean(np.abs(S) ** q)) ** (1.0 / q)
            worst = max(worst, float(lq / (math.sqrt(q) * l2)))
        rows.append(MomentRow(q=q, method="exact" if use_exact else "mc",
                              n_vectors=n_vectors, max_ratio=worst, bound=bound,
                              passed=bool(worst <= bound)))
    return rows


def moments_table(rows: list[MomentRow], meta: dict) -> Table:
    cols = [f.name for f in dataclasses.fields(MomentRow)]
    return Table(columns=cols, rows=[[getattr(r, c) for c in cols] for r in rows],
                 meta={"kind": "moments", **meta})


@dataclass
class PositiveControlResult:
    d: int
    s: int
    m: int
    trials: int
    ensemble: str
    rate: float
    rate_raw: float
    rate_normalized: float
    holds_raw: list[bool] = field(default_factory=list)
    holds_normalized: list[bool] = field(default_factory=list)

    def to_table(self, seed: int) -> Table:
        cols = ["trial", "seed", "holds_raw", "holds_normalized"]
        rows = [[i, seed + i, a, b] for i, (a, b) in
                enumerate(zip(self.holds_raw, self.holds_normalized))]
        return Table(columns=cols, rows=rows,
                     meta={"kind": "positive-control", "d": self.d, "s": self.s,
                           "m": self.m, "ensemble": self.ensemble, "seed": seed,
                           "rate": self.rate, "rate_raw": self.rate_raw,
                           "rate_normalized": self.rate_normalized})


def run_positive_control(d: int, s: int, m: int, trials: int,
                         ensemble_name: str = "gaussian", seed: int = 0,
                         mode: str = "float") -> PositiveControlResult:
    """Fraction of draws where ERP(s) holds for both Gamma and its normalization."""
    if d > CROSS_CHECK_MAX_D:
        raise ConfigRefused(f"positive control needs d <= {CROSS_CHECK_MAX_D}, got {d}")
    if not 1 <= m <= d:
        raise ConfigRefused(f"need 1 <= m <= d, got m={m}, d={d}")
    if not 1 <= s <= d:
        raise ConfigRefused(f"need 1 <= s <= d, got s={s}")
    if ensemble_name == "gaussian":
        make = ensemble.gaussian_matrix
    elif ensemble_name == "rademacher":
        make = ensemble.rademacher_matrix
    else:
        raise ConfigRefused(f"unknown ensemble {ensemble_name!r}")
    raw, normed = [], []
    for i in range(trials):
        G = make(m, d, seed + i)
        raw.append(recovery.certify_erp(G, s, mode=mode).holds)
        normed.append(recovery.certify_erp(ensemble.normalize_columns(G).gamma_tilde,
                                           s, mode=mode).holds)
    both = [a and b for a, b in zip(raw, normed)]
    n = max(trials, 1)
    return PositiveControlResult(d=d, s=s, m=m, trials=trials, ensemble=ensemble_name,
                                 rate=sum(both) / n, rate_raw=sum(raw) / n,
                                 rate_normalized=sum(normed) / n,
                                 holds_raw=raw, holds_normalized=normed)


def inradius_table(radii: list[tuple[int, float, float]], meta: dict) -> Table:
    return Table(columns=["seed", "radius", "certificate_gap"],
                 rows=[[s, r, g] for s, r, g in radii],
                 meta={"kind": "inradius", **meta})


def erp_table(verdict: recovery.ERPVerdict, meta: dict) -> Table:
    v = verdict.violation
    return Table(
        columns=["order", "holds", "lps_solved", "max_value", "screened",
                 "violation_support", "violation_sigma", "violation_value"],
        rows=[[verdict.order, verdict.holds, verdict.lps_solved,
               float(verdict.max_value), verdict.screened,
               None if v is None else " ".join(map(str, v.support)),
               None if v is None else " ".join(map(str, v.sigma)),
               None if v is None else float(v.value)]],
        meta={"kind": "erp-check", **meta})
