"""One-time pilot calibration of the rate thresholds used by the tests.

Run ``python3 -m colnorm.pilot tests/fixtures/pilot.json``.  Pilot trials use
seeds starting at ``PILOT_SEED_BASE``, disjoint from the seeds the tests use.
Each threshold is the one-sided Clopper-Pearson lower bound of the pilot
rate at confidence ``1 - PILOT_ALPHA``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from scipy import stats

from . import __version__, harness
from .harness import ExperimentConfig

PILOT_SEED_BASE = 10_000
PILOT_ALPHA = 1e-4


def lower_bound(successes: int, n: int, alpha: float = PILOT_ALPHA) -> float:
    if n == 0 or successes == 0:
        return 0.0
    return float(stats.beta.ppf(alpha, successes, n - successes + 1))


def _first_seed(cfg: ExperimentConfig, want: str, limit: int = 1000) -> int:
    for i in range(limit):
        rep = harness.run_counterexample_trial(cfg, i)
        if rep.verdict == want:
            return rep.seed
    raise RuntimeError(f"no seed with verdict {want} in {limit} trials")


def run_pilot() -> dict:
    out: dict = {"version": __version__, "seed_base": PILOT_SEED_BASE, "alpha": PILOT_ALPHA}

    cfg = ExperimentConfig(d=200, p=4, m=5, trials=200, seed_base=PILOT_SEED_BASE)
    sw = harness.run_sweep(cfg)
    reps = sw.reports[5]
    fired = [r for r in reps if r.found_1 and r.found_2]
    broken = sum(r.verdict == "erp2_broken" for r in fired)
    out["counterexample"] = {
        "d": 200, "p": 4, "m": 5, "trials": 200, "events": len(fired),
        "broken": broken, "threshold": lower_bound(broken, len(fired))}

    mono = ExperimentConfig(d=200, p=4, m_list=[3, 8], trials=200,
                            seed_base=PILOT_SEED_BASE)
    rows = {r.m: r.witness_rate for r in harness.run_sweep(mono).rows}
    out["monotonicity"] = {"rate_m3": rows[3], "rate_m8": rows[8]}

    pc = harness.run_positive_control(24, 2, 16, 100, "gaussian", seed=PILOT_SEED_BASE)
    both = round(pc.rate * pc.trials)
    out["positive_control"] = {
        "d": 24, "s": 2, "m": 16, "trials": 100, "holds": both,
        "threshold": lower_bound(both, pc.trials)}

    out["pinned_seeds"] = {
        "d200_m5_broken": _first_seed(ExperimentConfig(d=200, p=4, m=5, seed_base=0),
                                      "erp2_broken"),
        "d24_m3_broken": _first_seed(ExperimentConfig(d=24, p=4, m=3, seed_base=0,
                                                      delta_override=3 / 24),
                                     "erp2_broken"),
    }
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", help="fixture path to write")
    args = ap.parse_args(argv)
    data = run_pilot()
    Path(args.out).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    json.dump(data, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
