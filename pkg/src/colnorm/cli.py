"""Command-line entry point: ``colnorm <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import ensemble, geometry, harness, recovery
from .harness import ConfigRefused, ExperimentConfig
from .recovery import BudgetExceeded
from .reports import Table, emit_report, render_report
from .spike import InvalidParameterError

log = logging.getLogger("colnorm")

OVERRIDES = {"d": "d", "p": "p", "m": "m", "trials": "trials", "seed": "seed_base",
             "out": "out", "format": "format", "delta": "delta_override",
             "R": "R_override"}


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON file with ExperimentConfig keys")
    sp.add_argument("--d", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--m", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--delta", type=float, help="spike probability (default 4/d)")
    sp.add_argument("--R", type=float, help="spike magnitude (default sqrt(p) d^(1/p))")
    sp.add_argument("--exact", action="store_true", default=None,
                    help="resolve LP boundary cases in exact rational arithmetic")
    sp.add_argument("--out", help="report path (stdout when omitted)")
    sp.add_argument("--format", choices=["csv", "json"])
    sp.add_argument("--matrix", help="matrix dump in the ensemble text format")
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="colnorm", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in [
        ("trial", "one counterexample trial per seed"),
        ("sweep", "counterexample rates over an m list"),
        ("moments", "moment growth ratios of <X, t>"),
        ("erp-check", "certify ERP(s) for a dumped or drawn matrix"),
        ("inradius", "inradius of the spike-free block of draws"),
        ("positive-control", "ERP rate for Gaussian or Rademacher draws"),
        ("draw", "write one seeded spike matrix dump"),
    ]:
        sp = sub.add_parser(name, help=text)
        _common(sp)
        if name == "sweep":
            sp.add_argument("--m-list", type=lambda s: [int(x) for x in s.split(",")])
        if name in ("erp-check", "positive-control"):
            sp.add_argument("--s", type=int)
        if name == "positive-control":
            sp.add_argument("--ensemble", choices=["gaussian", "rademacher"])
        if name == "moments":
            sp.add_argument("--q-list", type=lambda s: [float(x) for x in s.split(",")])
    return ap


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for flag, key in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.exact:
        cfg.exact = True
    for extra in ("m_list", "s", "ensemble", "q_list"):
        value = getattr(args, extra, None)
        if value is not None:
            setattr(cfg, extra, value)
    return cfg


def _output(table: Table, cfg: ExperimentConfig) -> None:
    if cfg.out:
        emit_report(table, cfg.out, cfg.format)
        log.info("wrote %s", cfg.out)
    else:
        sys.stdout.write(render_report(table, cfg.format))


def cmd_trial(cfg, args):
    harness.derive(cfg)
    reps = [harness.run_counterexample_trial(cfg, i) for i in range(cfg.trials)]
    return harness.trials_table(reps, cfg)


def cmd_sweep(cfg, args):
    return harness.run_sweep(cfg).to_table()


def cmd_moments(cfg, args):
    der = harness.derive(cfg)
    rows = harness.run_moment_experiment(
        der.params, cfg.q_list, n_vectors=cfg.n_vectors, support=cfg.support,
        seed=cfg.seed_base, method=cfg.moment_method, bound=cfg.moment_bound)
    table = harness.moments_table(rows, {"config": cfg.as_meta(),
                                         "delta": der.delta, "R": der.R})
    if not all(r.passed for r in rows):
        _output(table, cfg)
        raise RuntimeError("moment ratio exceeded the configured bound")
    return table


def _matrix(cfg, args) -> tuple[np.ndarray, dict]:
    if args.matrix:
        dr = ensemble.read_draw(args.matrix)
        return dr.gamma, {"matrix": args.matrix}
    der = harness.derive(cfg)
    dr = ensemble.draw(der.m, cfg.d, der.params, cfg.seed_base)
    return dr.gamma, {"seed": cfg.seed_base, "m": der.m, "d": cfg.d,
                      "delta": der.delta, "R": der.R}


def cmd_erp_check(cfg, args):
    gamma, meta = _matrix(cfg, args)
    tilde = ensemble.normalize_columns(gamma).gamma_tilde
    verdict = recovery.certify_erp(tilde, cfg.s, mode="exact" if cfg.exact else "float")
    return harness.erp_table(verdict, {**meta, "s": cfg.s, "normalized": True})


def cmd_inradius(cfg, args):
    if args.matrix:
        res = geometry.inradius(ensemble.read_draw(args.matrix).gamma)
        return harness.inradius_table([(None, res.radius, res.certificate_gap)],
                                      {"matrix": args.matrix})
    der = harness.derive(cfg)
    out = []
    for i in range(cfg.trials):
        dr = ensemble.draw(der.m, cfg.d, der.params, cfg.seed_base + i)
        ev = ensemble.detect_events(dr)
        if not ev.found_2:
            continue
        res = geometry.inradius(dr.gamma[:, ev.zero_cols])
        out.append((dr.seed, res.radius, res.certificate_gap))
    return harness.inradius_table(out, {"config": cfg.as_meta(), "m": der.m})


def cmd_positive_control(cfg, args):
    m = cfg.m if cfg.m is not None else cfg.d
    res = harness.run_positive_control(cfg.d, cfg.s, m, cfg.trials, cfg.ensemble,
                                       seed=cfg.seed_base,
                                       mode="exact" if cfg.exact else "float")
    return res.to_table(cfg.seed_base)


def cmd_draw(cfg, args):
    der = harness.derive(cfg)
    if not cfg.out:
        raise ConfigRefused("draw needs --out")
    dr = ensemble.draw(der.m, cfg.d, der.params, cfg.seed_base)
    ensemble.write_draw(dr, cfg.out)
    return None


COMMANDS = {"trial": cmd_trial, "sweep": cmd_sweep, "moments": cmd_moments,
            "erp-check": cmd_erp_check, "inradius": cmd_inradius,
            "positive-control": cmd_positive_control, "draw": cmd_draw}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        table = COMMANDS[args.command](cfg, args)
        if table is not None:
            _output(table, cfg)
    except (ConfigRefused, BudgetExceeded, InvalidParameterError) as exc:
        print(f"colnorm: refused: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"colnorm: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
