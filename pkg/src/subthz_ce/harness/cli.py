"""Command line entry point: simulate, estimate, sweep and report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..channel import channel_matrices, load_realizations, save_realizations
from ..training import Observation
from .runner import (RECORD_FIELDS, SUMMARY_FIELDS, read_records, run_estimator, simulate_trial,
                     summarize, write_csv, Frame)
from .metrics import nmse
from .spec import ConfigError, _estimators, load_spec, spec_from_dict

log = logging.getLogger("subthz_ce")


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="root seed (overrides the spec file)")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--out-dir", default=None, help="output directory")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", dest="scale", action="store_const", const="desk",
                       help="small default configuration (default)")
    scale.add_argument("--paper-scale", dest="scale", action="store_const", const="paper",
                       help="full-size configuration")
    p.set_defaults(scale="desk")


def _spec(args):
    spec = load_spec(args.spec, args.scale) if getattr(args, "spec", None) else spec_from_dict({}, args.scale)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    return spec


def cmd_simulate(args) -> int:
    spec = _spec(args)
    out = Path(args.out_dir or "sim")
    out.mkdir(parents=True, exist_ok=True)
    cfg, tcfg = spec.system, spec.training
    snr = spec.snr_db if args.snr is None else args.snr
    frames = simulate_trial(cfg, tcfg, snr, args.frames, [spec.seed, 0],
                            lambda f: [spec.seed, 1, f])
    save_realizations(out / "channels.json", [f.realization for f in frames], cfg, spec.seed)
    for i, f in enumerate(frames):
        f.observation.save(out / f"obs_{i:03d}.npz")
    print(f"wrote {len(frames)} frames to {out}")
    return 0


def cmd_estimate(args) -> int:
    src = Path(args.input)
    cfg, reals, _ = load_realizations(src / "channels.json")
    files = sorted(src.glob("obs_*.npz"))
    if len(files) != len(reals):
        raise ConfigError(f"{len(reals)} channel frames but {len(files)} observation files")
    frames = []
    for real, path in zip(reals, files):
        obs = Observation.load(path)
        if obs.cfg is None or obs.cfg.digest() != cfg.digest():
            raise ConfigError(f"{path.name} was generated for a different configuration")
        frames.append(Frame(real, obs, channel_matrices(real, obs.pilots, cfg)))
    system = {"L": cfg.n_paths, "L_cm": cfg.n_common}
    entry = _estimators([{"name": args.estimator}], system)[0]
    if entry.kind not in ("ts", "mfista", "gsomp", "genie", "genie_grid", "genie_nowb"):
        raise ConfigError(f"unknown estimator {args.estimator!r}")
    results, resets = run_estimator(entry, frames, args.reset_threshold)
    out = Path(args.out_dir or src)
    out.mkdir(parents=True, exist_ok=True)
    rows, dump = [], []
    for f, (fr, res, reset) in enumerate(zip(frames, results, resets)):
        e = nmse(fr.channels, res.channels())
        rows.append({"estimator": entry.name, "axis": "frame", "axis_value": f, "trial": 0,
                     "frame": f, "nmse": e, "se": "", "runtime_s": None, "resets": int(reset),
                     "iterations": int(res.diagnostics.get("iterations", 0))})
        dump.append({"frame": f, "nmse": e, "support": res.support.tolist(),
                     "angles": res.angles.tolist(),
                     "tau": None if res.tau is None else res.tau.tolist(),
                     "residual": res.diagnostics["residual"], "reset": bool(reset)})
        print(f"frame {f}: nmse={e:.4g} support={len(res.support)} reset={reset}")
    write_csv(out / f"estimate_{entry.name}.csv", rows, RECORD_FIELDS)
    with open(out / f"estimate_{entry.name}.json", "w") as fh:
        json.dump(dump, fh, indent=1)
    return 0


def cmd_sweep(args) -> int:
    from .runner import run_experiment
    spec = _spec(args)
    out = args.out_dir or spec.out_dir
    _, summary = run_experiment(spec, out, threads=args.threads)
    for r in summary:
        print(f"{r['estimator']:>12s} {r['axis']}={r['axis_value']:<8g} nmse={r['nmse_mean']:.4g} "
              f"se={r['se_mean']:.4g}")
    print(f"results in {out}")
    return 0


def cmd_report(args) -> int:
    from .plots import plot_summary
    records = read_records(args.records)
    if not records:
        raise ConfigError(f"{args.records} has no records")
    missing = set(RECORD_FIELDS) - set(records[0])
    if missing:
        raise ConfigError(f"records file lacks columns {sorted(missing)}")
    out = Path(args.out_dir or Path(args.records).parent)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(records)
    write_csv(out / "summary.csv", summary, SUMMARY_FIELDS)
    for p in plot_summary(summary, out):
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subthz-ce", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a frame sequence and its pilot observations")
    p.add_argument("--spec", help="spec file (defaults to the preset)")
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--snr", type=float, default=None, help="SNR in dB")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="run one estimator on simulated files")
    p.add_argument("input", help="directory written by simulate")
    p.add_argument("--estimator", default="ts")
    p.add_argument("--reset-threshold", type=float, default=np.inf)
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="run a full experiment from a spec file")
    p.add_argument("spec", help="spec file")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summary CSV and plots from a records CSV")
    p.add_argument("records")
    _common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
