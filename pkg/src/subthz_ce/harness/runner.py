"""Seeded Monte-Carlo sweeps over the estimators."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..channel import channel_matrices, draw_realization, evolve
from ..estimators import track_protocol
from ..training import calibrate_noise, observe, random_beams
from .metrics import nmse, spectral_efficiency
from .spec import ExperimentSpec

log = logging.getLogger(__name__)

RECORD_FIELDS = ("estimator", "axis", "axis_value", "trial", "frame", "nmse", "se", "runtime_s",
                 "resets", "iterations")
SUMMARY_FIELDS = ("estimator", "axis", "axis_value", "n", "nmse_mean", "nmse_std", "se_mean",
                  "se_std", "reset_rate")

# stream ids for seed splitting
_CHANNEL, _FRAME, _CALIBRATION = 0, 1, 2


@dataclass
class Frame:
    realization: object
    observation: object
    channels: np.ndarray


def simulate_trial(cfg, tcfg, snr_db: float, n_frames: int, channel_seed, frame_seed) -> list:
    """Frame sequence with one observation per frame at the requested SNR.

    ``channel_seed`` drives the channel evolution and ``frame_seed(f)`` the
    beams and noise of frame ``f``, so different SNRs see the same channels.
    """
    rng = np.random.default_rng(channel_seed)
    reals = [draw_realization(cfg, rng)]
    for _ in range(1, n_frames):
        reals.append(evolve(reals[-1], cfg, rng))
    frames = []
    pilots = tcfg.pilots(cfg)
    for f, real in enumerate(reals):
        frng = np.random.default_rng(frame_seed(f))
        beams = random_beams(cfg, tcfg, frng)
        h = channel_matrices(real, pilots, cfg)
        noise_var = calibrate_noise(snr_db, h, beams)
        frames.append(Frame(real, observe(real, beams, cfg, tcfg, noise_var, frng, snr_db), h))
    return frames


def _frames_for(spec: ExperimentSpec, axis_idx: int, trial: int, stream: int = _FRAME):
    cfg, tcfg, snr = spec.point(spec.values[axis_idx])
    root = spec.seed
    if stream == _CALIBRATION:
        chan = [root, _CALIBRATION, axis_idx, trial]
        return simulate_trial(cfg, tcfg, snr, spec.frames, chan, lambda f: chan + [f])
    return simulate_trial(cfg, tcfg, snr, spec.frames, [root, _CHANNEL, trial],
                          lambda f: [root, _FRAME, axis_idx, trial, f])


def run_estimator(entry, frames, threshold: float = np.inf):
    """Estimates for each frame plus per-frame reset flags and runtimes."""
    est = entry.build()
    if entry.is_genie:
        results = []
        for fr in frames:
            est.fit(fr.observation, fr.realization)
            results.append(est.result_)
        return results, [False] * len(frames)
    tracked = track_protocol(est, [fr.observation for fr in frames], threshold)
    return tracked.results, tracked.resets


def calibrate_reset(spec: ExperimentSpec, axis_idx: int, entry, quantile: float = 0.9,
                    trials: int = 10) -> float:
    """Residual level exceeded by a ``1 - quantile`` share of tracked frames.

    Uses independent calibration sequences at the same operating point and
    only frames that start from a prior support.
    """
    if entry.is_genie or spec.frames < 2:
        return np.inf
    res = []
    for c in range(trials):
        results, _ = run_estimator(entry, _frames_for(spec, axis_idx, c, _CALIBRATION))
        res.extend(r.diagnostics["residual"] for r in results[1:])
    return float(np.quantile(res, quantile))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def trial_records(spec: ExperimentSpec, axis_idx: int, trial: int, thresholds: dict) -> list:
    """Metric records of every estimator on one trial; failures skip the trial."""
    value = spec.values[axis_idx]
    cfg, tcfg, _ = spec.point(value)
    try:
        frames = _frames_for(spec, axis_idx, trial)
        all_k = np.arange(1, cfg.n_subcarriers + 1)
        h_all = [channel_matrices(fr.realization, all_k, cfg) for fr in frames]
        power = 1.0 if spec.power is None else spec.power
        iota = spec.training_fraction(tcfg)
        out = []
        for entry in spec.estimators:
            results, resets = run_estimator(entry, frames, thresholds.get(entry.name, np.inf))
            for f, (fr, res, reset) in enumerate(zip(frames, results, resets)):
                se = spectral_efficiency(h_all[f], res.channels(all_k), fr.observation.noise_var,
                                         power, min(spec.n_streams, cfg.N_r, cfg.N_t), iota,
                                         fr.observation.pilots)
                runtime = res.diagnostics.get("runtime") if spec.timing else None
                out.append({"estimator": entry.name, "axis": spec.axis, "axis_value": value,
                            "trial": trial, "frame": f, "nmse": nmse(fr.channels, res.channels()),
                            "se": se, "runtime_s": runtime, "resets": int(reset),
                            "iterations": int(res.diagnostics.get("iterations", 0))})
        return out
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("trial %d at %s=%s failed: %s", trial, spec.axis, value, exc)
        return []


def _unit(args):
    return trial_records(*args)


def summarize(records) -> list:
    """Mean and standard deviation per estimator and axis point."""
    groups: dict = {}
    for r in records:
        key = (r["estimator"], r["axis"], float(r["axis_value"]))
        groups.setdefault(key, []).append(r)
    order = {}
    for r in records:
        order.setdefault(r["estimator"], len(order))
    rows = []
    for key in sorted(groups, key=lambda k: (order[k[0]], k[2])):
        g = groups[key]
        nm = np.array([float(r["nmse"]) for r in g])
        se = np.array([float(r["se"]) for r in g])
        rs = np.array([float(r["resets"]) for r in g])
        rows.append({"estimator": key[0], "axis": key[1], "axis_value": key[2], "n": len(g),
                     "nmse_mean": nm.mean(), "nmse_std": nm.std(), "se_mean": se.mean(),
                     "se_std": se.std(), "reset_rate": rs.mean()})
    return rows


def write_csv(path, rows, fields):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([r[f] if isinstance(r[f], str) else _fmt(r[f]) for f in fields])


def read_records(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows and Path(path).stat().st_size == 0:
        raise ValueError(f"{path} is empty")
    return rows


def run_experiment(spec: ExperimentSpec, out_dir=None, threads: int = 1, plots: bool = True):
    """Run the sweep; write ``records.csv``, ``summary.csv`` and plots to ``out_dir``.

    Returns the records and summary rows.
    """
    out = Path(out_dir or spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    thresholds = []
    for i in range(len(spec.values)):
        th = {}
        mode = spec.reset.get("mode", "none")
        for entry in spec.estimators:
            if mode == "fixed":
                th[entry.name] = float(spec.reset["threshold"])
            elif mode == "calibrate":
                th[entry.name] = calibrate_reset(spec, i, entry,
                                                 float(spec.reset.get("quantile", 0.9)),
                                                 int(spec.reset.get("trials", 10)))
        thresholds.append(th)
    units = [(spec, i, t, thresholds[i]) for i in range(len(spec.values)) for t in range(spec.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_unit, units))
    else:
        chunks = [_unit(u) for u in units]
    records = [r for c in chunks for r in c]
    names = [e.name for e in spec.estimators]
    records.sort(key=lambda r: (names.index(r["estimator"]), r["axis_value"], r["trial"], r["frame"]))
    write_csv(out / "records.csv", records, RECORD_FIELDS)
    summary = summarize(records)
    write_csv(out / "summary.csv", summary, SUMMARY_FIELDS)
    if plots and records:
        from .plots import plot_summary
        plot_summary(summary, out)
    return records, summary
