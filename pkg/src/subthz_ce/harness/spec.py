"""Experiment specification and its key-value file format."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import yaml

from ..channel import SystemConfig
from ..codebook import GridSpec
from ..estimators import ESTIMATORS
from ..training import TrainingConfig


class ConfigError(ValueError):
    """Raised for invalid or inconsistent experiment settings."""


AXES = ("snr", "n_pilots", "measurement_ratio", "bandwidth")
KINDS = tuple(ESTIMATORS) + ("genie_grid", "genie_nowb")

DESK = {
    "f_c": 142e9, "B": 8e9, "K_o": 128, "L": 4, "L_cm": 3, "N_r": [8, 8], "N_t": [4, 4],
    "G_sub_r": 8, "G_sub_t": 4, "M": 2, "K_p": 5, "Q_p": 20, "T_p": 20,
    "frame_duration": 10e-3, "subframe_duration": 10e-6,
}
PAPER = dict(DESK, K_o=1024, N_r=[16, 16], G_sub_r=16, M=3, K_p=10, Q_p=25, T_p=25)

_SYSTEM_KEYS = set(DESK) | {"tau_min", "tau_max", "on_grid", "gain_model", "absorption", "alpha_var"}


@dataclass(frozen=True)
class EstimatorEntry:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def build(self):
        if self.kind == "genie_grid":
            return ESTIMATORS["genie"](angles="grid", **self.params)
        if self.kind == "genie_nowb":
            return ESTIMATORS["genie"](angles="grid", spatial_wideband=False, **self.params)
        return ESTIMATORS[self.kind](**self.params)

    @property
    def is_genie(self) -> bool:
        return self.kind.startswith("genie")


@dataclass(frozen=True)
class ExperimentSpec:
    system: SystemConfig
    training: TrainingConfig
    estimators: tuple
    axis: str = "snr"
    values: tuple = (20.0,)
    snr_db: float = 20.0
    trials: int = 10
    frames: int = 4
    seed: int = 0
    n_streams: int = 4
    power: float | None = None
    reset: dict = field(default_factory=lambda: {"mode": "none"})
    timing: bool = False
    out_dir: str = "results"

    def __post_init__(self):
        if self.trials < 1 or self.frames < 1:
            raise ConfigError("trials and frames must be >= 1")
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}")
        if list(self.values) != sorted(self.values) or not self.values:
            raise ConfigError("axis values must be a non-empty sorted list")
        names = [e.name for e in self.estimators]
        if not names or len(set(names)) != len(names):
            raise ConfigError("estimator names must be unique and non-empty")
        for e in self.estimators:
            if e.kind not in KINDS:
                raise ConfigError(f"unknown estimator kind {e.kind!r}; choose from {KINDS}")
        if self.reset.get("mode", "none") not in ("none", "fixed", "calibrate"):
            raise ConfigError("reset mode must be none, fixed or calibrate")

    def point(self, value):
        """System/training configuration and SNR at one axis value."""
        cfg, tcfg, snr = self.system, self.training, self.snr_db
        if self.axis == "snr":
            snr = float(value)
        elif self.axis == "n_pilots":
            tcfg = replace(tcfg, n_pilots=int(value))
        elif self.axis == "bandwidth":
            cfg = replace(cfg, bandwidth=float(value))
        else:
            side = max(1, round(math.sqrt(float(value) * cfg.N_r * cfg.N_t)))
            tcfg = replace(tcfg, n_streams=side, n_subframes=side)
        return cfg, tcfg, snr

    def training_fraction(self, tcfg: TrainingConfig | None = None) -> float:
        """Share of each frame spent on pilots."""
        tcfg = tcfg or self.training
        sys = self.system
        return min(1.0, tcfg.n_subframes * sys.subframe_duration / sys.frame_duration)


def _array(v, key):
    if isinstance(v, str) and "x" in v:
        v = [int(p) for p in v.lower().split("x")]
    if isinstance(v, int):
        side = math.isqrt(v)
        if side * side != v:
            raise ConfigError(f"{key}={v} is not a square UPA; give [N_v, N_h]")
        v = [side, side]
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{key} must be [N_v, N_h], 'VxH' or a square count")
    return tuple(int(x) for x in v)


def _estimators(block, system):
    if block is None:
        block = ["genie", "mfista", "ts", "gsomp"]
    out = []
    for item in block:
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError("each estimator needs a name")
        item = dict(item)
        name = str(item.pop("name"))
        kind = str(item.pop("kind", name))
        if kind in ("ts", "mfista"):
            item.setdefault("n_paths", system["L"])
            item.setdefault("n_common", system["L_cm"])
        elif kind == "gsomp":
            item.setdefault("n_paths", system["L"])
        out.append(EstimatorEntry(name, kind, item))
    return tuple(out)


def spec_from_dict(d: dict, scale: str = "desk") -> ExperimentSpec:
    """Build a spec from parsed key-value data layered over the chosen preset."""
    if not isinstance(d, dict):
        raise ConfigError("spec file must hold a mapping")
    d = dict(d)
    base = dict(PAPER if scale == "paper" else DESK)
    sys_block = d.pop("system", {}) or {}
    for key in list(d):
        if key in _SYSTEM_KEYS:
            sys_block[key] = d.pop(key)
    unknown = set(sys_block) - _SYSTEM_KEYS
    if unknown:
        raise ConfigError(f"unknown system keys: {sorted(unknown)}")
    s = {**base, **sys_block}
    try:
        extra = {k: s[k] for k in ("tau_min", "tau_max", "on_grid", "gain_model", "absorption",
                                    "alpha_var") if k in s}
        system = SystemConfig(f_c=float(s["f_c"]), bandwidth=float(s["B"]),
                              n_subcarriers=int(s["K_o"]), n_rx=_array(s["N_r"], "N_r"),
                              n_tx=_array(s["N_t"], "N_t"), n_paths=int(s["L"]),
                              n_common=int(s["L_cm"]),
                              frame_duration=float(s["frame_duration"]),
                              subframe_duration=float(s["subframe_duration"]),
                              grid=GridSpec(int(s["G_sub_r"]), int(s["G_sub_t"]), int(s["M"])),
                              **extra)
        training = TrainingConfig(n_pilots=int(s["K_p"]), n_streams=int(s["Q_p"]),
                                  n_subframes=int(s["T_p"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    sweep = d.pop("sweep", {}) or {}
    est = _estimators(d.pop("estimators", None), s)
    known = {"seed", "reset", "timing", "out_dir", "n_streams", "power"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    reset = d.get("reset", {"mode": "none"})
    if isinstance(reset, (int, float)):
        reset = {"mode": "fixed", "threshold": float(reset)}
    try:
        spec = ExperimentSpec(
            system=system, training=training, estimators=est,
            axis=str(sweep.get("axis", "snr")),
            values=tuple(float(v) for v in sweep.get("values", [20.0])),
            snr_db=float(sweep.get("snr_db", 20.0)), trials=int(sweep.get("trials", 10)),
            frames=int(sweep.get("frames", 4)), seed=int(d.get("seed", 0)),
            n_streams=int(d.get("n_streams", 4)),
            power=None if d.get("power") is None else float(d["power"]),
            reset=dict(reset), timing=bool(d.get("timing", False)),
            out_dir=str(d.get("out_dir", "results")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def load_spec(path, scale: str = "desk") -> ExperimentSpec:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return spec_from_dict(data, scale)
