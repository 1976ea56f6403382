"""Random-beamforming pilot design, combined observations and SNR calibration."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .channel import ChannelRealization, SystemConfig, channel_matrices


@dataclass(frozen=True)
class TrainingConfig:
    """Pilot and combiner dimensions.

    ``rf_rx``/``rf_tx`` enable the hybrid decomposition when set; ``Q_p``
    and ``T_p`` must then be multiples of the RF-chain counts.
    """

    n_pilots: int = 5
    n_streams: int = 20
    n_subframes: int = 20
    rf_rx: int | None = None
    rf_tx: int | None = None
    shared_beams: bool = False

    def __post_init__(self):
        if min(self.n_pilots, self.n_streams, self.n_subframes) < 1:
            raise ValueError("K_p, Q_p and T_p must be >= 1")

    def spacing(self, cfg: SystemConfig) -> int:
        return math.ceil(cfg.n_subcarriers / self.n_pilots)

    def pilots(self, cfg: SystemConfig) -> np.ndarray:
        """1-based comb of pilot subcarriers starting at subcarrier 1."""
        if self.n_pilots > cfg.n_subcarriers:
            raise ValueError("K_p exceeds K_o")
        p = 1 + np.arange(self.n_pilots) * self.spacing(cfg)
        return p[p <= cfg.n_subcarriers]

    def to_dict(self) -> dict:
        return asdict(self)


def _phase_matrix(rng, rows, cols, n):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, size=(rows, cols))) / np.sqrt(n)


def _hybrid(rng, n, total, rf):
    if total % rf:
        raise ValueError(f"{total} streams not divisible by {rf} RF chains")
    blocks = [_phase_matrix(rng, n, rf, n) @ np.eye(rf) for _ in range(total // rf)]
    return np.hstack(blocks)


def random_beams(cfg: SystemConfig, tcfg: TrainingConfig, rng):
    """Constant-modulus combiners ``W_k`` and pilots ``X_k``, one pair per pilot."""
    n_k = len(tcfg.pilots(cfg))
    ws, xs = [], []
    for i in range(n_k):
        if tcfg.shared_beams and i > 0:
            ws.append(ws[0])
            xs.append(xs[0])
            continue
        if tcfg.rf_rx:
            w = _hybrid(rng, cfg.N_r, tcfg.n_streams, tcfg.rf_rx)
        else:
            w = _phase_matrix(rng, cfg.N_r, tcfg.n_streams, cfg.N_r)
        if tcfg.rf_tx:
            x = _hybrid(rng, cfg.N_t, tcfg.n_subframes, tcfg.rf_tx)
        else:
            x = _phase_matrix(rng, cfg.N_t, tcfg.n_subframes, cfg.N_t)
        ws.append(w)
        xs.append(x)
    return ws, xs


@dataclass
class Observation:
    """Combined pilot measurements on the pilot comb."""

    y: list
    w: list
    x: list
    pilots: np.ndarray
    noise_var: float
    snr_db: float | None = None
    cfg: SystemConfig | None = None

    @property
    def n_pilots(self) -> int:
        return len(self.pilots)

    def vectors(self) -> list:
        return [yk.reshape(-1, order="F") for yk in self.y]

    def save(self, path):
        cfg = "" if self.cfg is None else json.dumps(self.cfg.to_dict(), sort_keys=True)
        np.savez(path, y=np.stack(self.y), w=np.stack(self.w), x=np.stack(self.x),
                 pilots=self.pilots, noise_var=self.noise_var,
                 snr_db=np.nan if self.snr_db is None else self.snr_db, cfg=cfg)

    @classmethod
    def load(cls, path) -> "Observation":
        with np.load(path) as d:
            snr = float(d["snr_db"])
            cfg = str(d["cfg"]) if "cfg" in d else ""
            return cls(y=list(d["y"]), w=list(d["w"]), x=list(d["x"]), pilots=d["pilots"],
                       noise_var=float(d["noise_var"]), snr_db=None if np.isnan(snr) else snr,
                       cfg=SystemConfig.from_dict(json.loads(cfg)) if cfg else None)


def noiseless_signals(channels, ws, xs) -> list:
    return [w.conj().T @ h @ x for h, w, x in zip(channels, ws, xs)]


def observe(realization: ChannelRealization, beams, cfg: SystemConfig, tcfg: TrainingConfig,
            noise_var: float, rng, snr_db: float | None = None) -> Observation:
    """``Y_k = W_k^H (H_k X_k + V_k)`` with i.i.d. CN(0, noise_var) antenna noise."""
    ws, xs = beams
    pilots = tcfg.pilots(cfg)
    h = channel_matrices(realization, pilots, cfg)
    ys = noiseless_signals(h, ws, xs)
    if noise_var > 0:
        out = []
        for yk, w in zip(ys, ws):
            shape = (cfg.N_r, tcfg.n_subframes)
            v = np.sqrt(noise_var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            out.append(yk + w.conj().T @ v)
        ys = out
    return Observation(y=ys, w=list(ws), x=list(xs), pilots=pilots, noise_var=float(noise_var),
                       snr_db=snr_db, cfg=cfg)


def expected_noise_power(ws, n_subframes: int, noise_var: float = 1.0) -> float:
    """``sum_k E||W_k^H V_k||_F^2`` in closed form."""
    return float(sum(noise_var * n_subframes * np.real(np.trace(w.conj().T @ w)) for w in ws))


def calibrate_noise(snr_db: float, channels, beams) -> float:
    """Noise variance giving the requested receive SNR for these channels and beams."""
    ws, xs = beams
    signal = sum(np.linalg.norm(s) ** 2 for s in noiseless_signals(channels, ws, xs))
    if signal <= 0:
        raise ValueError("cannot calibrate SNR against a zero channel")
    unit = expected_noise_power(ws, xs[0].shape[1], 1.0)
    return float(signal / (10 ** (snr_db / 10) * unit))


def realized_snr_db(channels, beams, noise_var: float) -> float:
    ws, xs = beams
    signal = sum(np.linalg.norm(s) ** 2 for s in noiseless_signals(channels, ws, xs))
    return float(10 * np.log10(signal / expected_noise_power(ws, xs[0].shape[1], noise_var)))
