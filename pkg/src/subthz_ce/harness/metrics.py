"""Estimation accuracy and achievable-rate metrics."""
from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


def nmse(h_true, h_est) -> float:
    """``sum_k ||H_k - Hhat_k||_F^2 / sum_k ||H_k||_F^2`` over the given subcarriers."""
    h = np.asarray(h_true)
    e = np.asarray(h_est)
    if h.shape != e.shape:
        raise ValueError(f"shape mismatch {h.shape} vs {e.shape}")
    den = float(np.sum(np.abs(h) ** 2))
    if den == 0:
        raise ValueError("true channel is identically zero")
    return float(np.sum(np.abs(h - e) ** 2)) / den


def eigen_beamformers(h_est, n_streams: int):
    """Combiner and precoder from the dominant singular vectors of ``Hhat``."""
    u, _, vh = np.linalg.svd(h_est)
    return u[:, :n_streams], vh.conj().T[:, :n_streams]


def subcarrier_rate(h, h_est, noise_var: float, power: float, n_streams: int) -> float:
    """``log2 det(I + P/N_s R^-1 W^H H F F^H H^H W)`` with ``R = sigma^2 W^H W``."""
    if power == 0:
        return 0.0
    w, f = eigen_beamformers(h_est, n_streams)
    r = noise_var * (w.conj().T @ w)
    if np.linalg.cond(r) > 1e12:
        log.warning("regularizing a singular post-combining noise covariance")
        r = r + 1e-12 * np.eye(n_streams)
    g = w.conj().T @ h @ f
    m = np.eye(n_streams) + power / n_streams * np.linalg.solve(r, g @ g.conj().T)
    sign, logdet = np.linalg.slogdet(m)
    return float(logdet / np.log(2))


def spectral_efficiency(h_all, h_est_all, noise_var: float, power: float, n_streams: int,
                        overhead: float = 0.0, pilots=()) -> float:
    """Per-stream spectral efficiency in bit/s/Hz including the training overhead.

    ``h_all`` and ``h_est_all`` cover every subcarrier in order. During
    the training fraction ``overhead`` only the non-pilot subcarriers
    (1-based numbers not in ``pilots``) carry data.
    """
    h_all = np.asarray(h_all)
    n_sub = h_all.shape[0]
    if n_streams > min(h_all.shape[1:]):
        raise ValueError("more streams than antennas")
    if not 0 <= overhead <= 1:
        raise ValueError("overhead fraction must lie in [0, 1]")
    rates = np.array([subcarrier_rate(h, e, noise_var, power, n_streams)
                      for h, e in zip(h_all, h_est_all)])
    data = np.ones(n_sub, dtype=bool)
    data[np.asarray(pilots, dtype=int) - 1] = False
    total = (overhead * rates[data].sum() + (1 - overhead) * rates.sum()) / (n_sub * n_streams)
    return max(float(total), 0.0)
