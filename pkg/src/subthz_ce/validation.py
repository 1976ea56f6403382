"""Input checks shared by the estimators and the experiment harness."""
from __future__ import annotations

import numpy as np

from .codebook import GridSpec


def check_observation(obs, require_cfg: bool = True):
    """Validate shapes and finiteness of an :class:`~subthz_ce.training.Observation`."""
    if require_cfg and getattr(obs, "cfg", None) is None:
        raise ValueError("observation carries no SystemConfig")
    n = len(obs.pilots)
    if n < 1 or len(obs.y) != n or len(obs.w) != n or len(obs.x) != n:
        raise ValueError("need one Y, W and X per pilot subcarrier")
    q, t = obs.w[0].shape[1], obs.x[0].shape[1]
    for y, w, x in zip(obs.y, obs.w, obs.x):
        if y.shape != (q, t) or w.shape[1] != q or x.shape[1] != t:
            raise ValueError("inconsistent Y_k / W_k / X_k shapes")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(w)) and np.all(np.isfinite(x))):
            raise ValueError("observation contains NaN or Inf")
    if obs.cfg is not None:
        if obs.w[0].shape[0] != obs.cfg.N_r or obs.x[0].shape[0] != obs.cfg.N_t:
            raise ValueError("W_k / X_k row counts do not match the array sizes")
    if obs.noise_var < 0:
        raise ValueError("noise variance must be non-negative")
    return obs


def check_support(support, grid: GridSpec, level: int | None = None) -> np.ndarray:
    """Return ``support`` as a duplicate-free int array of in-range column indices."""
    if support is None:
        return np.zeros(0, dtype=int)
    s = np.asarray(support, dtype=int).reshape(-1)
    if s.size and (s.min() < 0 or s.max() >= grid.size(level)):
        raise ValueError("support index out of range")
    _, first = np.unique(s, return_index=True)
    return s[np.sort(first)]
