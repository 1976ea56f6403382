"""Container for an estimate and channel reconstruction from it."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import SystemConfig
from ..codebook import cells_to_angles, index_to_cells, upa_vector


@dataclass
class EstimateResult:
    """Sparse beamspace estimate on the finest grid level.

    ``coef`` holds the per-pilot beamspace coefficients (one row per pilot
    subcarrier). When ``alpha`` and ``z`` are set the estimate is
    parametric and can be evaluated on any subcarrier.
    """

    cfg: SystemConfig
    pilots: np.ndarray
    support: np.ndarray
    angles: np.ndarray
    coef: np.ndarray
    alpha: np.ndarray | None = None
    z: np.ndarray | None = None
    squint: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def refined(self) -> bool:
        return self.alpha is not None

    @property
    def tau(self) -> np.ndarray | None:
        if self.z is None:
            return None
        cfg = self.cfg
        return -cfg.n_subcarriers / (2 * np.pi * cfg.bandwidth) * np.angle(self.z)

    def gains(self, subcarriers) -> np.ndarray:
        """Beamspace gains per requested subcarrier, shape ``(n_sub, n_paths)``."""
        ks = np.atleast_1d(np.asarray(subcarriers, dtype=int))
        if self.refined:
            cfg = self.cfg
            scale = np.sqrt(cfg.N_r * cfg.N_t) / (1 + cfg.delta(ks) / cfg.f_c)
            expo = ks - (cfg.n_subcarriers + 1) / 2
            return scale[:, None] * self.alpha[None, :] * self.z[None, :] ** expo[:, None]
        nearest = np.abs(ks[:, None] - np.asarray(self.pilots)[None, :]).argmin(axis=1)
        return self.coef[nearest]

    def channels(self, subcarriers=None) -> np.ndarray:
        """Reconstructed ``H_k``, shape ``(n_sub, N_r, N_t)``; defaults to the pilots."""
        cfg = self.cfg
        ks = np.asarray(self.pilots if subcarriers is None else subcarriers, dtype=int).reshape(-1)
        out = np.zeros((ks.size, cfg.N_r, cfg.N_t), dtype=complex)
        if self.support.size == 0:
            return out
        g = self.gains(ks)
        a = self.angles
        deltas = cfg.delta(ks) if self.squint else np.zeros(ks.size)
        for i, d in enumerate(deltas):
            b_r = upa_vector(cfg.n_rx[0], cfg.n_rx[1], a[:, 2], a[:, 3], d, cfg.f_c)
            b_t = upa_vector(cfg.n_tx[0], cfg.n_tx[1], a[:, 0], a[:, 1], d, cfg.f_c)
            out[i] = (b_r * g[i]) @ b_t.conj().T
        return out


def support_angles(support, grid, level=None) -> np.ndarray:
    dims = grid.dims(level)
    return cells_to_angles(index_to_cells(np.asarray(support, dtype=int), dims), dims).reshape(-1, 4)
