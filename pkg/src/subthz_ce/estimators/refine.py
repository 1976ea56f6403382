"""Delay and gain refinement across pilot subcarriers."""
from __future__ import annotations

import numpy as np

from ..numerics import least_squares


def per_pilot_ls(y, dicts, support, level=None) -> np.ndarray:
    """LS beamspace coefficients on ``support`` for every pilot, shape ``(K_p, n)``."""
    out = np.zeros((len(y), len(support)), dtype=complex)
    if len(support) == 0:
        return out
    for k, yk in enumerate(y):
        out[k] = least_squares(dicts.columns(support, k, level), yk)
    return out


def delay_phasors(coef, pilots, cfg, floor: float = 1e-12, unit_modulus: bool = True,
                  branch: str = "aligned"):
    """Per-path delay phasor from gain-corrected ratios of consecutive pilots.

    Each ratio spans ``k_i - k_{i-1}`` subcarriers, so a root of that order is
    one estimate of the phasor. ``branch="principal"`` averages principal
    roots; ``"aligned"`` first rotates every root onto the branch nearest the
    first one, which keeps the average meaningful when delays alias and the
    ratio phases straddle the branch cut. Ratios with a vanishing
    denominator are skipped; a path with no usable ratio gets a phasor of 1.
    """
    if branch not in ("aligned", "principal"):
        raise ValueError(f"unknown branch rule {branch!r}")
    pilots = np.asarray(pilots)
    corr = coef * (1 + cfg.delta(pilots) / cfg.f_c)[:, None]
    steps = np.diff(pilots)
    z = np.ones(coef.shape[1], dtype=complex)
    for j in range(coef.shape[1]):
        num, den = corr[1:, j], corr[:-1, j]
        ok = np.abs(den) > floor * max(np.abs(corr[:, j]).max(), floor)
        ok &= np.abs(num) > 0
        if not ok.any():
            continue
        ratio = num[ok] / den[ok]
        step = steps[ok]
        roots = np.abs(ratio) ** (1 / step) * np.exp(1j * np.angle(ratio) / step)
        if branch == "aligned":
            # nearest of the step-th roots of unity times each root to roots[0]
            turns = np.round(np.angle(roots[0] / roots) * step / (2 * np.pi))
            roots = roots * np.exp(2j * np.pi * turns / step)
        zj = roots.mean()
        if unit_modulus and abs(zj) > 0:
            zj = zj / abs(zj)
        z[j] = zj
    return z


def fit_gains(coef, z, pilots, cfg) -> np.ndarray:
    """LS path gains given the delay phasors."""
    pilots = np.asarray(pilots)
    scale = np.sqrt(cfg.N_r * cfg.N_t) / (1 + cfg.delta(pilots) / cfg.f_c)
    expo = pilots - (cfg.n_subcarriers + 1) / 2
    alpha = np.zeros(coef.shape[1], dtype=complex)
    for j in range(coef.shape[1]):
        c = (scale * z[j] ** expo)[:, None]
        alpha[j] = least_squares(c, coef[:, j])[0]
    return alpha


def refine(y, dicts, support, cfg, unit_modulus: bool = True, branch: str = "aligned"):
    """Refined ``(coef, alpha, z)`` for the paths on ``support``.

    With a single pilot there is no ratio to form; ``alpha`` and ``z`` are
    then ``None`` and callers fall back to the per-pilot coefficients.
    """
    coef = per_pilot_ls(y, dicts, support)
    if len(dicts.pilots) < 2 or len(support) == 0:
        return coef, None, None
    z = delay_phasors(coef, dicts.pilots, cfg, unit_modulus=unit_modulus, branch=branch)
    alpha = fit_gains(coef, z, dicts.pilots, cfg)
    return coef, alpha, z
