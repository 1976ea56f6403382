"""Oracle least-squares estimate on the true paths."""
from __future__ import annotations

import numpy as np

from ..numerics import least_squares
from .refine import delay_phasors, fit_gains
from .result import EstimateResult
from .twostage import finalize


def genie_estimate(y, dicts, cfg, realization, angles: str = "exact",
                   do_refine: bool = False) -> EstimateResult:
    """LS given the true path directions.

    ``angles="exact"`` fits atoms at the true continuous angles (a lower
    bound for any grid-based estimator); ``"grid"`` fits the level-M grid
    cells nearest to them. Squint handling follows ``dicts``: a squint-free
    dictionary set ignores the spatial-wideband effect in both fitting and
    reconstruction.
    """
    if angles == "grid":
        support = realization.support(dicts.grid)
        return finalize(y, dicts, cfg, support, do_refine, {"iterations": 0, "searched": 0})
    if angles != "exact":
        raise ValueError(f"unknown genie angle mode {angles!r}")
    ang = realization.angles()
    coef = np.zeros((len(y), len(ang)), dtype=complex)
    energy = res = 0.0
    for k, yk in enumerate(y):
        a = dicts.atoms(ang, k)
        coef[k] = least_squares(a, yk)
        res += np.linalg.norm(yk - a @ coef[k]) ** 2
        energy += np.linalg.norm(yk) ** 2
    alpha = z = None
    if do_refine and len(y) > 1:
        z = delay_phasors(coef, dicts.pilots, cfg)
        alpha = fit_gains(coef, z, dicts.pilots, cfg)
    diag = {"iterations": 0, "searched": 0, "residual": float(res / energy) if energy else 0.0}
    return EstimateResult(cfg=cfg, pilots=np.asarray(dicts.pilots),
                          support=realization.path_support(dicts.grid), angles=ang, coef=coef,
                          alpha=alpha, z=z, squint=dicts.squint, diagnostics=diag)
