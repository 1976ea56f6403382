"""Two-stage estimation: prior-aided LS followed by compressive sensing on the residual."""
from __future__ import annotations

import numpy as np

from .greedy import (SearchCounter, mmv_ls, mmv_somp, nonzero_union, residuals,
                     top_magnitude)
from .refine import per_pilot_ls, refine
from .result import EstimateResult, support_angles


def relative_residual(y, dicts, support, coef) -> float:
    total = sum(np.linalg.norm(yk) ** 2 for yk in y)
    if total == 0:
        return 0.0
    res = residuals(y, dicts, support, coef)
    return float(sum(np.linalg.norm(r) ** 2 for r in res) / total)


def finalize(y, dicts, cfg, support, do_refine: bool, diagnostics: dict) -> EstimateResult:
    """LS or refined coefficients on the final support, packed into a result."""
    support = np.asarray(support, dtype=int)
    if do_refine:
        coef, alpha, z = refine(y, dicts, support, cfg)
    else:
        coef, alpha, z = per_pilot_ls(y, dicts, support), None, None
    diagnostics["residual"] = relative_residual(y, dicts, support, coef)
    return EstimateResult(cfg=cfg, pilots=np.asarray(dicts.pilots), support=support,
                          angles=support_angles(support, dicts.grid), coef=coef, alpha=alpha,
                          z=z, squint=dicts.squint, diagnostics=diagnostics)


def two_stage_estimate(y, dicts, cfg, prior=(), n_paths: int = 4, n_common: int = 3,
                       multiplier: int = 4, somp_tol: float = 1e-3, somp_max_iter=None,
                       do_refine: bool = True) -> EstimateResult:
    """Prior-aided estimate; an empty ``prior`` gives plain hierarchical SOMP.

    ``somp_tol`` is relative to the mean per-pilot received energy.
    """
    counter = SearchCounter()
    gamma, z_ls = mmv_ls(y, dicts, prior, n_common)
    y_cs = residuals(y, dicts, gamma, z_ls)
    energy = float(np.mean([np.linalg.norm(yk) ** 2 for yk in y]))
    max_iter = 2 * n_paths if somp_max_iter is None else somp_max_iter
    upsilon, z_cs, history = mmv_somp(y_cs, dicts, somp_tol * energy, max_iter, counter)
    xi = nonzero_union([(gamma, z_ls), (upsilon, z_cs)], y)
    z_det = per_pilot_ls(y, dicts, xi)
    final = top_magnitude(xi, z_det, multiplier * n_paths)
    diag = {"iterations": len(upsilon), "searched": counter.n, "n_prior": len(gamma),
            "somp_history": history}
    return finalize(y, dicts, cfg, final, do_refine, diag)
