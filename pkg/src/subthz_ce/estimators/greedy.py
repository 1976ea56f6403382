"""Greedy support recovery: prior-aided LS selection, SOMP and hierarchical search."""
from __future__ import annotations

import logging

import numpy as np

from ..codebook import cells_to_index, index_to_cells
from ..numerics import least_squares
from .refine import per_pilot_ls

log = logging.getLogger(__name__)


class SearchCounter:
    """Counts angle tuples evaluated by the support searches."""

    def __init__(self):
        self.n = 0

    def add(self, n: int):
        self.n += int(n)


def residuals(y, dicts, support, coef, level=None) -> list:
    if len(support) == 0:
        return [yk.copy() for yk in y]
    return [yk - dicts.columns(support, k, level) @ coef[k] for k, yk in enumerate(y)]


def sequential_search(res, dicts, start=None, counter: SearchCounter | None = None,
                      exclude1=()):
    """Locate the best finest-level atom for the residuals ``res``.

    ``start`` is a first-level column; when omitted the full first-level
    grid is scanned (skipping ``exclude1``). Each finer level then sweeps one
    angular dimension at a time through the children of the current cell,
    holding the others fixed.
    """
    grid = dicts.grid
    if start is None:
        corr = dicts.correlate1(res)
        if len(exclude1):
            corr = corr.copy()
            corr[np.asarray(exclude1, dtype=int)] = -np.inf
        start = int(np.argmax(corr))
        if counter is not None:
            counter.add(grid.size(1))
    cells = index_to_cells(int(start), grid.dims(1)).astype(int)
    g_sub = np.array([grid.g_sub_t, grid.g_sub_t, grid.g_sub_r, grid.g_sub_r])
    level = np.ones(4, dtype=int)
    for m in range(2, grid.levels + 1):
        for d in range(4):
            cand = cells[d] * g_sub[d] + np.arange(g_sub[d])
            sizes = g_sub.astype(float) ** level
            angles = np.tile((cells + 0.5) / sizes - 0.5, (g_sub[d], 1))
            angles[:, d] = (cand + 0.5) / g_sub[d] ** m - 0.5
            score = dicts.correlate_angles(angles, res)
            if counter is not None:
                counter.add(g_sub[d])
            cells[d] = cand[int(np.argmax(score))]
            level[d] = m
    return int(cells_to_index(cells, grid.dims())), int(start)


def mmv_ls(y, dicts, prior, n_select: int):
    """Pick up to ``n_select`` prior columns, each minimizing the joint LS residual.

    Returns the chosen indices (in pick order) and their per-pilot LS
    coefficients, shape ``(K_p, n)``.
    """
    prior = [int(j) for j in prior]
    chosen: list = []
    cols = {j: [dicts.columns([j], k)[:, 0] for k in range(len(y))] for j in prior}
    while len(chosen) < n_select:
        cand = sorted(set(prior) - set(chosen))
        if not cand:
            break
        costs = []
        for j in cand:
            cost = 0.0
            for k, yk in enumerate(y):
                a = np.column_stack([cols[i][k] for i in chosen + [j]])
                cost += np.linalg.norm(yk - a @ least_squares(a, yk)) ** 2
            costs.append(cost)
        chosen.append(cand[int(np.argmin(costs))])
    return np.array(chosen, dtype=int), per_pilot_ls(y, dicts, chosen)


def mmv_somp(y, dicts, tol: float, max_iter: int, counter: SearchCounter | None = None,
             hierarchical: bool = True):
    """Simultaneous OMP over all pilots, with hierarchical atom selection.

    Stops after ``max_iter`` picks or once the mean per-pilot change of the
    residual energy drops to ``tol``.
    """
    chosen: list = []
    coef = np.zeros((len(y), 0), dtype=complex)
    res = [yk.copy() for yk in y]
    history = []
    change = np.inf
    while change > tol and len(chosen) < max_iter:
        if hierarchical:
            j, _ = sequential_search(res, dicts, counter=counter)
        else:
            corr = dicts.correlate1(res)
            if counter is not None:
                counter.add(corr.size)
            j = int(np.argmax(corr))
        if j in chosen:
            log.debug("SOMP stalled after %d picks: atom %d already selected", len(chosen), j)
            break
        chosen.append(j)
        coef = per_pilot_ls(y, dicts, chosen)
        new = residuals(y, dicts, chosen, coef)
        change = float(np.mean([np.linalg.norm(a - b) ** 2 for a, b in zip(new, res)]))
        res = new
        history.append(float(sum(np.linalg.norm(r) ** 2 for r in res)))
    return np.array(chosen, dtype=int), coef, history


def nonzero_union(parts, y, floor: float = 1e-12):
    """Union of supports whose mean coefficient magnitude exceeds ``floor``."""
    keep: list = []
    for support, coef in parts:
        mag = np.abs(coef).mean(axis=0) if coef.size else np.zeros(0)
        for j, m in zip(support, mag):
            if m > floor and int(j) not in keep:
                keep.append(int(j))
    return np.array(keep, dtype=int)


def top_magnitude(support, coef, n: int):
    """Keep the ``n`` columns with the largest mean magnitude; ties go to the lower index."""
    support = np.asarray(support, dtype=int)
    if support.size <= n:
        return np.sort(support)
    mag = np.abs(coef).mean(axis=0)
    order = np.lexsort((support, -mag))
    return np.sort(support[order[:n]])
