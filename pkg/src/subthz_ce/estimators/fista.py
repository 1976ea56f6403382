"""Accelerated proximal gradient with a prior-weighted group-sparse penalty."""
from __future__ import annotations

import logging

import numpy as np

from ..codebook import index_to_cells, cells_to_index, parent_cells
from .greedy import SearchCounter, sequential_search
from .twostage import finalize
from ..numerics import least_squares

log = logging.getLogger(__name__)


def group_weights(n_groups: int, prior1, lam: float, n_paths: int, n_common: int) -> np.ndarray:
    """Per-group penalty weight: looser on the prior cells, tighter elsewhere."""
    lam1 = lam / np.sqrt(n_common) if n_common > 0 else np.inf
    lam2 = lam / np.sqrt(n_paths - n_common) if n_paths > n_common else np.inf
    wts = np.full(n_groups, lam2)
    wts[np.asarray(prior1, dtype=int)] = lam1
    return wts


def mixed_norm(x, m: int, n: int) -> float:
    """l2/l1 norm of a stacked vector: ``n`` blocks of length ``m``.

    Entry ``i`` of block ``g`` sits at ``i + g*m``; the group of entry ``i``
    collects that position across all blocks.
    """
    x = np.asarray(x).reshape(-1)
    if x.size != m * n:
        raise ValueError(f"expected length {m * n}, got {x.size}")
    return float(np.linalg.norm(x.reshape(n, m), axis=0).sum())


def weighted_group_norm(x, weights) -> float:
    """``sum_g w_g ||x[:, g]||_2``; zero groups cost nothing even at infinite weight."""
    norms = np.linalg.norm(x, axis=0)
    nz = norms > 0
    return float(np.sum(weights[nz] * norms[nz]))


def group_prox(v, thresholds) -> np.ndarray:
    """Block soft thresholding of each column of ``v``."""
    norms = np.linalg.norm(v, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(norms > thresholds, 1 - thresholds / np.where(norms > 0, norms, 1), 0.0)
    return v * shrink


class StackedLS:
    """Block-diagonal least-squares term ``0.5 sum_k ||y_k - A_k x_k||^2``."""

    def __init__(self, mats, y):
        self.a = np.stack(mats)
        self.ah = np.conj(np.transpose(self.a, (0, 2, 1)))
        self.y = np.stack(y)

    def forward(self, x):
        return (self.a @ x[:, :, None])[:, :, 0]

    def value(self, x) -> float:
        return 0.5 * float(np.sum(np.abs(self.forward(x) - self.y) ** 2))

    def gradient(self, x, ax=None):
        r = (self.forward(x) if ax is None else ax) - self.y
        return (self.ah @ r[:, :, None])[:, :, 0]

    def lipschitz(self) -> float:
        gram = self.a @ self.ah
        return float(max(np.linalg.eigvalsh(g)[-1] for g in gram))


class KroneckerLS(StackedLS):
    """Same objective for ``A_k = kron(C_k, D_k)``, applied without forming ``A_k``.

    ``x_k`` is the column-major vectorization of a ``(G_r, G_t)`` matrix, so
    ``A_k x_k = vec(D_k X_k C_k^T)``.
    """

    def __init__(self, c, d, y):
        self.c = np.stack(c)
        self.d = np.stack(d)
        self.dh = np.conj(np.transpose(self.d, (0, 2, 1)))
        self.y = np.stack(y)
        self.shape = (self.d.shape[2], self.c.shape[2])

    @property
    def n_groups(self) -> int:
        return self.shape[0] * self.shape[1]

    def _mat(self, x):
        return x.reshape(x.shape[0], self.shape[1], self.shape[0]).transpose(0, 2, 1)

    def forward(self, x):
        m = self.d @ self._mat(x) @ np.transpose(self.c, (0, 2, 1))
        return m.transpose(0, 2, 1).reshape(x.shape[0], -1)

    def gradient(self, x, ax=None):
        r = (self.forward(x) if ax is None else ax) - self.y
        q = self.d.shape[1]
        rm = r.reshape(r.shape[0], -1, q).transpose(0, 2, 1)
        g = self.dh @ rm @ np.conj(self.c)
        return g.transpose(0, 2, 1).reshape(r.shape[0], -1)

    def lipschitz(self) -> float:
        return float(max(np.linalg.norm(ck, 2) ** 2 * np.linalg.norm(dk, 2) ** 2
                         for ck, dk in zip(self.c, self.d)))


def next_momentum(t: float) -> float:
    """Nesterov step-size sequence ``t_{i+1} = (1 + sqrt(1 + 4 t_i^2)) / 2``."""
    return (1 + np.sqrt(1 + 4 * t * t)) / 2


def fista(problem: StackedLS, weights, step=None, tol: float = 1e-6, max_iter: int = 500, x0=None):
    """Minimize ``problem.value(x) + weighted_group_norm(x, weights)``.

    Stops when the objective changes by less than ``tol`` times its
    starting value. Returns the solution, iteration count and objective trace.
    """
    eta = problem.lipschitz() if step is None else 1.0 / step
    n = len(weights)
    x = np.zeros((problem.y.shape[0], n), dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    ax = problem.forward(x)
    v, av, t = x, ax, 1.0
    f_prev = 0.5 * float(np.sum(np.abs(ax - problem.y) ** 2)) + weighted_group_norm(x, weights)
    eps = tol * f_prev
    trace = [f_prev]
    it = 0
    for it in range(1, max_iter + 1):
        x_new = group_prox(v - problem.gradient(v, av) / eta, weights / eta)
        ax_new = problem.forward(x_new)
        t_new = next_momentum(t)
        beta = (t - 1) / t_new
        v = x_new + beta * (x_new - x)
        av = ax_new + beta * (ax_new - ax)
        x, ax, t = x_new, ax_new, t_new
        f = 0.5 * float(np.sum(np.abs(ax - problem.y) ** 2)) + weighted_group_norm(x, weights)
        trace.append(f)
        if abs(f - f_prev) < eps:
            break
        f_prev = f
    return x, it, trace


def default_lambda(dicts, noise_var: float, n_groups: int, scale: float = 1.0) -> float:
    """Noise-level weight for the group correlations ``||Theta_g^H y||``.

    A group stays at zero while its correlation is below its weight. Under
    noise only, the squared correlation of group ``g`` is a scaled
    chi-square with ``K_p`` complex degrees of freedom and mean ``E_g``; the
    weight is the square root of a Laurent-Massart bound on the largest of
    ``G`` such variables, using the average ``E_g``.
    """
    energy = 0.0
    for k in range(dicts.n_pilots):
        wd = dicts.w[k] @ dicts._d1[k]
        energy += (np.mean(np.linalg.norm(dicts._c1[k], axis=0) ** 2)
                   * np.mean(np.linalg.norm(wd, axis=0) ** 2))
    t = np.log(max(n_groups, 2))
    kp = dicts.n_pilots
    return float(scale * np.sqrt(noise_var * energy * (1 + np.sqrt(2 * t / kp) + t / kp)))


def mfista_estimate(y, dicts, cfg, noise_var: float, prior=(), n_paths: int = 4,
                    n_common: int = 3, multiplier: int = 4, lam=None, lam_scale: float = 1.0,
                    tol: float = 1e-6, max_iter: int = 500, do_refine: bool = True):
    """Group-sparse recovery on the coarse grid, then greedy hierarchical refinement."""
    grid = dicts.grid
    g1 = grid.size(1)
    prior = np.asarray(prior, dtype=int)
    if prior.size:
        cells = parent_cells(index_to_cells(prior, grid.dims()), grid, grid.levels, 1)
        prior1 = np.unique(cells_to_index(cells, grid.dims(1)))
    else:
        prior1 = np.zeros(0, dtype=int)
    if lam is None:
        lam = default_lambda(dicts, noise_var, g1, lam_scale)
    weights = group_weights(g1, prior1, lam, n_paths, n_common)
    problem = KroneckerLS(dicts._c1, dicts._d1, y)
    x, n_iter, trace = fista(problem, weights, tol=tol, max_iter=max_iter)
    active = np.flatnonzero(np.abs(x).mean(axis=0) > 1e-12)

    counter = SearchCounter()
    n_keep = multiplier * n_paths
    res = [yk.copy() for yk in y]
    picked1: list = []
    found: list = []
    cols: list = [[] for _ in y]
    while len(picked1) < n_keep:
        cand = np.setdiff1d(active, picked1)
        if cand.size == 0:
            log.debug("only %d active first-level groups for %d picks", active.size, n_keep)
            break
        corr = dicts.correlate1(res)[cand]
        j1 = int(cand[np.argmax(corr)])
        picked1.append(j1)
        j, _ = sequential_search(res, dicts, start=j1, counter=counter)
        if j in found:
            continue
        found.append(j)
        for k, yk in enumerate(y):
            cols[k].append(dicts.columns([j], k)[:, 0])
            a = np.column_stack(cols[k])
            res[k] = yk - a @ least_squares(a, yk)
    diag = {"iterations": n_iter, "searched": counter.n, "n_active": int(active.size),
            "converged": n_iter < max_iter, "early_exit": len(picked1) < n_keep,
            "lambda": float(lam), "objective": trace}
    return finalize(y, dicts, cfg, np.array(found, dtype=int), do_refine, diag)
