"""Angular grids, array responses, hierarchical codebooks and sensing dictionaries.

Angle tuples are ordered ``(psi_ht, psi_vt, psi_hr, psi_vr)``: horizontal and
vertical departure angles first, then arrival angles. All indices are
0-based. A dictionary column ``j`` maps to grid cells through
``j = i_t * G_r + i_r`` with ``i_r = i_hr * G_vr + i_vr`` and
``i_t = i_ht * G_vt + i_vt``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def steering_vector(n, psi, delta=0.0, f_c=1.0):
    """Array response of an ``n``-element uniform line at spatial angle ``psi``.

    ``psi`` may be an array; the result then has one column per angle.
    """
    psi_arr = np.asarray(psi, dtype=float)
    scale = 1.0 + delta / f_c
    idx = np.arange(n)[:, None]
    out = np.exp(-2j * np.pi * idx * scale * psi_arr.reshape(1, -1)) / np.sqrt(n)
    return out[:, 0] if psi_arr.ndim == 0 else out


def upa_vector(n_v, n_h, psi_h, psi_v, delta=0.0, f_c=1.0):
    """Planar-array response ``a_h(psi_h) kron a_v(psi_v)``."""
    a_h = np.atleast_2d(steering_vector(n_h, psi_h, delta, f_c).T).T
    a_v = np.atleast_2d(steering_vector(n_v, psi_v, delta, f_c).T).T
    if np.ndim(psi_h) == 0 and np.ndim(psi_v) == 0:
        return np.kron(a_h[:, 0], a_v[:, 0])
    a_h = a_h.reshape(n_h, -1)
    a_v = a_v.reshape(n_v, -1)
    return np.einsum("hi,vi->hvi", a_h, a_v).reshape(n_h * n_v, -1)


def uniform_grid(g: int) -> np.ndarray:
    """``g`` evenly spaced spatial angles centred in [-0.5, 0.5)."""
    if g < 1:
        raise ValueError("grid size must be >= 1")
    i = np.arange(1, g + 1)
    return (i - (g + 1) / 2) / g


def wrap_angle(psi):
    """Map spatial angles into [-0.5, 0.5) modulo 1."""
    return (np.asarray(psi, dtype=float) + 0.5) % 1.0 - 0.5


def hierarchical_subcodebook(level: int, parent: float, g_sub: int) -> np.ndarray:
    """Codewords of the ``level``-th sub-codebook around the parent pick.

    Level 1 uses ``parent = 0``. Codewords falling outside [-0.5, 0.5) are
    wrapped.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    i = np.arange(1, g_sub + 1)
    return wrap_angle(parent + (i - (g_sub + 1) / 2) / g_sub**level)


def hierarchical_children(parent_index: int, g_sub: int) -> np.ndarray:
    """Grid indices at level ``m`` that refine cell ``parent_index`` at ``m - 1``."""
    return parent_index * g_sub + np.arange(g_sub)


def array_response_matrix(n_v, n_h, g_h, g_v, delta=0.0, f_c=1.0):
    """Columns are UPA vectors over the ``g_h x g_v`` grid, ``i = i_h * g_v + i_v``."""
    psi_h = np.repeat(uniform_grid(g_h), g_v)
    psi_v = np.tile(uniform_grid(g_v), g_h)
    return upa_vector(n_v, n_h, psi_h, psi_v, delta, f_c)


def beam_pattern(w, n, psi, psi_i, delta=0.0, f_c=1.0):
    """Correlation ``(W^H a(psi))^H W^H a(psi_i)``; ``psi`` may be an array."""
    w = np.asarray(w)
    wa = w.conj().T @ steering_vector(n, psi, delta, f_c)
    wai = w.conj().T @ steering_vector(n, psi_i, delta, f_c)
    if wa.ndim == 2:
        return wa.conj().T @ wai
    return np.vdot(wa, wai)


@dataclass(frozen=True)
class GridSpec:
    """Hierarchical grid: ``g_sub ** levels`` points per spatial dimension."""

    g_sub_r: int
    g_sub_t: int
    levels: int = 1

    def __post_init__(self):
        if min(self.g_sub_r, self.g_sub_t, self.levels) < 1:
            raise ValueError("grid parameters must be >= 1")

    def dims(self, level: int | None = None):
        """Per-dimension sizes ``(G_ht, G_vt, G_hr, G_vr)`` at ``level``."""
        m = self.levels if level is None else level
        gt, gr = self.g_sub_t**m, self.g_sub_r**m
        return gt, gt, gr, gr

    def size(self, level: int | None = None) -> int:
        return int(np.prod(self.dims(level)))

    def exhaustive_count(self) -> int:
        return self.size(self.levels)

    def sequential_count(self) -> int:
        """Candidate tuples visited by one coarse-plus-sequential search."""
        return self.size(1) + 2 * (self.levels - 1) * (self.g_sub_t + self.g_sub_r)

    def validate_coverage(self, n_r, n_t):
        """Check each first-level sub-codebook is at least as fine as the beamwidth."""
        (n_vr, n_hr), (n_vt, n_ht) = n_r, n_t
        if self.g_sub_r < max(n_vr, n_hr) or self.g_sub_t < max(n_vt, n_ht):
            raise ValueError("g_sub must be >= antennas per dimension for beam coverage")


def index_to_cells(j, dims):
    """Flat column index -> per-dimension cells ``(i_ht, i_vt, i_hr, i_vr)``."""
    g_ht, g_vt, g_hr, g_vr = dims
    j = np.asarray(j)
    g_r = g_hr * g_vr
    i_t, i_r = np.divmod(j, g_r)
    i_ht, i_vt = np.divmod(i_t, g_vt)
    i_hr, i_vr = np.divmod(i_r, g_vr)
    return np.stack([i_ht, i_vt, i_hr, i_vr], axis=-1)


def cells_to_index(cells, dims):
    g_ht, g_vt, g_hr, g_vr = dims
    c = np.asarray(cells)
    i_r = c[..., 2] * g_vr + c[..., 3]
    i_t = c[..., 0] * g_vt + c[..., 1]
    return i_t * (g_hr * g_vr) + i_r


def cells_to_angles(cells, dims):
    c = np.asarray(cells, dtype=float)
    g = np.asarray(dims, dtype=float)
    return (c + 0.5) / g - 0.5


def angles_to_cells(angles, dims):
    """Nearest grid cell per dimension."""
    a = wrap_angle(angles)
    g = np.asarray(dims)
    return np.clip(np.floor((a + 0.5) * g).astype(int), 0, g - 1)


def parent_cells(cells, grid: GridSpec, from_level: int, to_level: int = 1):
    """Ancestor cells at a coarser level of the hierarchy."""
    c = np.asarray(cells)
    shift = from_level - to_level
    div = np.array([grid.g_sub_t, grid.g_sub_t, grid.g_sub_r, grid.g_sub_r]) ** shift
    return c // div


@dataclass
class DictionarySet:
    """Per-pilot sensing dictionaries built from frequency-dependent array responses.

    Only the first-level dictionary is materialized; atoms on finer levels
    are generated on demand by :meth:`atoms`.
    """

    n_r: tuple
    n_t: tuple
    f_c: float
    deltas: np.ndarray
    pilots: np.ndarray
    w: list
    x: list
    grid: GridSpec
    squint: bool = True
    _d1: list = field(default_factory=list, repr=False)
    _c1: list = field(default_factory=list, repr=False)
    _theta1: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n_vr, n_hr = self.n_r
        n_vt, n_ht = self.n_t
        g_ht, g_vt, g_hr, g_vr = self.grid.dims(1)
        for k in range(len(self.pilots)):
            dk = self._eff_delta(k)
            a_r = array_response_matrix(n_vr, n_hr, g_hr, g_vr, dk, self.f_c)
            a_t = array_response_matrix(n_vt, n_ht, g_ht, g_vt, dk, self.f_c)
            self._d1.append(self.w[k].conj().T @ a_r)
            self._c1.append(self.x[k].T @ a_t.conj())

    def _eff_delta(self, k):
        return float(self.deltas[k]) if self.squint else 0.0

    @property
    def n_pilots(self) -> int:
        return len(self.pilots)

    @property
    def n_meas(self) -> int:
        return self.w[0].shape[1] * self.x[0].shape[1]

    def theta1(self, k: int) -> np.ndarray:
        """Materialized first-level dictionary for pilot position ``k``."""
        if k not in self._theta1:
            self._theta1[k] = np.kron(self._c1[k], self._d1[k])
        return self._theta1[k]

    def correlate1(self, residuals) -> np.ndarray:
        """``sum_k |Theta1_k^H r_k|^2`` for every first-level column."""
        total = 0.0
        q = self.w[0].shape[1]
        for k, r in enumerate(residuals):
            rm = np.asarray(r).reshape(q, -1, order="F")
            c = self._d1[k].conj().T @ rm @ self._c1[k].conj()
            total = total + np.abs(c.reshape(-1, order="F")) ** 2
        return total

    def atoms(self, angles, k: int) -> np.ndarray:
        """Dictionary columns for arbitrary angle tuples on pilot position ``k``."""
        ang = np.atleast_2d(np.asarray(angles, dtype=float))
        n_vr, n_hr = self.n_r
        n_vt, n_ht = self.n_t
        dk = self._eff_delta(k)
        b_t = upa_vector(n_vt, n_ht, ang[:, 0], ang[:, 1], dk, self.f_c)
        b_r = upa_vector(n_vr, n_hr, ang[:, 2], ang[:, 3], dk, self.f_c)
        pr = self.w[k].conj().T @ b_r
        pt = self.x[k].T @ b_t.conj()
        q, t = pr.shape[0], pt.shape[0]
        return np.einsum("ti,qi->tqi", pt, pr).reshape(t * q, -1)

    def columns(self, indices, k: int, level: int | None = None) -> np.ndarray:
        level = self.grid.levels if level is None else level
        idx = np.asarray(indices, dtype=int).reshape(-1)
        if idx.size == 0:
            return np.zeros((self.n_meas, 0), dtype=complex)
        if level == 1:
            return self.theta1(k)[:, idx]
        dims = self.grid.dims(level)
        return self.atoms(cells_to_angles(index_to_cells(idx, dims), dims), k)

    def correlate_angles(self, angles, residuals) -> np.ndarray:
        """``sum_k |u_k(angles)^H r_k|^2`` for each angle tuple."""
        total = 0.0
        for k, r in enumerate(residuals):
            total = total + np.abs(self.atoms(angles, k).conj().T @ r) ** 2
        return total


def build_dictionaries(cfg, grid: GridSpec, w, x, pilots, squint: bool = True) -> DictionarySet:
    """Assemble the per-pilot dictionaries for configuration ``cfg``."""
    pilots = np.asarray(pilots, dtype=int)
    if len(w) != len(pilots) or len(x) != len(pilots):
        raise ValueError("need one W and one X per pilot subcarrier")
    n_r, n_t = cfg.n_rx, cfg.n_tx
    for wk, xk in zip(w, x):
        if wk.shape[0] != cfg.N_r or xk.shape[0] != cfg.N_t:
            raise ValueError("W_k must be N_r x Q_p and X_k must be N_t x T_p")
        if wk.shape[1] != w[0].shape[1] or xk.shape[1] != x[0].shape[1]:
            raise ValueError("all pilots must share Q_p and T_p")
    return DictionarySet(n_r=n_r, n_t=n_t, f_c=cfg.f_c, deltas=cfg.delta(pilots),
                         pilots=pilots, w=list(w), x=list(x), grid=grid, squint=squint)
