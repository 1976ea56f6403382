"""Dual-wideband sub-THz channel synthesis and frame-to-frame evolution."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .codebook import GridSpec, angles_to_cells, cells_to_angles, cells_to_index, upa_vector

SPEED_OF_LIGHT = 2.99792458e8
FREE_SPACE_IMPEDANCE = 377.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical-layer parameters. Arrays are given as ``(N_v, N_h)``."""

    f_c: float = 142e9
    bandwidth: float = 8e9
    n_subcarriers: int = 128
    n_rx: tuple = (8, 8)
    n_tx: tuple = (4, 4)
    n_paths: int = 4
    n_common: int = 3
    alpha_var: float | None = None
    tau_min: float = 45e-9
    tau_max: float = 55e-9
    frame_duration: float = 10e-3
    subframe_duration: float = 10e-6
    grid: GridSpec = field(default_factory=lambda: GridSpec(8, 4, 2))
    on_grid: bool = False
    gain_model: str = "approximate"
    absorption: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "n_rx", tuple(int(v) for v in self.n_rx))
        object.__setattr__(self, "n_tx", tuple(int(v) for v in self.n_tx))
        if isinstance(self.grid, dict):
            object.__setattr__(self, "grid", GridSpec(**self.grid))
        if self.n_subcarriers < 2:
            raise ValueError("need at least two subcarriers")
        if not 0 <= self.n_common <= self.n_paths or self.n_paths < 1:
            raise ValueError("need 0 <= L_cm <= L and L >= 1")
        if not 0 < self.bandwidth < 2 * self.f_c:
            raise ValueError("bandwidth must lie in (0, 2 f_c)")
        if self.tau_max < self.tau_min:
            raise ValueError("tau_max < tau_min")
        if self.gain_model not in ("approximate", "physical"):
            raise ValueError(f"unknown gain model {self.gain_model!r}")

    @property
    def N_r(self) -> int:
        return self.n_rx[0] * self.n_rx[1]

    @property
    def N_t(self) -> int:
        return self.n_tx[0] * self.n_tx[1]

    @property
    def sigma_alpha2(self) -> float:
        return 1.0 / self.n_paths if self.alpha_var is None else self.alpha_var

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    def delta(self, k):
        """Baseband frequency of 1-based subcarrier number ``k``."""
        k = np.asarray(k, dtype=float)
        return (k - (self.n_subcarriers + 1) / 2) * self.bandwidth / self.n_subcarriers

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_rx"], d["n_tx"] = list(self.n_rx), list(self.n_tx)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class PhysicalRecord:
    """Propagation details used by the physical gain model.

    ``refractive_index`` of ``None`` marks a line-of-sight path.
    """

    distance: float
    incidence: float = 0.0
    roughness: float = 0.0
    absorption: float = 0.0
    refractive_index: complex | None = None


@dataclass(frozen=True)
class ChannelPath:
    alpha: complex
    tau: float
    psi_hr: float
    psi_vr: float
    psi_ht: float
    psi_vt: float
    physical: PhysicalRecord | None = None

    def __post_init__(self):
        for name in ("psi_hr", "psi_vr", "psi_ht", "psi_vt"):
            v = getattr(self, name)
            if not -0.5 <= v < 0.5:
                raise ValueError(f"{name}={v} outside [-0.5, 0.5)")

    @property
    def angles(self) -> np.ndarray:
        """``(psi_ht, psi_vt, psi_hr, psi_vr)``."""
        return np.array([self.psi_ht, self.psi_vt, self.psi_hr, self.psi_vr])


@dataclass(frozen=True)
class ChannelRealization:
    frame: int
    paths: tuple
    gain_model: str = "approximate"

    def angles(self) -> np.ndarray:
        return np.array([p.angles for p in self.paths]).reshape(-1, 4)

    def support(self, grid: GridSpec, level: int | None = None) -> np.ndarray:
        """Sorted flat dictionary indices of the grid cells nearest each path."""
        dims = grid.dims(level)
        return np.unique(cells_to_index(angles_to_cells(self.angles(), dims), dims))

    def path_support(self, grid: GridSpec, level: int | None = None) -> np.ndarray:
        """Per-path flat index (may repeat when paths share a cell)."""
        dims = grid.dims(level)
        return cells_to_index(angles_to_cells(self.angles(), dims), dims)


def spreading_loss(delta, distance, cfg: SystemConfig) -> float:
    """Friis free-space attenuation at frequency ``f_c + delta``."""
    if np.any(np.asarray(distance) <= 0):
        raise ValueError("distance must be positive")
    f = cfg.f_c + np.asarray(delta, dtype=float)
    return (SPEED_OF_LIGHT / (4 * np.pi * f * distance)) ** 2


def absorption_loss(delta, distance, kappa, cfg: SystemConfig):
    """Molecular absorption ``exp(-D kappa(f))``; ``kappa`` is a constant or callable of f."""
    f = cfg.f_c + np.asarray(delta, dtype=float)
    k = kappa(f) if callable(kappa) else kappa
    return np.exp(-distance * np.asarray(k, dtype=float))


def reflection_coefficient(delta, incidence, impedance, roughness, cfg: SystemConfig):
    """Rough-surface Fresnel reflection coefficient.

    ``impedance`` is the material wave impedance, a constant or a callable of
    the absolute frequency.
    """
    if not 0 <= incidence < np.pi / 2:
        raise ValueError("incidence angle must lie in [0, pi/2)")
    f = cfg.f_c + np.asarray(delta, dtype=float)
    z = np.asarray(impedance(f) if callable(impedance) else impedance, dtype=complex)
    z0 = FREE_SPACE_IMPEDANCE
    sin_r = (z / z0) * np.sin(incidence)
    cos_r = np.sqrt(1 - sin_r**2 + 0j)
    cos_i = np.cos(incidence)
    fresnel = (z * cos_i - z0 * cos_r) / (z * cos_i + z0 * cos_r)
    rough = np.exp(-0.5 * (4 * np.pi * f * roughness * cos_i / SPEED_OF_LIGHT) ** 2)
    return fresnel * rough


def physical_gain2(path: ChannelPath, delta, cfg: SystemConfig):
    """``|chi|^2 L_spread L_abs`` for a path carrying a physical record."""
    rec = path.physical
    if rec is None:
        raise ValueError("physical gain model needs a PhysicalRecord on every path")
    if rec.refractive_index is None:
        chi2 = np.ones_like(np.asarray(delta, dtype=float))
    else:
        z = FREE_SPACE_IMPEDANCE / rec.refractive_index
        chi2 = np.abs(reflection_coefficient(delta, rec.incidence, z, rec.roughness, cfg)) ** 2
    return chi2 * spreading_loss(delta, rec.distance, cfg) * absorption_loss(
        delta, rec.distance, rec.absorption, cfg)


def path_coefficient(path: ChannelPath, delta, cfg: SystemConfig, model: str | None = None):
    """Baseband path coefficient ``alpha(delta)``."""
    model = model or cfg.gain_model
    delta = np.asarray(delta, dtype=float)
    if model == "approximate":
        return path.alpha / (1 + delta / cfg.f_c)
    if model == "physical":
        mag = np.sqrt(physical_gain2(path, delta, cfg))
        return mag * np.exp(-2j * np.pi * cfg.f_c * path.tau)
    raise ValueError(f"unknown gain model {model!r}")


def channel_matrices(realization: ChannelRealization, subcarriers, cfg: SystemConfig,
                     paths=None) -> np.ndarray:
    """Frequency responses ``H_k`` for 1-based subcarrier numbers, shape (n, N_r, N_t)."""
    ks = np.atleast_1d(np.asarray(subcarriers))
    deltas = cfg.delta(ks)
    out = np.zeros((ks.size, cfg.N_r, cfg.N_t), dtype=complex)
    scale = np.sqrt(cfg.N_r * cfg.N_t)
    paths = realization.paths if paths is None else paths
    for p in paths:
        gain = path_coefficient(p, deltas, cfg, realization.gain_model)
        gain = scale * gain * np.exp(-2j * np.pi * deltas * p.tau)
        for i, d in enumerate(deltas):
            b_r = upa_vector(cfg.n_rx[0], cfg.n_rx[1], p.psi_hr, p.psi_vr, d, cfg.f_c)
            b_t = upa_vector(cfg.n_tx[0], cfg.n_tx[1], p.psi_ht, p.psi_vt, d, cfg.f_c)
            out[i] += gain[i] * np.outer(b_r, b_t.conj())
    return out


def channel_matrix(realization: ChannelRealization, k: int, cfg: SystemConfig) -> np.ndarray:
    if not 1 <= k <= cfg.n_subcarriers:
        raise ValueError("subcarrier number out of range")
    return channel_matrices(realization, [k], cfg)[0]


def _draw_angles(rng, n, cfg: SystemConfig):
    """Spatial angles from uniform polar/azimuth priors at half-wavelength spacing."""
    polar = rng.uniform(-np.pi / 2, np.pi / 2, size=(n, 2))
    azim = rng.uniform(-np.pi, np.pi, size=(n, 2))
    psi_h = 0.5 * np.cos(azim) * np.sin(polar)
    psi_v = 0.5 * np.sin(azim) * np.sin(polar)
    # columns: (t, r) for each of h, v
    ang = np.stack([psi_h[:, 0], psi_v[:, 0], psi_h[:, 1], psi_v[:, 1]], axis=1)
    ang = np.where(ang >= 0.5, ang - 1.0, ang)
    if cfg.on_grid:
        dims = cfg.grid.dims()
        ang = cells_to_angles(angles_to_cells(ang, dims), dims)
    return ang


def draw_paths(rng, n: int, cfg: SystemConfig, first_is_los: bool = False) -> list:
    ang = _draw_angles(rng, n, cfg)
    tau = rng.uniform(cfg.tau_min, cfg.tau_max, size=n)
    alpha = np.sqrt(cfg.sigma_alpha2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    paths = []
    for i in range(n):
        rec = None
        if cfg.gain_model == "physical":
            los = first_is_los and i == 0
            rec = PhysicalRecord(
                distance=SPEED_OF_LIGHT * tau[i],
                incidence=float(rng.uniform(0, np.pi / 3)),
                roughness=0.0 if los else 0.088e-3,
                absorption=cfg.absorption,
                refractive_index=None if los else 2.24 - 0.025j,
            )
        paths.append(ChannelPath(alpha=complex(alpha[i]), tau=float(tau[i]),
                                 psi_ht=float(ang[i, 0]), psi_vt=float(ang[i, 1]),
                                 psi_hr=float(ang[i, 2]), psi_vr=float(ang[i, 3]),
                                 physical=rec))
    return paths


def draw_realization(cfg: SystemConfig, rng, frame: int = 0) -> ChannelRealization:
    """Fresh set of ``L`` paths drawn from the configured priors."""
    return ChannelRealization(frame=frame, paths=tuple(draw_paths(rng, cfg.n_paths, cfg, True)),
                              gain_model=cfg.gain_model)


def evolve(realization: ChannelRealization, cfg: SystemConfig, rng) -> ChannelRealization:
    """Next frame: keep ``L_cm`` paths at random, redraw the others."""
    n = len(realization.paths)
    keep = set(rng.choice(n, size=cfg.n_common, replace=False).tolist())
    fresh = iter(draw_paths(rng, n - len(keep), cfg))
    paths = tuple(p if i in keep else next(fresh) for i, p in enumerate(realization.paths))
    return replace(realization, frame=realization.frame + 1, paths=paths)


def _path_to_dict(p: ChannelPath) -> dict:
    d = asdict(p)
    d["alpha"] = [p.alpha.real, p.alpha.imag]
    if p.physical is not None and p.physical.refractive_index is not None:
        n = p.physical.refractive_index
        d["physical"]["refractive_index"] = [n.real, n.imag]
    return d


def _path_from_dict(d: dict) -> ChannelPath:
    d = dict(d)
    d["alpha"] = complex(*d["alpha"])
    if d.get("physical") is not None:
        rec = dict(d["physical"])
        if rec.get("refractive_index") is not None:
            rec["refractive_index"] = complex(*rec["refractive_index"])
        d["physical"] = PhysicalRecord(**rec)
    return ChannelPath(**d)


def save_realizations(path, realizations, cfg: SystemConfig, seed=None):
    doc = {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seed": seed,
        "frames": [
            {"frame": r.frame, "gain_model": r.gain_model,
             "paths": [_path_to_dict(p) for p in r.paths]}
            for r in realizations
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_realizations(path):
    """Return ``(cfg, realizations, seed)`` from a file written by :func:`save_realizations`."""
    with open(path) as fh:
        doc = json.load(fh)
    cfg = SystemConfig.from_dict(doc["config"])
    if doc.get("config_hash") not in (None, cfg.digest()):
        raise ValueError("config hash mismatch; file was edited or produced by another version")
    reals = [ChannelRealization(frame=f["frame"], gain_model=f["gain_model"],
                                paths=tuple(_path_from_dict(p) for p in f["paths"]))
             for f in doc["frames"]]
    return cfg, reals, doc.get("seed")
