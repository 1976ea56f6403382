"""Estimator classes with a fit/predict interface."""
from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..codebook import build_dictionaries
from ..validation import check_observation, check_support
from .fista import mfista_estimate
from .genie import genie_estimate
from .twostage import two_stage_estimate


class ChannelEstimator(BaseEstimator):
    """Common fit/predict plumbing.

    ``fit`` takes an :class:`~subthz_ce.training.Observation` (which carries
    its system configuration) and an optional previous-frame support.
    """

    squint = True

    def _dicts(self, obs):
        cfg = obs.cfg
        return build_dictionaries(cfg, cfg.grid, obs.w, obs.x, obs.pilots, squint=self.squint)

    def _estimate(self, obs, dicts, prior):
        raise NotImplementedError

    def fit(self, obs, prior_support=None):
        check_observation(obs)
        prior = check_support(prior_support, obs.cfg.grid)
        start = time.perf_counter()
        result = self._estimate(obs, self._dicts(obs), prior)
        result.diagnostics["runtime"] = time.perf_counter() - start
        self.result_ = result
        self.support_ = result.support
        self.n_iter_ = result.diagnostics.get("iterations", 0)
        self.residual_ = result.diagnostics["residual"]
        return self

    def predict(self, subcarriers=None) -> np.ndarray:
        """Channel estimates on ``subcarriers`` (1-based); defaults to the pilots."""
        check_is_fitted(self, "result_")
        return self.result_.channels(subcarriers)

    def score(self, channels, subcarriers=None) -> float:
        """``1 - NMSE`` against the true channels on ``subcarriers``."""
        h = np.asarray(channels)
        est = self.predict(subcarriers)
        return 1.0 - float(np.sum(np.abs(h - est) ** 2) / np.sum(np.abs(h) ** 2))


class TwoStageEstimator(ChannelEstimator):
    """LS on the tracked support, then SOMP with hierarchical search on the residual."""

    def __init__(self, n_paths=4, n_common=3, multiplier=4, somp_tol=1e-3, somp_max_iter=None,
                 refine=True, squint=True):
        self.n_paths = n_paths
        self.n_common = n_common
        self.multiplier = multiplier
        self.somp_tol = somp_tol
        self.somp_max_iter = somp_max_iter
        self.refine = refine
        self.squint = squint

    def _check(self):
        if not self.n_paths >= self.n_common >= 0 or self.multiplier * self.n_paths < self.n_paths:
            raise ValueError("need multiplier*L >= L >= L_cm >= 0")

    def _estimate(self, obs, dicts, prior):
        self._check()
        return two_stage_estimate(obs.vectors(), dicts, obs.cfg, prior, self.n_paths,
                                  self.n_common, self.multiplier, self.somp_tol,
                                  self.somp_max_iter, self.refine)


class GSOMPEstimator(TwoStageEstimator):
    """SOMP over the frequency-dependent dictionaries; ignores any prior support."""

    def __init__(self, n_paths=4, multiplier=4, somp_tol=1e-3, somp_max_iter=None, refine=True,
                 squint=True):
        super().__init__(n_paths=n_paths, n_common=0, multiplier=multiplier, somp_tol=somp_tol,
                         somp_max_iter=somp_max_iter, refine=refine, squint=squint)

    def _estimate(self, obs, dicts, prior):
        return super()._estimate(obs, dicts, np.zeros(0, dtype=int))


class MFistaEstimator(ChannelEstimator):
    """Prior-weighted group lasso on the coarse grid plus hierarchical refinement."""

    def __init__(self, n_paths=4, n_common=3, multiplier=4, lam=None, lam_scale=1.0, tol=1e-6,
                 max_iter=500, refine=True, squint=True):
        self.n_paths = n_paths
        self.n_common = n_common
        self.multiplier = multiplier
        self.lam = lam
        self.lam_scale = lam_scale
        self.tol = tol
        self.max_iter = max_iter
        self.refine = refine
        self.squint = squint

    def _estimate(self, obs, dicts, prior):
        if not self.n_paths >= self.n_common >= 0:
            raise ValueError("need L >= L_cm >= 0")
        return mfista_estimate(obs.vectors(), dicts, obs.cfg, obs.noise_var, prior, self.n_paths,
                               self.n_common, self.multiplier, self.lam, self.lam_scale, self.tol,
                               self.max_iter, self.refine)


class GenieEstimator(ChannelEstimator):
    """LS on the true support; ``fit`` needs the channel realization."""

    def __init__(self, angles="exact", spatial_wideband=True, refine=False):
        self.angles = angles
        self.spatial_wideband = spatial_wideband
        self.refine = refine

    @property
    def squint(self):
        return self.spatial_wideband

    def fit(self, obs, realization=None, prior_support=None):
        if realization is None:
            raise ValueError("the genie estimator needs the true channel realization")
        self._realization = realization
        return super().fit(obs)

    def _estimate(self, obs, dicts, prior):
        return genie_estimate(obs.vectors(), dicts, obs.cfg, self._realization, self.angles,
                              self.refine)


ESTIMATORS = {
    "ts": TwoStageEstimator,
    "mfista": MFistaEstimator,
    "gsomp": GSOMPEstimator,
    "genie": GenieEstimator,
}
