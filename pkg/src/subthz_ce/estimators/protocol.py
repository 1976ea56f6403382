"""Frame-by-frame tracking with support hand-over and resets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone


@dataclass
class TrackingLog:
    results: list = field(default_factory=list)
    resets: list = field(default_factory=list)

    @property
    def n_resets(self) -> int:
        return int(sum(self.resets))


def track_protocol(estimator, observations, reset_threshold: float = np.inf) -> TrackingLog:
    """Run ``estimator`` over a frame sequence.

    The first frame starts from an empty support. Each later frame uses the
    previous estimate's support as its prior; if the fitted relative
    residual then exceeds ``reset_threshold`` the frame is re-estimated
    from scratch and a reset is logged.
    """
    est = clone(estimator)
    log = TrackingLog()
    prior = None
    for obs in observations:
        est.fit(obs, prior_support=prior)
        reset = False
        if prior is not None and est.residual_ > reset_threshold:
            first = est.result_.diagnostics.get("runtime", 0.0)
            est.fit(obs, prior_support=None)
            est.result_.diagnostics["runtime"] = est.result_.diagnostics.get("runtime", 0.0) + first
            reset = True
        log.results.append(est.result_)
        log.resets.append(reset)
        prior = est.support_
    return log
