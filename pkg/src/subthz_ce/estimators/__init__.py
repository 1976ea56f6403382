"""Channel estimators: two-stage LS-CS, M-FISTA, GSOMP and genie LS."""
from .base import (ESTIMATORS, ChannelEstimator, GenieEstimator, GSOMPEstimator,
                   MFistaEstimator, TwoStageEstimator)
from .fista import fista, group_prox, mfista_estimate, mixed_norm, StackedLS
from .genie import genie_estimate
from .greedy import SearchCounter, mmv_ls, mmv_somp, sequential_search
from .protocol import TrackingLog, track_protocol
from .refine import delay_phasors, refine
from .result import EstimateResult
from .twostage import two_stage_estimate

__all__ = [
    "ESTIMATORS", "ChannelEstimator", "GenieEstimator", "GSOMPEstimator", "MFistaEstimator",
    "TwoStageEstimator", "fista", "group_prox", "mfista_estimate", "mixed_norm", "StackedLS",
    "genie_estimate", "SearchCounter", "mmv_ls", "mmv_somp", "sequential_search",
    "TrackingLog", "track_protocol", "delay_phasors", "refine", "EstimateResult",
    "two_stage_estimate",
]
