import numpy as np
import pytest

from subthz_ce.channel import SystemConfig, channel_matrices, draw_realization
from subthz_ce.codebook import GridSpec
from subthz_ce.training import TrainingConfig, calibrate_noise, observe, random_beams


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    """Small on-grid system: 4x4 receive, 2x2 transmit, two grid levels."""
    return SystemConfig(n_subcarriers=32, n_rx=(4, 4), n_tx=(2, 2), n_paths=2, n_common=1,
                        grid=GridSpec(4, 2, 2), on_grid=True, tau_min=0.0, tau_max=1e-9)


def make_frame(cfg, tcfg, seed, snr_db=None):
    rng = np.random.default_rng(seed)
    real = draw_realization(cfg, rng)
    beams = random_beams(cfg, tcfg, rng)
    h = channel_matrices(real, tcfg.pilots(cfg), cfg)
    nv = 0.0 if snr_db is None else calibrate_noise(snr_db, h, beams)
    return real, observe(real, beams, cfg, tcfg, nv, rng, snr_db), h


@pytest.fixture
def make():
    return make_frame


@pytest.fixture
def small_tcfg():
    return TrainingConfig(n_pilots=4, n_streams=8, n_subframes=4)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
