"""Vector plots of NMSE and spectral efficiency against the sweep axis."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {"snr": "SNR (dB)", "n_pilots": "pilot subcarriers K_p",
          "measurement_ratio": "measurement ratio", "bandwidth": "bandwidth (Hz)"}


def _series(summary, key):
    out: dict = {}
    for r in summary:
        out.setdefault(r["estimator"], []).append((float(r["axis_value"]), float(r[key])))
    return out


def plot_summary(summary, out_dir) -> list:
    """Write ``nmse_vs_<axis>.svg`` (log scale) and ``se_vs_<axis>.svg``."""
    out_dir = Path(out_dir)
    plt.rcParams["svg.hashsalt"] = "subthz"
    axis = summary[0]["axis"]
    paths = []
    for key, ylabel, log in (("nmse_mean", "NMSE", True), ("se_mean", "SE (bit/s/Hz/stream)", False)):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        for name, pts in _series(summary, key).items():
            x, y = zip(*sorted(pts))
            ax.plot(x, y, marker="o", label=name)
        if log:
            ax.set_yscale("log")
        ax.set_xlabel(LABELS.get(axis, axis))
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{key.split('_')[0]}_vs_{axis}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
