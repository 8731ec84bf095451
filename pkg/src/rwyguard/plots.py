"""Report figures rendered next to the delimited output."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 120


def deviation_histogram(deviations_pct, outpath: str | Path,
                        title: str = "", bins: int = 20) -> Path:
    """Histogram of percentage deviations with a fitted normal overlay."""
    data = np.asarray(deviations_pct, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.hist(data, bins=bins, color="#4878a8", edgecolor="white", density=True)
    mu = float(np.mean(data))
    sigma = float(np.std(data, ddof=1)) if data.size > 1 else 0.0
    if sigma > 0:
        xs = np.linspace(data.min() - sigma, data.max() + sigma, 300)
        ys = np.exp(-0.5 * ((xs - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        ax.plot(xs, ys, color="#b04a4a", lw=2,
                label=f"normal fit  μ={mu:.2f}%  σ={sigma:.2f}%")
        ax.legend(fontsize=9)
    ax.set_xlabel("deviation, %")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title, fontsize=11)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    outpath = Path(outpath)
    fig.savefig(outpath, dpi=DPI)
    plt.close(fig)
    return outpath


def convergence_histogram(times_s, outpath: str | Path, title: str = "") -> Path:
    """Distribution of convergence times with the median marked."""
    data = np.asarray(times_s, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.hist(data, bins=20, color="#5a9367", edgecolor="white")
    med = float(np.median(data))
    ax.axvline(med, color="#b04a4a", lw=2, label=f"median {med:.2f} s")
    ax.set_xlabel("convergence time, s")
    ax.set_ylabel("runs")
    if title:
        ax.set_title(title, fontsize=11)
    ax.legend(fontsize=9)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    outpath = Path(outpath)
    fig.savefig(outpath, dpi=DPI)
    plt.close(fig)
    return outpath


def prediction_traces(series_list, outpath: str | Path, title: str = "",
                      band: float = 0.02) -> Path:
    """Prediction-over-time traces normalized by each run's final value."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for series in series_list:
        ts = [t for t, _ in series]
        final = series[-1][1]
        vals = [v / final for _, v in series]
        ax.plot(ts, vals, lw=0.8, alpha=0.6)
    ax.axhspan(1.0 - band, 1.0 + band, color="#5a9367", alpha=0.15,
               label=f"±{band:.0%} band")
    ax.set_xlabel("time, s")
    ax.set_ylabel("prediction / final value")
    if title:
        ax.set_title(title, fontsize=11)
    ax.legend(fontsize=9)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    outpath = Path(outpath)
    fig.savefig(outpath, dpi=DPI)
    plt.close(fig)
    return outpath
