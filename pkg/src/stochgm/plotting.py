"""Figures for ensemble reports, rendered off-screen to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

_DPI = 150


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_ensemble_spectra(periods, sa, gmpe_median, gmpe_sigma, path,
                          selected=None, title: str | None = None) -> Path:
    """Simulated spectra against the GMPE median and +/- one sigma.

    ``sa`` is (n_motions, n_periods) in g. Period 0 (PGA) is left out of
    the log axis. ``selected`` indexes rows drawn as the best-match subset.
    """
    periods = np.asarray(periods, dtype=float)
    sa = np.asarray(sa, dtype=float)
    keep = periods > 0
    p = periods[keep]
    med = np.asarray(gmpe_median, dtype=float)[keep]
    sig = np.asarray(gmpe_sigma, dtype=float)[keep]

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for row in sa[:, keep][:200]:
        ax.loglog(p, row, color="0.8", lw=0.5, zorder=1)
    if selected is not None and len(selected):
        for row in sa[np.asarray(selected)][:, keep]:
            ax.loglog(p, row, color="tab:orange", lw=0.6, alpha=0.7, zorder=2)
        ax.plot([], [], color="tab:orange", lw=0.6, label=f"best {len(selected)}")
    ax.loglog(p, np.exp(np.median(np.log(sa[:, keep]), axis=0)), color="k", lw=1.6,
              label="simulated median", zorder=3)
    ax.loglog(p, med, color="tab:blue", lw=1.6, label="GMPE median", zorder=4)
    ax.loglog(p, med * np.exp(sig), color="tab:blue", ls="--", lw=1.0, zorder=4)
    ax.loglog(p, med * np.exp(-sig), color="tab:blue", ls="--", lw=1.0,
              label=r"GMPE $\pm\sigma$", zorder=4)
    ax.set_xlabel("Period (s)")
    ax.set_ylabel("SA (g), 5% damping")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    return _save(fig, path)


def plot_parameter_histograms(samples: dict, targets: dict, path, bins: int = 30) -> Path:
    """Histograms of simulated parameters with the target truncated-normal pdf.

    ``samples`` maps a label to values; ``targets`` maps the same label to
    ``(mean, sigma, bound)`` where ``bound`` is in sigma units or None.
    """
    labels = list(samples)
    n = len(labels)
    cols = min(n, 2)
    rows = int(np.ceil(n / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(4.0 * cols, 3.0 * rows), squeeze=False)
    for ax, label in zip(axes.flat, labels):
        x = np.asarray(samples[label], dtype=float)
        x = x[np.isfinite(x)]
        ax.hist(x, bins=bins, density=True, color="0.75", edgecolor="0.4", lw=0.4)
        if label in targets:
            mean, sigma, bound = targets[label]
            if sigma > 0:
                b = np.inf if bound is None else bound
                lo = mean - (4.0 if bound is None else b) * sigma
                hi = mean + (4.0 if bound is None else b) * sigma
                grid = np.linspace(min(lo, x.min()), max(hi, x.max()), 400)
                pdf = stats.truncnorm.pdf(grid, -b, b, loc=mean, scale=sigma)
                ax.plot(grid, pdf, color="tab:blue", lw=1.4)
            ax.axvline(mean, color="tab:blue", ls=":", lw=1.0)
        ax.set_xlabel(label)
        ax.set_ylabel("density")
    for ax in list(axes.flat)[n:]:
        ax.set_visible(False)
    fig.tight_layout()
    return _save(fig, path)


def plot_trace(ts, path, title: str | None = None) -> Path:
    """Acceleration trace with its normalised Husid curve."""
    from .metrics import compute_arias

    ai, cum = compute_arias(ts)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.0, 4.5), sharex=True)
    ax1.plot(ts.times, ts.samples, color="k", lw=0.5)
    ax1.set_ylabel(r"a (m/s$^2$)")
    if title:
        ax1.set_title(title)
    if ai > 0:
        ax2.plot(ts.times, cum / ai, color="tab:red", lw=1.0)
    ax2.axhline(0.05, color="0.5", ls=":", lw=0.8)
    ax2.axhline(0.95, color="0.5", ls=":", lw=0.8)
    ax2.set_ylabel("normalised AI")
    ax2.set_xlabel("Time (s)")
    fig.tight_layout()
    return _save(fig, path)
