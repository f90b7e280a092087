"""Point-source spectrum with a time-varying high-cut."""

from __future__ import annotations

import math

import numpy as np

REFERENCE_STRESS_DROP = 10.0  # bars; log-midpoint of the 1-100 bar draw


def corner_frequency(mw: float, stress_drop: float, beta: float = 3.6) -> float:
    """Brune corner frequency (Hz); stress drop in bars, beta in km/s."""
    if stress_drop <= 0:
        raise ValueError("stress drop must be positive")
    return 10.0 ** (1.341 + math.log10(beta * stress_drop ** (1.0 / 3.0)) - 0.5 * mw)


def source_spectrum(f, fc: float, fc_tau, form: str = "as-printed"):
    """Acceleration source spectrum with an eighth-order high-cut at ``fc_tau``.

    ``form="as-printed"`` divides the omega-square numerator by
    sqrt(1 + (f/fc)^2); ``"brune-standard"`` uses (1 + (f/fc)^2).
    """
    f = np.asarray(f, dtype=float)
    x = f / fc
    low = np.sqrt(1.0 + x * x) if form == "as-printed" else (1.0 + x * x)
    if form not in ("as-printed", "brune-standard"):
        raise ValueError(f"unknown spectrum form {form!r}")
    return (2.0 * np.pi * f) ** 2 / (low * np.sqrt(1.0 + (f / fc_tau) ** 8))
