"""
Scalar and spectral indicators of an acceleration time history.

Arias intensity, Husid significant duration, PGA, 5%-damped response
spectra and pre-event signal-to-noise ratio. Everything here works in
m/s^2 internally; g only appears in the reported PGA and SA values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

G = 9.81  # m/s^2
DAMPING = 0.05

# Tabulated periods of the SA regression; 0.0 stands for PGA.
TABULATED_PERIODS = (
    0.0, 0.0384, 0.0484, 0.0582, 0.0769, 0.0844, 0.097, 0.1167, 0.1472,
    0.1691, 0.2036, 0.234, 0.309, 0.3551, 0.3896, 0.4274, 0.469, 0.5913,
    0.7456, 0.818, 0.9401, 1.3622,
)


class ZeroEnergyError(ValueError):
    """Raised when a duration is requested for a trace carrying no energy."""


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled acceleration trace in m/s^2."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if samples.size < 2:
            raise ValueError(f"need at least 2 samples, got {samples.size}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def duration(self) -> float:
        return self.dt * self.samples.size

    def scaled(self, factor: float) -> "TimeSeries":
        return TimeSeries(self.samples * factor, self.dt, self.t0)


@dataclass(frozen=True)
class ScalarMetrics:
    pga: float  # m/s^2
    ai: float  # m/s
    t5: float
    t95: float
    dsr: float

    @property
    def pga_g(self) -> float:
        return self.pga / G


@dataclass(frozen=True)
class ResponseSpectrum:
    periods: np.ndarray
    sa: np.ndarray  # g
    damping: float = DAMPING

    def __post_init__(self):
        periods = np.asarray(self.periods, dtype=float)
        sa = np.asarray(self.sa, dtype=float)
        if periods.shape != sa.shape:
            raise ValueError("periods and sa must have the same shape")
        if periods.size > 1 and np.any(np.diff(periods) <= 0):
            raise ValueError("periods must be strictly increasing")
        if np.any(sa < 0):
            raise ValueError("spectral accelerations must be non-negative")
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "sa", sa)


@dataclass(frozen=True)
class SnrProfile:
    freqs: np.ndarray
    snr: np.ndarray
    noise_window: tuple[float, float]
    signal_window: tuple[float, float] = field(default=(0.0, 0.0))

    def admitted(self, threshold: float = 3.0) -> np.ndarray:
        return self.snr > threshold


def compute_pga(ts: TimeSeries) -> tuple[float, float]:
    """Peak absolute acceleration as ``(m/s^2, g)``."""
    pga = float(np.max(np.abs(ts.samples)))
    return pga, pga / G


def compute_arias(ts: TimeSeries) -> tuple[float, np.ndarray]:
    """Arias intensity (m/s) and its cumulative history.

    The integral of a^2 uses the trapezoidal rule; the cumulative series
    has one value per sample and starts at zero.
    """
    a2 = ts.samples ** 2
    cum = np.empty_like(a2)
    cum[0] = 0.0
    cum[1:] = np.cumsum(0.5 * (a2[1:] + a2[:-1]) * ts.dt)
    cum *= np.pi / (2.0 * G)
    return float(cum[-1]), cum


def _first_crossing(times, cum, level):
    k = int(np.searchsorted(cum, level, side="left"))
    if k == 0:
        return float(times[0])
    c0, c1 = cum[k - 1], cum[k]
    if c1 == c0:
        return float(times[k])
    return float(times[k - 1] + (level - c0) / (c1 - c0) * (times[k] - times[k - 1]))


def compute_significant_duration(ts: TimeSeries, lo: float = 0.05,
                                 hi: float = 0.95) -> tuple[float, float, float]:
    """Times of 5% and 95% cumulative Arias intensity and their difference.

    Crossings are linearly interpolated between samples.
    """
    ai, cum = compute_arias(ts)
    if ai <= 0.0:
        raise ZeroEnergyError("significant duration undefined for a zero-energy trace")
    husid = cum / ai
    times = ts.times
    t5 = _first_crossing(times, husid, lo)
    t95 = _first_crossing(times, husid, hi)
    return t5, t95, t95 - t5


def scalar_metrics(ts: TimeSeries) -> ScalarMetrics:
    pga, _ = compute_pga(ts)
    ai, _ = compute_arias(ts)
    t5, t95, dsr = compute_significant_duration(ts)
    return ScalarMetrics(pga=pga, ai=ai, t5=t5, t95=t95, dsr=dsr)


# --- response spectrum -------------------------------------------------------

def _newmark_filter(period, damping, h):
    """IIR coefficients of the average-acceleration scheme.

    Constant average acceleration is the trapezoidal rule on the (u, v)
    state, so the recursion is exactly the bilinear transform of the
    ground-to-absolute-acceleration transfer function
    (2 zeta w s + w^2) / (s^2 + 2 zeta w s + w^2).
    """
    w = 2.0 * np.pi / period
    num = [2.0 * damping * w, w * w]
    den = [1.0, 2.0 * damping * w, w * w]
    return signal.bilinear(num, den, fs=1.0 / h)


def substeps_for(period: float, dt: float, max_ratio: float = 0.1) -> int:
    """Number of sub-steps keeping the integration step at or below T/10."""
    return max(1, int(np.ceil(dt / (max_ratio * period) - 1e-12)))


def _upsample_linear(x, m):
    if m == 1:
        return x
    frac = np.arange(m) / m
    body = x[:-1, None] * (1.0 - frac) + x[1:, None] * frac
    return np.concatenate([body.ravel(), x[-1:]])


def sdof_absolute_acceleration(acc: np.ndarray, dt: float, period: float,
                               damping: float = DAMPING) -> np.ndarray:
    """Absolute acceleration history of a damped oscillator at rest at t=0.

    The first step is taken explicitly from rest; the rest of the history
    follows the equivalent second-order recursion.

    The input is linearly interpolated onto sub-steps no longer than
    ``period / 10``; the returned history is on the sub-step grid.
    """
    m = substeps_for(period, dt)
    x = _upsample_linear(np.asarray(acc, dtype=float), m)
    h = dt / m
    w = 2.0 * np.pi / period
    c, k = 2.0 * damping * w, w * w
    y = np.empty_like(x)
    # at rest: relative acceleration -x0, absolute acceleration 0
    y[0] = 0.0
    u1 = -(x[0] + x[1]) / (k + 2.0 * c / h + 4.0 / h ** 2)
    y[1] = 4.0 * u1 / h ** 2 + x[0] + x[1]
    if x.size > 2:
        b, a = _newmark_filter(period, damping, h)
        zi = signal.lfiltic(b, a, y=[y[1], y[0]], x=[x[1], x[0]])
        y[2:], _ = signal.lfilter(b, a, x[2:], zi=zi)
    return y


def compute_response_spectrum(ts: TimeSeries, periods=None,
                              damping: float = DAMPING) -> ResponseSpectrum:
    """Peak absolute acceleration response (g) of 5%-damped oscillators.

    ``periods`` defaults to the tabulated regression periods; a zero
    period returns PGA.
    """
    if periods is None:
        periods = TABULATED_PERIODS
    periods = np.asarray(periods, dtype=float)
    if np.any(periods < 0):
        raise ValueError("periods must be non-negative")
    order = np.argsort(periods)
    sa = np.empty(periods.size)
    pga = float(np.max(np.abs(ts.samples)))
    for i, T in enumerate(periods[order]):
        if T == 0.0:
            sa[i] = pga
        else:
            sa[i] = np.max(np.abs(sdof_absolute_acceleration(ts.samples, ts.dt, T, damping)))
    return ResponseSpectrum(periods[order], sa / G, damping)


# --- signal-to-noise ---------------------------------------------------------

def _log_smooth(freqs, amp, width_decades):
    """Boxcar average over +/- width/2 decades around each positive frequency."""
    out = np.zeros_like(amp)
    pos = freqs > 0
    lf = np.log10(freqs[pos])
    a = amp[pos]
    csum = np.concatenate([[0.0], np.cumsum(a)])
    lo = np.searchsorted(lf, lf - 0.5 * width_decades, side="left")
    hi = np.searchsorted(lf, lf + 0.5 * width_decades, side="right")
    out[pos] = (csum[hi] - csum[lo]) / (hi - lo)
    return out


def compute_snr(ts: TimeSeries, p_arrival: float, signal_end: float | None = None,
                noise_length: float = 1.0, smoothing_decades: float = 0.1) -> SnrProfile:
    """Spectral ratio between the signal window and 1 s of pre-event noise.

    Fourier amplitudes of both windows are computed on the same frequency
    grid, divided by the square root of their window length, and smoothed
    over a fixed log-frequency width before the ratio is taken. The signal
    window runs from ``p_arrival`` to ``signal_end`` (default: the time of
    95% Arias intensity).
    """
    times = ts.times
    noise_start = p_arrival - noise_length
    if noise_start < times[0] - 0.5 * ts.dt:
        raise InsufficientNoiseError(
            f"need {noise_length} s of pre-event noise, only "
            f"{max(p_arrival - times[0], 0.0):.3f} s available")
    if signal_end is None:
        signal_end = compute_significant_duration(ts)[1]
    i0 = int(round((noise_start - ts.t0) / ts.dt))
    ip = int(round((p_arrival - ts.t0) / ts.dt))
    ie = int(round((signal_end - ts.t0) / ts.dt))
    ie = min(max(ie, ip + 2), len(ts))
    noise = ts.samples[i0:ip]
    sig = ts.samples[ip:ie]
    nfft = max(noise.size, sig.size)
    freqs = np.fft.rfftfreq(nfft, ts.dt)
    fs = np.abs(np.fft.rfft(sig, nfft)) * ts.dt / np.sqrt(sig.size * ts.dt)
    fn = np.abs(np.fft.rfft(noise, nfft)) * ts.dt / np.sqrt(noise.size * ts.dt)
    fs = _log_smooth(freqs, fs, smoothing_decades)
    fn = _log_smooth(freqs, fn, smoothing_decades)
    keep = freqs > 0
    freqs, fs, fn = freqs[keep], fs[keep], fn[keep]
    floor = np.finfo(float).tiny + 1e-12 * max(fs.max(), fn.max(), 0.0)
    snr = fs / np.maximum(fn, floor)
    return SnrProfile(freqs, snr, (float(noise_start), float(p_arrival)),
                      (float(p_arrival), float(signal_end)))


class InsufficientNoiseError(ValueError):
    """The record lacks the pre-event noise needed for a signal-to-noise ratio."""
