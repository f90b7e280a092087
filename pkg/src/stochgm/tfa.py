"""
Time-frequency analysis: Stockwell transform, central frequency F_C(tau)
and the log-linear decay model ``F_C(tau) = exp(A - B ln(tau + 1))``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .metrics import SnrProfile, TimeSeries

SNR_THRESHOLD = 3.0


class NoTriggerError(RuntimeError):
    """The STA/LTA picker found no onset."""


class UnusableRecordError(ValueError):
    """No branch of the F_C regression produced a positive slope."""


@dataclass(frozen=True)
class TimeFrequencyMap:
    times: np.ndarray  # s, trace time
    freqs: np.ndarray  # Hz
    amplitude: np.ndarray  # |S|, shape (n_freqs, n_times)

    def power(self) -> np.ndarray:
        return self.amplitude ** 2

    def ridge(self) -> np.ndarray:
        """Frequency of maximal amplitude at every time."""
        return self.freqs[np.argmax(self.amplitude, axis=0)]

    def to_csv(self, path) -> None:
        """Long-format dump with columns tau, f, amplitude."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["tau_s", "freq_hz", "amplitude"])
            for i, f in enumerate(self.freqs):
                for j, t in enumerate(self.times):
                    w.writerow([f"{t:.9g}", f"{f:.9g}", f"{self.amplitude[i, j]:.9g}"])


@dataclass(frozen=True)
class CentralFrequencySeries:
    taus: np.ndarray  # s after the P arrival
    fc: np.ndarray  # Hz
    valid_band: tuple[float, float]
    p_arrival: float = 0.0


@dataclass(frozen=True)
class FcFit:
    A: float
    B: float
    branch: str  # "full", "S-wave" or "P-wave"
    window: tuple[float, float]
    rms_residual: float

    def predict(self, tau):
        return np.exp(self.A - self.B * np.log(np.asarray(tau) + 1.0))


# --- Stockwell transform ------------------------------------------------------

def default_frequency_grid(dt: float, window_length: float,
                           fmax: float | None = None) -> np.ndarray:
    """Linear grid with spacing 1/window_length up to Nyquist, zero excluded."""
    nyq = 0.5 / dt
    fmax = nyq if fmax is None else min(fmax, nyq)
    df = 1.0 / window_length
    n = int(math.floor(fmax / df + 1e-9))
    return df * np.arange(1, n + 1)


_GAUSS_CUT = math.sqrt(40.0 / (2.0 * math.pi ** 2))  # exp(-40) ~ 4e-18


def _spectral_gaussian(alpha, f, dt):
    """exp(-2 pi^2 (alpha - f)^2 / f^2), periodised with period 1/dt.

    Terms below exp(-40) are skipped.
    """
    fs = 1.0 / dt
    n_alias = int(math.ceil(_GAUSS_CUT * f * dt + 1.0))
    out = np.zeros_like(alpha)
    for q in range(-n_alias, n_alias + 1):
        z = (alpha - f + q * fs) / f
        m = np.abs(z) < _GAUSS_CUT
        if m.any():
            out[m] += np.exp(-2.0 * np.pi ** 2 * z[m] ** 2)
    return out


def _time_kernel(n, f, dt):
    """Periodised modulated window f/sqrt(2 pi) exp(-u^2 f^2 / 2) exp(i 2 pi f u)."""
    u = dt * np.arange(n)
    span = n * dt
    n_alias = int(math.ceil(10.0 / (f * span))) + 1
    out = np.zeros(n, dtype=complex)
    for p in range(-n_alias, n_alias + 1):
        v = u + p * span
        out += np.exp(-0.5 * (v * f) ** 2 + 2j * np.pi * f * v)
    return out * dt * f / math.sqrt(2.0 * math.pi)


def stockwell(x: np.ndarray, dt: float, freqs: np.ndarray,
              method: str = "fft", columns=None, phase: bool = True) -> np.ndarray:
    """Complex S-transform rows ``S[i, j]`` for ``freqs[i]`` and sample j.

    The Gaussian window has standard deviation 1/f and the trace is treated
    as periodic. Each row is the output of a Gabor filter (window times
    exp(i 2 pi f u)) times exp(-i 2 pi f tau). ``method="fft"`` filters in
    the frequency domain with one inverse FFT per row; ``method="direct"``
    evaluates the circular convolution in the time domain (O(N^2) per
    frequency, for checking). ``columns`` (slice or index array) keeps only
    those samples per row; ``phase=False`` drops the unimodular factor when
    only the amplitude is needed.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    t = dt * np.arange(n)
    keep = np.arange(n) if columns is None else np.arange(n)[columns]
    out = np.empty((len(freqs), keep.size), dtype=complex)
    if method == "fft":
        alpha = np.fft.fftfreq(n, dt)
        spec = np.fft.fft(x)
    elif method == "direct":
        lag = (keep[:, None] - np.arange(n)[None, :]) % n
    else:
        raise ValueError(f"unknown method {method!r}")
    for i, f in enumerate(freqs):
        if method == "fft":
            row = np.fft.ifft(spec * _spectral_gaussian(alpha, f, dt))[keep]
        else:
            row = _time_kernel(n, f, dt)[lag] @ x
        out[i] = row * np.exp(-2j * np.pi * f * t[keep]) if phase else row
    return out


def s_transform(ts: TimeSeries, freqs=None, method: str = "fft",
                time_window: tuple[float, float] | None = None) -> TimeFrequencyMap:
    """Amplitude of the S-transform of a trace.

    ``freqs`` must lie in (0, Nyquist]; the default grid spans the whole
    trace with spacing 1/duration. ``time_window`` crops the returned
    columns without changing the transform.
    """
    nyq = 0.5 / ts.dt
    if freqs is None:
        freqs = default_frequency_grid(ts.dt, ts.duration)
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size == 0:
        raise ValueError("empty frequency grid")
    if np.any(freqs <= 0):
        raise ValueError("frequencies must be strictly positive")
    if np.any(freqs > nyq * (1 + 1e-12)):
        raise ValueError(f"frequency {freqs.max():g} Hz above Nyquist {nyq:g} Hz")
    times = ts.times
    keep = None
    if time_window is not None:
        keep = np.nonzero((times >= time_window[0] - 1e-9)
                          & (times <= time_window[1] + 1e-9))[0]
        if keep.size == 0:
            raise ValueError("time window contains no samples")
        times = times[keep]
    amp = np.abs(stockwell(ts.samples, ts.dt, freqs, method, keep, phase=False))
    return TimeFrequencyMap(times, freqs, amp)


# --- central frequency ---------------------------------------------------------

def admitted_frequencies(freqs: np.ndarray, snr: SnrProfile,
                         threshold: float = SNR_THRESHOLD) -> np.ndarray:
    """Boolean mask of ``freqs`` whose interpolated SNR exceeds ``threshold``."""
    values = np.interp(freqs, snr.freqs, snr.snr, left=snr.snr[0], right=snr.snr[-1])
    return values > threshold


def spectral_moment_frequency(freqs, power, weights=None):
    """sqrt(m2/m0) along axis 0 of ``power`` (frequencies x times)."""
    w = np.ones_like(freqs) if weights is None else weights
    m0 = np.tensordot(w, power, axes=(0, 0))
    m2 = np.tensordot(w * freqs ** 2, power, axes=(0, 0))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(m2 / m0)


def central_frequency_series(tfmap: TimeFrequencyMap, snr: SnrProfile | None,
                             window: tuple[float, float],
                             threshold: float = SNR_THRESHOLD) -> CentralFrequencySeries:
    """F_C(tau) = sqrt(m2/m0) of |S|^2 over the SNR-admitted band.

    ``window`` is ``(t_P, t95)`` in trace time; the returned taus are
    relative to t_P. ``snr=None`` admits every frequency of the map.
    Times where the admitted band carries no power are dropped.
    """
    t_p, t_end = window
    if snr is None:
        band = np.ones(tfmap.freqs.size, dtype=bool)
    else:
        band = admitted_frequencies(tfmap.freqs, snr, threshold)
    if not band.any():
        raise ValueError(f"no frequency has SNR above {threshold:g}")
    cols = (tfmap.times >= t_p - 1e-9) & (tfmap.times <= t_end + 1e-9)
    freqs = tfmap.freqs[band]
    power = tfmap.amplitude[np.ix_(band, cols)] ** 2
    fc = spectral_moment_frequency(freqs, power)
    taus = tfmap.times[cols] - t_p
    ok = np.isfinite(fc) & (fc > 0)
    return CentralFrequencySeries(taus[ok], fc[ok], (float(freqs[0]), float(freqs[-1])),
                                  float(t_p))


def regress_fc(taus, fc) -> tuple[float, float, float]:
    """Least squares of ln F_C on ln(tau+1); returns (A, B, rms residual)."""
    x = np.log(np.asarray(taus, dtype=float) + 1.0)
    y = np.log(np.asarray(fc, dtype=float))
    if x.size < 2:
        raise ValueError("need at least 2 points for a regression")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = 0.0 if sxx == 0 else float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    return intercept, -slope, float(np.sqrt(np.mean(resid ** 2)))


def fit_fc_model(series: CentralFrequencySeries, tfmap: TimeFrequencyMap | None = None,
                 tau_max: float | None = None, min_points: int = 3) -> FcFit:
    """Fit A and B, falling back to P/S sub-windows when the slope is not positive.

    The split time is the S-transform global maximum inside the series
    support (or ``tau_max`` if given, relative to the P arrival). The
    S-wave branch wins whenever its B is positive.
    """
    taus, fc = series.taus, series.fc
    if taus.size < min_points:
        raise ValueError(f"need at least {min_points} F_C samples, got {taus.size}")
    A, B, rms = regress_fc(taus, fc)
    window = (float(taus[0]), float(taus[-1]))
    if B > 0:
        return FcFit(A, B, "full", window, rms)

    if tau_max is None:
        if tfmap is None:
            raise ValueError("a time-frequency map or tau_max is needed for the branch split")
        t_abs = tfmap.times - series.p_arrival
        cols = (t_abs >= taus[0] - 1e-9) & (t_abs <= taus[-1] + 1e-9)
        amp = tfmap.amplitude[:, cols]
        j = np.unravel_index(np.argmax(amp), amp.shape)[1]
        tau_max = float(t_abs[cols][j])

    fits = {}
    for branch, sel in (("S-wave", taus >= tau_max), ("P-wave", taus <= tau_max)):
        if np.count_nonzero(sel) >= min_points:
            a, b, r = regress_fc(taus[sel], fc[sel])
            fits[branch] = FcFit(a, b, branch, (float(taus[sel][0]), float(taus[sel][-1])), r)
    for branch in ("S-wave", "P-wave"):
        if branch in fits and fits[branch].B > 0:
            return fits[branch]
    raise UnusableRecordError(
        "F_C slope B <= 0 on the full window and on both P/S sub-windows")


# --- P picking -------------------------------------------------------------------

def pick_p_arrival(ts: TimeSeries, sta: float = 0.5, lta: float = 5.0,
                   threshold: float = 3.0, min_lta: float = 1.0,
                   override: float | None = None) -> float:
    """STA/LTA energy trigger (0.5 s / 5 s windows, ratio 3).

    The LTA window precedes the STA window and uses whatever history is
    available up to ``lta`` seconds, but at least ``min_lta`` seconds.
    Returns the time of the last sample of the first triggering STA window.
    """
    if override is not None:
        return float(override)
    e = ts.samples ** 2
    c = np.concatenate([[0.0], np.cumsum(e)])
    ns = max(1, int(round(sta / ts.dt)))
    nl = max(1, int(round(lta / ts.dt)))
    nmin = max(1, int(round(min_lta / ts.dt)))
    k = np.arange(ns + nmin - 1, e.size)  # last sample of the STA window
    s_end, s_start = k + 1, k + 1 - ns
    l_start = np.maximum(0, s_start - nl)
    sta_v = (c[s_end] - c[s_start]) / ns
    lta_v = (c[s_start] - c[l_start]) / (s_start - l_start)
    hit = (sta_v > 0) & (sta_v > threshold * lta_v)
    if not hit.any():
        raise NoTriggerError("STA/LTA ratio never exceeded the trigger threshold")
    return float(ts.t0 + k[np.argmax(hit)] * ts.dt)
