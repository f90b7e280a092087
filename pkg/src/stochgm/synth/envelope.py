"""
P, S and coda energy envelope.

Pa(t) mixes a lognormal P bump starting at the P onset, a lognormal S bump
starting at the S onset and an exponentially decaying coda starting at the
S-bump mode, with fixed energy fractions. The S-bump time scale is solved
so that the 5-95% energy interval of Pa equals the drawn significant
duration. The coda rate follows Q = Q0 * F^N at the central frequency
reached at the envelope peak; the coda amplitude decays as
exp(-pi F t / Q), so the energy envelope decays twice as fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, special
from scipy.fft import next_fast_len

from ..metrics import _first_crossing

_Z95 = special.ndtri(0.95)


class CalibrationError(RuntimeError):
    def __init__(self, message, achieved_dsr):
        super().__init__(f"{message} (achieved D_SR = {achieved_dsr:.4g} s)")
        self.achieved_dsr = achieved_dsr


@dataclass(frozen=True)
class EnvelopeSpec:
    t_p: float
    t_s: float
    energy_fractions: tuple[float, float, float]
    coda_decay_rate: float  # 1/s, energy envelope
    total_duration: float
    p_median: float
    p_log_shape: float
    s_median: float
    s_log_shape: float
    t_peak: float  # S-bump mode, also the coda start
    fc_peak: float  # central frequency at t_peak (Hz)
    q: float
    coda_clamped: bool = False

    # analytic forms (unit total area, no truncation)
    def pdf(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        fp, fs, fc = self.energy_fractions
        out = (fp * _lognormal_pdf(t - self.t_p, self.p_median, self.p_log_shape)
                + fs * _lognormal_pdf(t - self.t_s, self.s_median, self.s_log_shape)
                + fc * _coda_pdf(t - self.t_peak, self.coda_decay_rate))
        return float(out[0]) if scalar else out

    def cdf(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        fp, fs, fc = self.energy_fractions
        out = (fp * _lognormal_cdf(t - self.t_p, self.p_median, self.p_log_shape)
                + fs * _lognormal_cdf(t - self.t_s, self.s_median, self.s_log_shape)
                + fc * _coda_cdf(t - self.t_peak, self.coda_decay_rate))
        return float(out[0]) if scalar else out

    def quantile(self, q: float) -> float:
        hi = self.t_peak + 1.0
        while self.cdf(hi) < q:
            hi = self.t_p + 2.0 * (hi - self.t_p)
        return optimize.brentq(lambda t: self.cdf(t) - q, self.t_p, hi, xtol=1e-12, rtol=1e-14)

    def significant_duration(self) -> float:
        return self.quantile(0.95) - self.quantile(0.05)


def _lognormal_pdf(x, median, shape):
    out = np.zeros_like(x)
    pos = x > 0
    z = np.log(x[pos] / median) / shape
    out[pos] = np.exp(-0.5 * z * z) / (x[pos] * shape * math.sqrt(2.0 * math.pi))
    return out


def _lognormal_cdf(x, median, shape):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = special.ndtr(np.log(x[pos] / median) / shape)
    return out


def _coda_pdf(x, rate):
    return np.where(x >= 0, rate * np.exp(-rate * np.maximum(x, 0.0)), 0.0)


def _coda_cdf(x, rate):
    return np.where(x >= 0, -np.expm1(-rate * np.maximum(x, 0.0)), 0.0)


def sp_delay(rrup: float, beta: float) -> float:
    """S-P delay R (1/beta - 1/alpha) with alpha = sqrt(3) beta."""
    return rrup * (1.0 / beta - 1.0 / (math.sqrt(3.0) * beta))


def central_frequency_at(tau, A, B, floor, ceiling):
    return np.clip(np.exp(A - B * np.log(np.maximum(tau, 0.0) + 1.0)), floor, ceiling)


def _spec_for(s_median, base, params, cfg, nyquist, rate=None):
    t_peak = base["t_s"] + s_median * math.exp(-cfg.s_log_shape ** 2)
    fc_peak = float(central_frequency_at(t_peak - base["t_p"], params.A, params.B,
                                         cfg.fc_floor, nyquist))
    q = params.q0 * fc_peak ** params.n_exp
    natural = 2.0 * math.pi * fc_peak / q
    return EnvelopeSpec(
        base["t_p"], base["t_s"], tuple(cfg.energy_fractions),
        natural if rate is None else rate, 0.0, base["p_median"], cfg.p_log_shape,
        s_median, cfg.s_log_shape, t_peak, fc_peak, q, rate is not None)


def calibrate_envelope(params, scenario, cfg, dt: float) -> EnvelopeSpec:
    """Solve the S-bump scale so the analytic 5-95% interval equals ``params.dsr``.

    When even a vanishing S bump leaves the coda too long for the target,
    the S bump is fixed at half the target width and the coda rate is
    raised instead (``coda_clamped``).
    """
    if not params.dsr > 0:
        raise ValueError("significant duration must be positive")
    target = params.dsr
    nyquist = 0.5 / dt
    t_p = cfg.pre_pad
    delay = sp_delay(scenario.rrup, cfg.beta)
    base = {"t_p": t_p, "t_s": t_p + delay,
            "p_median": cfg.p_median_factor * max(delay, cfg.min_p_window)}

    def mismatch(m):
        return _spec_for(m, base, params, cfg, nyquist).significant_duration() - target

    m_lo = 1e-3 * target
    lo_val = mismatch(m_lo)
    if lo_val <= 0:
        m_hi = target
        for _ in range(60):
            if mismatch(m_hi) > 0:
                break
            m_hi *= 2.0
        m, res = optimize.brentq(mismatch, m_lo, m_hi, xtol=1e-9 * target,
                                 maxiter=50, full_output=True, disp=False)
        spec = _spec_for(m, base, params, cfg, nyquist)
        if not res.converged:
            raise CalibrationError("envelope calibration did not converge in 50 iterations",
                                   spec.significant_duration())
        return spec

    m = 0.5 * target / (2.0 * math.sinh(_Z95 * cfg.s_log_shape))
    natural = _spec_for(m, base, params, cfg, nyquist)

    def rate_mismatch(log_rate):
        s = _spec_for(m, base, params, cfg, nyquist, rate=math.exp(log_rate))
        return s.significant_duration() - target

    lo, hi = math.log(natural.coda_decay_rate), math.log(1e4)
    if rate_mismatch(lo) <= 0:
        return natural
    if rate_mismatch(hi) > 0:
        raise CalibrationError("target duration shorter than the P/S arrivals allow",
                               rate_mismatch(hi) + target)
    log_rate, res = optimize.brentq(rate_mismatch, lo, hi, xtol=1e-12, maxiter=50,
                                    full_output=True, disp=False)
    spec = _spec_for(m, base, params, cfg, nyquist, rate=math.exp(log_rate))
    if not res.converged:
        raise CalibrationError("coda-rate calibration did not converge in 50 iterations",
                               spec.significant_duration())
    return spec


def envelope_grid_length(spec: EnvelopeSpec, dt: float, level: float) -> int:
    """Samples up to the last time Pa stays above ``level`` times its peak."""
    t_hi = spec.quantile(1.0 - 1e-3)
    t = dt * np.arange(int(math.ceil(t_hi / dt)) + 1)
    peak = float(np.max(spec.pdf(t)))
    while spec.pdf(t_hi) >= level * peak:
        t_hi = spec.t_p + 1.5 * (t_hi - spec.t_p)
    t = dt * np.arange(int(math.ceil(t_hi / dt)) + 1)
    above = np.nonzero(spec.pdf(t) >= level * peak)[0]
    return int(above[-1]) + 2


def build_envelope(params, scenario, dt: float, cfg=None):
    """Calibrated envelope spec, the trace time grid and the sampled Pa(t).

    The grid starts at 0 with the P onset after ``cfg.pre_pad`` seconds and
    is extended to an FFT-friendly even length. Pa is zero beyond the
    truncation point and sums to one with weight ``dt``.
    """
    if cfg is None:
        from .sampling import SimulationConfig
        cfg = SimulationConfig(scenario)
    spec = calibrate_envelope(params, scenario, cfg, dt)
    n_signal = envelope_grid_length(spec, dt, cfg.truncation_level)
    n = next_fast_len(n_signal, real=True)
    if n % 2:
        n = next_fast_len(n + 1, real=True)
        while n % 2:
            n = next_fast_len(n + 1, real=True)
    times = dt * np.arange(n)
    pa = spec.pdf(times)
    pa[n_signal:] = 0.0
    pa /= pa.sum() * dt
    spec = replace(spec, total_duration=n * dt)
    return spec, times, pa


def grid_significant_duration(times, pa, dt):
    """5-95% interval of a sampled envelope, crossings interpolated."""
    cum = np.cumsum(pa) * dt
    cum /= cum[-1]
    return _first_crossing(times, cum, 0.95) - _first_crossing(times, cum, 0.05)
