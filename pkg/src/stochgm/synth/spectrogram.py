"""
Factorised spectrogram PS(t, f) = E * Pa(t) * shape(t, f) and its
random-phase Fourier synthesis.

``shape(t, .)`` is the source spectrum with the high-cut at F_C(t - t_P),
normalised to unit area on the synthesis frequency grid. The grid is the
real-FFT grid of the trace, f_n = n / (N dt) for n = 1..N/2, so the
Fourier sum can be evaluated with inverse FFTs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..gmpe import Scenario
from ..metrics import G, ScalarMetrics, TimeSeries, compute_arias, scalar_metrics
from .envelope import EnvelopeSpec, build_envelope, central_frequency_at
from .sampling import SampledParams, SimulationConfig, phase_rng
from .source import corner_frequency


@dataclass(frozen=True)
class SpectrogramModel:
    times: np.ndarray
    freqs: np.ndarray
    envelope: np.ndarray  # Pa(t), sums to 1 with weight dt
    fc_tau: np.ndarray  # high-cut frequency per time (Hz)
    corner: float  # source corner frequency (Hz)
    energy: float  # target integral of a^2 (m^2/s^3)
    dt: float
    df: float
    form: str
    params: SampledParams | None = None
    envelope_spec: EnvelopeSpec | None = None

    def low_part(self) -> np.ndarray:
        """Time-independent factor (2 pi f)^2 / corner roll-off."""
        x = self.freqs / self.corner
        low = np.sqrt(1.0 + x * x) if self.form == "as-printed" else 1.0 + x * x
        return (2.0 * np.pi * self.freqs) ** 2 / low

    def high_cut(self, fc_tau) -> np.ndarray:
        """1/sqrt(1 + (f/F)^8) for each F in ``fc_tau`` (rows) and grid frequency."""
        ratio = self.freqs[None, :] / np.atleast_1d(fc_tau)[:, None]
        return 1.0 / np.sqrt(1.0 + ratio ** 8)

    def slice_norms(self, fc_tau=None, chunk: int = 256) -> np.ndarray:
        fc_tau = self.fc_tau if fc_tau is None else np.atleast_1d(fc_tau)
        low = self.low_part()
        out = np.empty(fc_tau.size)
        for s in range(0, fc_tau.size, chunk):
            out[s:s + chunk] = self.high_cut(fc_tau[s:s + chunk]) @ low * self.df
        return out

    def shape(self, rows=None) -> np.ndarray:
        """Normalised frequency shape for the selected time rows."""
        fc = self.fc_tau if rows is None else self.fc_tau[rows]
        s = self.low_part()[None, :] * self.high_cut(fc)
        return s / (s.sum(axis=1, keepdims=True) * self.df)

    def ps(self, rows=None) -> np.ndarray:
        """PS(t, f) for the selected time rows (times x freqs)."""
        env = self.envelope if rows is None else self.envelope[rows]
        return self.energy * env[:, None] * self.shape(rows)

    def total_energy(self, chunk: int = 256) -> float:
        total = 0.0
        for s in range(0, self.times.size, chunk):
            rows = slice(s, s + chunk)
            total += self.ps(rows).sum() * self.dt * self.df
        return float(total)


def build_spectrogram(params: SampledParams, scenario: Scenario, dt: float,
                      cfg: SimulationConfig | None = None) -> SpectrogramModel:
    """Envelope, corner frequency and high-cut track for one simulation.

    The total energy is (2g/pi) AI so the Parseval energy of the synthetic
    equals the drawn Arias intensity.
    """
    if cfg is None:
        cfg = SimulationConfig(scenario, dt=dt)
    spec, times, pa = build_envelope(params, scenario, dt, cfg)
    n = times.size
    df = 1.0 / (n * dt)
    freqs = df * np.arange(1, n // 2 + 1)
    fc_tau = central_frequency_at(times - spec.t_p, params.A, params.B,
                                  cfg.fc_floor, 0.5 / dt)
    corner = corner_frequency(scenario.mw, params.stress_drop, cfg.beta)
    energy = 2.0 * G / math.pi * params.ai
    return SpectrogramModel(times, freqs, pa, fc_tau, corner, energy, dt, df,
                            cfg.spectrum_form, params, spec)


# --- synthesis ------------------------------------------------------------------

def _cheb_nodes(lo, hi, n):
    j = np.arange(n + 1)
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * j / n)
    w = (-1.0) ** j
    w[0] *= 0.5
    w[-1] *= 0.5
    return nodes, w


def _barycentric_matrix(nodes, w, u):
    diff = u[None, :] - nodes[:, None]
    exact = diff == 0
    diff[exact] = 1.0
    m = w[:, None] / diff
    m /= m.sum(axis=0, keepdims=True)
    hit = exact.any(axis=0)
    if hit.any():
        m[:, hit] = exact[:, hit].astype(float)
    return m


def _interpolation_degree(model, u_lo, u_hi, sqrt_low, tol=1e-11, max_degree=1024):
    n = 16
    while True:
        nodes, w = _cheb_nodes(u_lo, u_hi, n)
        mids = 0.5 * (u_lo + u_hi) + 0.5 * (u_hi - u_lo) * np.cos(np.pi * (np.arange(n) + 0.5) / n)
        exact = np.sqrt(model.high_cut(np.exp(mids))) * sqrt_low
        at_nodes = np.sqrt(model.high_cut(np.exp(nodes))) * sqrt_low
        approx = _barycentric_matrix(nodes, w, mids).T @ at_nodes
        err = np.max(np.abs(approx - exact)) / np.max(sqrt_low)
        if err < tol or n >= max_degree:
            return n
        n *= 2


def fourier_sum_direct(model: SpectrogramModel, phases, chunk: int = 128) -> np.ndarray:
    """x(t) = sum_n sqrt(2 PS(t, f_n) df) cos(2 pi f_n t + phi_n), evaluated literally."""
    x = np.zeros(model.times.size)
    for s in range(0, model.times.size, chunk):
        rows = slice(s, s + chunk)
        c = np.sqrt(2.0 * model.ps(rows) * model.df)
        t = model.times[rows]
        x[rows] = np.sum(c * np.cos(2.0 * np.pi * model.freqs[None, :] * t[:, None]
                                    + phases[None, :]), axis=1)
    return x


def fourier_sum_fast(model: SpectrogramModel, phases) -> np.ndarray:
    """Same sum as :func:`fourier_sum_direct` through inverse real FFTs.

    The only time dependence inside the sum is the high-cut frequency, so
    the sum is evaluated at Chebyshev nodes in ln F (one inverse FFT each)
    and interpolated per sample. The node count grows until the
    interpolation error of the coefficients is below 1e-11 of their peak.
    """
    n_t = model.times.size
    n_half = n_t // 2
    x = np.zeros(n_t)
    active = model.envelope > 0
    if not active.any():
        return x
    u = np.log(model.fc_tau[active])
    u_lo, u_hi = float(u.min()), float(u.max())
    sqrt_low = np.sqrt(model.low_part())
    rot = np.exp(1j * phases)

    def node_sums(fc_values):
        coef = np.zeros((fc_values.size, n_half + 1), dtype=complex)
        coef[:, 1:] = np.sqrt(model.high_cut(fc_values)) * (sqrt_low * rot)[None, :]
        coef[:, 1:n_half] *= 0.5 * n_t
        coef[:, n_half] *= n_t
        return np.fft.irfft(coef, n_t, axis=1)

    if u_hi - u_lo < 1e-12:
        fc0 = np.array([math.exp(u_lo)])
        y = node_sums(fc0)[0][active]
        norm = model.slice_norms(fc0)[0]
    else:
        deg = _interpolation_degree(model, u_lo, u_hi, sqrt_low)
        nodes, w = _cheb_nodes(u_lo, u_hi, deg)
        fc_nodes = np.exp(nodes)
        ys = node_sums(fc_nodes)[:, active]
        lag = _barycentric_matrix(nodes, w, u)
        y = np.einsum("jk,jk->k", lag, ys)
        norm = model.slice_norms(fc_nodes) @ lag
    amp = np.sqrt(2.0 * model.energy * model.df * model.envelope[active] / norm)
    x[active] = amp * y
    return x


@dataclass(frozen=True)
class SyntheticMotion:
    ts: TimeSeries | None
    params: SampledParams
    measured: ScalarMetrics
    spectrum: object = None  # ResponseSpectrum when computed
    envelope: EnvelopeSpec | None = None
    index: int = 0


def synthesize(model: SpectrogramModel, params: SampledParams | None = None,
               rescale: bool = True, method: str = "fast", phases=None) -> SyntheticMotion:
    """Random-phase Fourier synthesis of one accelerogram (m/s^2).

    Phases are uniform on [-pi, pi) from the simulation's sub-seed unless
    given. With ``rescale`` the trace is multiplied by one factor so its
    Arias intensity equals ``params.ai``.
    """
    params = params or model.params
    if phases is None:
        phases = phase_rng(params.sub_seed).uniform(-np.pi, np.pi, model.freqs.size)
    if method == "fast":
        x = fourier_sum_fast(model, phases)
    elif method == "direct":
        x = fourier_sum_direct(model, phases)
    else:
        raise ValueError(f"unknown synthesis method {method!r}")
    ts = TimeSeries(x, model.dt)
    if rescale:
        ai, _ = compute_arias(ts)
        if ai > 0:
            ts = ts.scaled(math.sqrt(params.ai / ai))
    if np.any(ts.samples != 0):
        measured = scalar_metrics(ts)
    else:
        measured = ScalarMetrics(0.0, 0.0, 0.0, 0.0, 0.0)
    return SyntheticMotion(ts, params, measured, envelope=model.envelope_spec,
                           index=params.index)
