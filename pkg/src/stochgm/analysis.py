"""End-to-end measurement of one record: scalars, spectrum and F_C decay fit."""

from __future__ import annotations

from dataclasses import dataclass

from .metrics import (TABULATED_PERIODS, InsufficientNoiseError, ResponseSpectrum,
                      ScalarMetrics, SnrProfile, TimeSeries, compute_response_spectrum,
                      compute_snr, scalar_metrics)
from .tfa import (SNR_THRESHOLD, CentralFrequencySeries, FcFit, NoTriggerError,
                  UnusableRecordError, central_frequency_series, default_frequency_grid,
                  fit_fc_model, pick_p_arrival, s_transform)


@dataclass(frozen=True)
class RecordAnalysis:
    metrics: ScalarMetrics
    spectrum: ResponseSpectrum | None
    p_arrival: float | None
    snr: SnrProfile | None = None
    series: CentralFrequencySeries | None = None
    fit: FcFit | None = None
    fc_status: str = "ok"  # ok, no-trigger, insufficient-noise, empty-band, unusable


def fc_analysis(ts: TimeSeries, p_arrival: float, t95: float,
                threshold: float = SNR_THRESHOLD, fmax: float | None = None):
    """SNR, F_C(tau) over [P arrival, t95] and the decay fit.

    The S-transform frequency grid has spacing 1/(t95 - t_P) up to
    ``fmax`` (default Nyquist). Raises the errors of the individual steps.
    """
    snr = compute_snr(ts, p_arrival, t95)
    width = max(t95 - p_arrival, 4.0 * ts.dt)
    freqs = default_frequency_grid(ts.dt, width, fmax)
    tfmap = s_transform(ts, freqs, time_window=(p_arrival, t95))
    series = central_frequency_series(tfmap, snr, (p_arrival, t95), threshold)
    fit = fit_fc_model(series, tfmap)
    return snr, series, fit


def analyze_record(ts: TimeSeries, p_arrival: float | None = None, periods=TABULATED_PERIODS,
                   with_spectrum: bool = True, with_fc: bool = True,
                   fmax: float | None = None) -> RecordAnalysis:
    """Scalar metrics, response spectrum and F_C fit of one trace.

    The P arrival is picked by STA/LTA unless given. F_C failures do not
    raise; they are reported in ``fc_status``.
    """
    metrics = scalar_metrics(ts)
    spectrum = compute_response_spectrum(ts, periods) if with_spectrum else None
    if not with_fc:
        return RecordAnalysis(metrics, spectrum, p_arrival, fc_status="skipped")
    try:
        tp = pick_p_arrival(ts, override=p_arrival)
    except NoTriggerError:
        return RecordAnalysis(metrics, spectrum, None, fc_status="no-trigger")
    try:
        snr, series, fit = fc_analysis(ts, tp, metrics.t95, fmax=fmax)
    except InsufficientNoiseError:
        return RecordAnalysis(metrics, spectrum, tp, fc_status="insufficient-noise")
    except UnusableRecordError:
        return RecordAnalysis(metrics, spectrum, tp, fc_status="unusable")
    except ValueError as exc:
        status = "empty-band" if "SNR" in str(exc) else "too-short"
        return RecordAnalysis(metrics, spectrum, tp, fc_status=status)
    return RecordAnalysis(metrics, spectrum, tp, snr, series, fit)
