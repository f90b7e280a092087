"""Monte Carlo ensembles and target-spectrum selection."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..metrics import TABULATED_PERIODS, ResponseSpectrum, compute_response_spectrum
from .sampling import GmpeTargets, SimulationConfig, gmpe_targets, sample_params
from .spectrogram import SyntheticMotion, build_spectrogram, synthesize


class EnsembleError(RuntimeError):
    """One or more simulations failed; ``failures`` maps index to exception."""

    def __init__(self, failures: dict[int, BaseException], motions=None):
        idx = sorted(failures)
        shown = ", ".join(f"{i}: {failures[i]}" for i in idx[:5])
        more = "" if len(idx) <= 5 else f" (+{len(idx) - 5} more)"
        super().__init__(f"{len(idx)} simulation(s) failed [{shown}]{more}")
        self.failures = failures
        self.motions = motions


def simulate_one(cfg: SimulationConfig, index: int, targets: GmpeTargets | None = None,
                 compute_spectrum: bool = False, keep_trace: bool = True,
                 periods=TABULATED_PERIODS, method: str = "fast") -> SyntheticMotion:
    """Sample, build and synthesise simulation ``index`` of ``cfg``."""
    params = sample_params(cfg, index, targets)
    model = build_spectrogram(params, cfg.scenario, cfg.dt, cfg)
    motion = synthesize(model, params, rescale=cfg.exact_energy_rescale, method=method)
    spectrum = compute_response_spectrum(motion.ts, periods) if compute_spectrum else None
    return replace(motion, spectrum=spectrum, ts=motion.ts if keep_trace else None)


def simulate_ensemble(cfg: SimulationConfig, n_jobs: int | None = 1,
                      compute_spectra: bool = False, keep_traces: bool = True,
                      periods=TABULATED_PERIODS, indices=None) -> list[SyntheticMotion]:
    """Run ``cfg.n_sims`` independent simulations, returned in index order.

    Each simulation depends only on ``(cfg, index)``, so the result does not
    depend on ``n_jobs``. Failures are collected and raised together as an
    :class:`EnsembleError` carrying the successful motions.
    """
    targets = gmpe_targets(cfg)
    indices = range(cfg.n_sims) if indices is None else list(indices)
    if n_jobs is None or n_jobs < 1:
        n_jobs = os.cpu_count() or 1

    def job(i):
        try:
            return i, simulate_one(cfg, i, targets, compute_spectra, keep_traces, periods), None
        except Exception as exc:  # noqa: BLE001 - reported per index below
            return i, None, exc

    if n_jobs == 1:
        results = [job(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(job, indices))
    motions = [m for _, m, e in results if e is None]
    failures = {i: e for i, _, e in results if e is not None}
    if failures:
        raise EnsembleError(failures, motions)
    return motions


# --- selection -----------------------------------------------------------------

@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    scores: tuple[float, ...]  # mean squared ln-SA error
    motions: tuple[SyntheticMotion, ...]


def ln_sa_errors(motion_sa: np.ndarray, target_sa: np.ndarray) -> np.ndarray:
    """ln(SA_sim / SA_target) per motion (rows) and period (columns)."""
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(motion_sa, dtype=float)) - np.log(np.asarray(target_sa))


def _spectrum_at(motion: SyntheticMotion, periods: np.ndarray) -> np.ndarray:
    spec = motion.spectrum
    if spec is None:
        if motion.ts is None:
            raise ValueError(f"motion {motion.index} has neither a spectrum nor a trace")
        return compute_response_spectrum(motion.ts, periods).sa
    if spec.periods.shape != periods.shape or not np.allclose(spec.periods, periods):
        raise ValueError(f"motion {motion.index} spectrum periods differ from the target")
    return spec.sa


def select_best_match(motions, target: ResponseSpectrum, k: int) -> SelectionResult:
    """The ``k`` motions with the smallest mean squared ln-SA error.

    The error is averaged over every period of ``target``. Ordering is by
    score, then by simulation index, so equal scores resolve the same way
    whatever order the motions arrive in.
    """
    motions = list(motions)
    if not motions:
        raise ValueError("cannot select from an empty ensemble")
    if k < 0 or k > len(motions):
        raise ValueError(f"k must be between 0 and {len(motions)}, got {k}")
    if np.any(target.sa <= 0):
        raise ValueError("target spectrum must be strictly positive")
    sa = np.vstack([_spectrum_at(m, target.periods) for m in motions])
    err = ln_sa_errors(sa, target.sa)
    scores = np.mean(err ** 2, axis=1)
    scores[~np.isfinite(scores)] = np.inf
    order = sorted(range(len(motions)), key=lambda j: (scores[j], motions[j].index))[:k]
    return SelectionResult(tuple(motions[j].index for j in order),
                           tuple(float(scores[j]) for j in order),
                           tuple(motions[j] for j in order))
