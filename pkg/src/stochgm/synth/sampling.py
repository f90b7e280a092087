"""Monte Carlo configuration, seeding and parameter draws."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import special

from ..gmpe import (Prediction, Scenario, ScenarioRangeWarning, predict_ai,
                    predict_dsr, predict_fc_params)

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15


def mix64(master_seed: int, index: int) -> int:
    """SplitMix64 finaliser applied to ``master_seed + (index + 1) * golden``."""
    z = (int(master_seed) + (int(index) + 1) * GOLDEN64) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def param_rng(sub_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64([sub_seed, 0]))


def phase_rng(sub_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64([sub_seed, 1]))


@dataclass(frozen=True)
class SimulationConfig:
    scenario: Scenario
    n_sims: int = 1
    dt: float = 0.01
    master_seed: int = 0
    truncate_sigma: float | None = 1.0
    stress_drop_log10_bounds: tuple[float, float] = (0.0, 2.0)
    q0_bounds: tuple[float, float] = (45.0, 140.0)
    n_exponent_bounds: tuple[float, float] = (0.5, 0.9)
    beta: float = 3.6
    spectrum_form: str = "as-printed"
    exact_energy_rescale: bool = True
    hdef_ai: str = "GM"
    hdef_dsr: str = "GM"
    # envelope reconstruction
    energy_fractions: tuple[float, float, float] = (0.05, 0.85, 0.10)
    p_log_shape: float = 1.0
    s_log_shape: float = 0.5
    min_p_window: float = 0.2
    p_median_factor: float = 1.0
    pre_pad: float = 1.0
    truncation_level: float = 1e-6
    fc_floor: float = 0.2

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.truncate_sigma is not None and self.truncate_sigma < 0:
            raise ValueError("truncate_sigma must be non-negative")
        for name in ("stress_drop_log10_bounds", "q0_bounds", "n_exponent_bounds"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be ordered, got {(lo, hi)}")
        if self.spectrum_form not in ("as-printed", "brune-standard"):
            raise ValueError(f"unknown spectrum_form {self.spectrum_form!r}")
        fr = self.energy_fractions
        if min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-12:
            raise ValueError("energy fractions must be positive and sum to 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = asdict(self.scenario)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        d = dict(d)
        d["scenario"] = Scenario(**d["scenario"])
        names = {f.name for f in fields(cls)}
        kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in names}
        return cls(**kwargs)


@dataclass(frozen=True)
class GmpeTargets:
    ln_ai: Prediction
    ln_dsr: Prediction
    A: Prediction
    ln_b: Prediction
    flags: tuple[str, ...] = field(default=())


def gmpe_targets(cfg: SimulationConfig) -> GmpeTargets:
    """Predictions driving the normal draws; range warnings are collected once."""
    s = cfg.scenario
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScenarioRangeWarning)
        ai = predict_ai(s, cfg.hdef_ai)
        dsr = predict_dsr(s, cfg.hdef_dsr)
        a, lnb = predict_fc_params(s)
    flags = s.range_issues()
    for msg in flags:
        warnings.warn(msg, ScenarioRangeWarning, stacklevel=2)
    return GmpeTargets(ai, dsr, a, lnb, flags)


@dataclass(frozen=True)
class SampledParams:
    ai: float  # m/s
    dsr: float  # s
    A: float
    B: float
    stress_drop: float  # bars
    q0: float
    n_exp: float
    sub_seed: int
    index: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def truncated_normal_ppf(u, mean, sigma, bound):
    """Inverse CDF of N(mean, sigma) truncated at +/- bound sigmas.

    ``bound=None`` means no truncation; ``bound=0`` returns the mean.
    """
    if bound is None:
        return mean + sigma * special.ndtri(u)
    if bound == 0:
        return mean + 0.0 * u
    lo = special.ndtr(-bound)
    hi = special.ndtr(bound)
    return mean + sigma * special.ndtri(lo + u * (hi - lo))


def truncated_normal_moments(mean, sigma, bound):
    """Mean and standard deviation of the symmetric truncated normal."""
    if bound is None:
        return mean, sigma
    if bound == 0:
        return mean, 0.0
    z = 2.0 * special.ndtr(bound) - 1.0
    pdf = math.exp(-0.5 * bound * bound) / math.sqrt(2.0 * math.pi)
    var = 1.0 - 2.0 * bound * pdf / z
    return mean, sigma * math.sqrt(var)


def sample_params(cfg: SimulationConfig, index: int,
                  targets: GmpeTargets | None = None) -> SampledParams:
    """Draw one simulation's parameters from its index-derived sub-seed.

    Uniform draws are taken in a fixed order: ln AI, ln D_SR, A, ln B,
    log10(stress drop), Q0, N.
    """
    if targets is None:
        targets = gmpe_targets(cfg)
    sub_seed = mix64(cfg.master_seed, index)
    u = param_rng(sub_seed).random(7)
    c = cfg.truncate_sigma
    ln_ai = truncated_normal_ppf(u[0], targets.ln_ai.mean_ln, targets.ln_ai.sigma, c)
    ln_dsr = truncated_normal_ppf(u[1], targets.ln_dsr.mean_ln, targets.ln_dsr.sigma, c)
    A = truncated_normal_ppf(u[2], targets.A.mean_ln, targets.A.sigma, c)
    ln_b = truncated_normal_ppf(u[3], targets.ln_b.mean_ln, targets.ln_b.sigma, c)
    lo, hi = cfg.stress_drop_log10_bounds
    stress_drop = 10.0 ** (lo + u[4] * (hi - lo))
    lo, hi = cfg.q0_bounds
    q0 = lo + u[5] * (hi - lo)
    lo, hi = cfg.n_exponent_bounds
    n_exp = lo + u[6] * (hi - lo)
    return SampledParams(float(math.exp(ln_ai)), float(math.exp(ln_dsr)), float(A),
                         float(math.exp(ln_b)), float(stress_drop), float(q0),
                         float(n_exp), sub_seed, index)
