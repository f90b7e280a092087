"""
Rock-site ground-motion prediction equations.

Four functional families share the (M_W, R_RUP, V_S30) predictors:

* PGA and 5%-damped SA with a magnitude hinge at ``Mh``;
* Arias intensity with a quadratic magnitude term pivoting at 5.6;
* 5-95% significant duration with a fixed near-source term ``h = 2.5``;
* the intercept ``A`` and log-slope ``ln B`` of the central-frequency decay,
  which use ``ln R_RUP`` with no near-source saturation.

All dispersions are in natural-log units. Coefficients ship as CSV files
in ``stochgm/data`` and can be overridden with files of the same layout.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType

import numpy as np

V_REF = 800.0
MW_RANGE = (4.5, 6.9)
VS30_RANGE = (500.0, 1500.0)

SA_COLUMNS = ("Per. (s)", "a1", "a2", "a3", "a4", "Mh", "b1", "b2", "b3", "h", "c1",
              "ϕ", "τ", "σ")
PARAM_COLUMNS = ("Per. (s)", "H Def.", "a1", "a2", "a3", "b1", "b2", "h", "c1",
                 "ϕ", "τ", "σ")
_ALIASES = {"phi": "ϕ", "φ": "ϕ", "tau": "τ", "sigma": "σ", "period": "Per. (s)",
            "hdef": "H Def."}
_TARGETS = {"AI (m/s)": "AI", "AI": "AI", "SMD (s)": "DSR", "SMD": "DSR", "DSR": "DSR",
            "A": "A", "B": "lnB", "lnB": "lnB", "ln(B)": "lnB"}


class CoefficientParseError(ValueError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


class ScenarioRangeWarning(UserWarning):
    """Predictors outside the range the regressions were derived for."""


@dataclass(frozen=True)
class Scenario:
    mw: float
    rrup: float  # km
    vs30: float  # m/s

    def __post_init__(self):
        if not self.rrup >= 0:
            raise ValueError(f"rrup must be non-negative, got {self.rrup}")
        if not self.vs30 > 0:
            raise ValueError(f"vs30 must be positive, got {self.vs30}")

    def range_issues(self) -> tuple[str, ...]:
        issues = []
        if not MW_RANGE[0] <= self.mw <= MW_RANGE[1]:
            issues.append(f"mw={self.mw} outside [{MW_RANGE[0]}, {MW_RANGE[1]}]")
        if not VS30_RANGE[0] <= self.vs30 <= VS30_RANGE[1]:
            issues.append(f"vs30={self.vs30} outside [{VS30_RANGE[0]:g}, {VS30_RANGE[1]:g}]")
        return tuple(issues)


@dataclass(frozen=True)
class SaCoefficientRow:
    period: float  # 0 encodes PGA
    a1: float
    a2: float
    a3: float
    a4: float
    Mh: float
    b1: float
    b2: float
    b3: float
    h: float
    c1: float
    phi: float
    tau: float
    sigma: float


@dataclass(frozen=True)
class ParamCoefficientRow:
    """One row of the parameter table; absent coefficients are ``None``."""

    target: str  # AI, DSR, A, lnB
    hdef: str  # GM, AM, IND
    a1: float
    a2: float
    a3: float | None
    b1: float
    b2: float | None
    h: float | None
    c1: float
    phi: float
    tau: float
    sigma: float


@dataclass(frozen=True)
class CoefficientTable:
    sa: tuple[SaCoefficientRow, ...]
    params: tuple[ParamCoefficientRow, ...]
    _sa_index: MappingProxyType = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_sa_index",
                           MappingProxyType({r.period: r for r in self.sa}))

    @property
    def periods(self) -> tuple[float, ...]:
        return tuple(r.period for r in self.sa)

    def sa_row(self, period: float) -> SaCoefficientRow:
        try:
            return self._sa_index[float(period)]
        except KeyError:
            avail = ", ".join("PGA" if p == 0 else f"{p:g}" for p in self.periods)
            raise KeyError(f"period {period!r} is not tabulated; available: {avail}") from None

    def param_row(self, target: str, hdef: str) -> ParamCoefficientRow:
        for r in self.params:
            if r.target == target and r.hdef == hdef:
                return r
        avail = sorted(r.hdef for r in self.params if r.target == target)
        raise KeyError(f"no {target} row for horizontal definition {hdef!r}; available: {avail}")


@dataclass(frozen=True)
class Prediction:
    mean_ln: float
    phi: float
    tau: float
    sigma: float
    units: str
    flags: tuple[str, ...] = ()

    @property
    def median(self) -> float:
        return math.exp(self.mean_ln)


@dataclass(frozen=True)
class ResidualDecomposition:
    delta_b: dict  # event id -> between-event residual
    delta_w: tuple  # per input record, same order

    def total(self, events) -> np.ndarray:
        return np.array([self.delta_b[e] for e in events]) + np.asarray(self.delta_w)


# --- coefficient loading ------------------------------------------------------

def _canon(name: str) -> str:
    name = name.strip()
    return _ALIASES.get(name.lower(), _ALIASES.get(name, name))


def _number(text, row, column, allow_absent=False):
    text = text.strip()
    if allow_absent and text.upper() == "X":
        return None
    try:
        value = float(text)
    except ValueError:
        raise CoefficientParseError(f"cannot parse {text!r} as a number", row, column) from None
    if not math.isfinite(value):
        raise CoefficientParseError(f"non-finite value {text!r}", row, column)
    return value


def _read_rows(text, expected):
    reader = csv.reader(io.StringIO(text))
    try:
        header = [_canon(h) for h in next(reader)]
    except StopIteration:
        raise CoefficientParseError("empty coefficient file") from None
    missing = [c for c in expected if c not in header]
    if missing:
        raise CoefficientParseError(f"missing columns {missing}", 1)
    for lineno, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(header):
            raise CoefficientParseError(
                f"expected {len(header)} fields, found {len(raw)}", lineno)
        yield lineno, dict(zip(header, raw))


def parse_sa_table(text: str) -> tuple[SaCoefficientRow, ...]:
    rows = []
    for lineno, rec in _read_rows(text, SA_COLUMNS):
        per = rec["Per. (s)"].strip()
        period = 0.0 if per.upper() == "PGA" else _number(per, lineno, "Per. (s)")
        vals = {c: _number(rec[c], lineno, c) for c in SA_COLUMNS[1:]}
        rows.append(SaCoefficientRow(
            period, vals["a1"], vals["a2"], vals["a3"], vals["a4"], vals["Mh"],
            vals["b1"], vals["b2"], vals["b3"], vals["h"], vals["c1"],
            vals["ϕ"], vals["τ"], vals["σ"]))
    periods = [r.period for r in rows]
    if len(set(periods)) != len(periods):
        raise CoefficientParseError("duplicate periods in SA table")
    return tuple(sorted(rows, key=lambda r: r.period))


def parse_param_table(text: str) -> tuple[ParamCoefficientRow, ...]:
    rows = []
    for lineno, rec in _read_rows(text, PARAM_COLUMNS):
        label = rec["Per. (s)"].strip()
        if label not in _TARGETS:
            raise CoefficientParseError(f"unknown target {label!r}", lineno, "Per. (s)")
        vals = {c: _number(rec[c], lineno, c, allow_absent=True) for c in PARAM_COLUMNS[2:]}
        for c in ("a1", "a2", "b1", "c1", "ϕ", "τ", "σ"):
            if vals[c] is None:
                raise CoefficientParseError("coefficient may not be absent", lineno, c)
        rows.append(ParamCoefficientRow(
            _TARGETS[label], rec["H Def."].strip(), vals["a1"], vals["a2"], vals["a3"],
            vals["b1"], vals["b2"], vals["h"], vals["c1"], vals["ϕ"], vals["τ"], vals["σ"]))
    return tuple(rows)


def _data_text(name):
    return resources.files("stochgm").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def _source_text(source):
    if hasattr(source, "read"):
        return source.read()
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def load_coefficients(sa_source=None, param_source=None) -> CoefficientTable:
    """Load the regression tables, optionally overriding either file.

    Sources are paths or open text files in the shipped CSV layout.
    """
    sa_text = _data_text("sa_coefficients.csv") if sa_source is None else _source_text(sa_source)
    par_text = (_data_text("param_coefficients.csv") if param_source is None
                else _source_text(param_source))
    return CoefficientTable(parse_sa_table(sa_text), parse_param_table(par_text))


_DEFAULT_TABLE = None


def default_table() -> CoefficientTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_coefficients()
    return _DEFAULT_TABLE


# --- predictions ---------------------------------------------------------------

def _flags(s: Scenario):
    issues = s.range_issues()
    for msg in issues:
        warnings.warn(msg, ScenarioRangeWarning, stacklevel=3)
    return issues


def _spreading(b1, b2, mw, rrup, h):
    r = math.sqrt(rrup * rrup + h * h)
    return (b1 + b2 * (mw - 4.5)) * math.log(r), r


def predict_sa(s: Scenario, period: float, table: CoefficientTable | None = None) -> Prediction:
    """ln SA (g) with the magnitude hinge; ``period=0`` gives PGA."""
    c = (table or default_table()).sa_row(period)
    dm = s.mw - c.Mh
    if s.mw <= c.Mh:
        mag = c.a1 + c.a2 * dm + c.a3 * dm * dm
    else:
        mag = c.a1 + c.a4 * dm
    geo, r = _spreading(c.b1, c.b2, s.mw, s.rrup, c.h)
    mean_ln = mag + geo + c.b3 * r + c.c1 * math.log(s.vs30 / V_REF)
    return Prediction(mean_ln, c.phi, c.tau, c.sigma, "g", _flags(s))


def predict_spectrum(s: Scenario, table: CoefficientTable | None = None):
    """Predictions at every tabulated period, PGA (period 0) first."""
    table = table or default_table()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScenarioRangeWarning)
        preds = [predict_sa(s, p, table) for p in table.periods]
    _flags(s)
    return table.periods, preds


def predict_ai(s: Scenario, hdef: str = "GM", table: CoefficientTable | None = None) -> Prediction:
    """ln AI (m/s); horizontal definition AM or GM."""
    if hdef not in ("AM", "GM"):
        raise ValueError(f"Arias intensity is tabulated for AM and GM, not {hdef!r}")
    c = (table or default_table()).param_row("AI", hdef)
    dm = s.mw - 5.6
    geo, _ = _spreading(c.b1, c.b2, s.mw, s.rrup, c.h)
    mean_ln = c.a1 + c.a2 * dm + c.a3 * dm * dm + geo + c.c1 * math.log(s.vs30 / V_REF)
    return Prediction(mean_ln, c.phi, c.tau, c.sigma, "m/s", _flags(s))


def predict_dsr(s: Scenario, hdef: str = "GM", table: CoefficientTable | None = None) -> Prediction:
    """ln D_SR (s); horizontal definition IND or GM."""
    if hdef not in ("IND", "GM"):
        raise ValueError(f"significant duration is tabulated for IND and GM, not {hdef!r}")
    c = (table or default_table()).param_row("DSR", hdef)
    geo, _ = _spreading(c.b1, c.b2, s.mw, s.rrup, c.h)
    mean_ln = c.a1 + c.a2 * (s.mw - 5.6) + geo + c.c1 * math.log(s.vs30 / V_REF)
    return Prediction(mean_ln, c.phi, c.tau, c.sigma, "s", _flags(s))


def predict_fc_params(s: Scenario, table: CoefficientTable | None = None):
    """Predictions of A and ln B. ``B = exp(ln B)``.

    ``mean_ln`` holds A itself for the first prediction (A is already a
    log-frequency) and ln B for the second.
    """
    if s.rrup <= 0:
        raise ValueError("the F_C regressions use ln(R_RUP), which is singular at R_RUP = 0")
    table = table or default_table()
    flags = _flags(s)
    out = []
    for target in ("A", "lnB"):
        c = table.param_row(target, "GM")
        val = (c.a1 + c.a2 * (s.mw - 5.6) + c.b1 * math.log(s.rrup)
               + c.c1 * math.log(s.vs30 / V_REF))
        out.append(Prediction(val, c.phi, c.tau, c.sigma, "-", flags))
    return out[0], out[1]


# --- residuals ------------------------------------------------------------------

def decompose_residuals(records, phi: float, tau: float) -> ResidualDecomposition:
    """Split total residuals into between- and within-event terms.

    ``records`` is a sequence of ``(event_id, total_residual)``. For event i
    with n_i records of mean residual r_i the between-event term is
    ``tau^2 n_i r_i / (n_i tau^2 + phi^2)``; the within-event term is the
    remainder of each record.
    """
    if not (phi > 0 and tau >= 0):
        raise ValueError("phi must be positive and tau non-negative")
    records = list(records)
    if not records:
        raise ValueError("no records to decompose")
    groups: dict = {}
    for event, r in records:
        groups.setdefault(event, []).append(float(r))
    delta_b = {}
    for event, rs in groups.items():
        n = len(rs)
        delta_b[event] = tau * tau * n * (sum(rs) / n) / (n * tau * tau + phi * phi)
    delta_w = tuple(float(r) - delta_b[event] for event, r in records)
    return ResidualDecomposition(delta_b, delta_w)
