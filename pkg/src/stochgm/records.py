"""
Strong-motion ASCII records (K-NET / KiK-net layout) and dataset filters.

A record is a block of ``key value`` header lines followed by
whitespace-separated integer counts. Header keys are matched against an
alias list because spellings differ between logger generations. Counts
are converted with the ``Scale Factor`` (gal per count) and returned in
m/s^2 with the mean of the first second removed.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .metrics import ScalarMetrics, TimeSeries

GAL = 0.01  # m/s^2
ALLOWED_RATES = (100.0, 200.0)
KEY_WIDTH = 18

# canonical name -> accepted header spellings (compared case-insensitively,
# ignoring whitespace and dots)
HEADER_ALIASES = {
    "origin_time": ("Origin Time", "Origin time", "Event Time"),
    "event_lat": ("Lat.", "Latitude", "Event Lat."),
    "event_lon": ("Long.", "Lon.", "Longitude", "Event Long."),
    "depth_km": ("Depth. (km)", "Depth (km)", "Depth(km)", "Depth."),
    "magnitude": ("Mag.", "Magnitude", "Mag"),
    "station_code": ("Station Code", "Station", "Stn. Code"),
    "station_lat": ("Station Lat.", "Stn. Lat."),
    "station_lon": ("Station Long.", "Station Lon.", "Stn. Long."),
    "station_height_m": ("Station Height(m)", "Station Height (m)", "Stn. Height(m)"),
    "record_time": ("Record Time", "Start Time"),
    "sampling_hz": ("Sampling Freq(Hz)", "Sampling Freq.(Hz)", "Sampling Freq (Hz)",
                    "Sampling Rate", "Sampling Frequency"),
    "duration_s": ("Duration Time(s)", "Duration Time (s)", "Duration(s)", "Duration"),
    "direction": ("Dir.", "Direction", "Component"),
    "scale_factor": ("Scale Factor", "Scale"),
    "max_acc_gal": ("Max. Acc. (gal)", "Max. Acc.(gal)", "Max Acc (gal)", "Max. Acc."),
    "last_correction": ("Last Correction", "Correction Time"),
    "memo": ("Memo.", "Memo", "Comment"),
}
CANONICAL_LABELS = {k: v[0] for k, v in HEADER_ALIASES.items()}
MANDATORY = ("sampling_hz", "scale_factor")


def _norm(key: str) -> str:
    return re.sub(r"[\s.]", "", key).lower()


_LOOKUP = {_norm(a): canon for canon, aliases in HEADER_ALIASES.items() for a in aliases}
# longest aliases first so "Station Lat." wins over "Lat."
_PREFIXES = sorted(((a, c) for c, al in HEADER_ALIASES.items() for a in al),
                   key=lambda p: -len(p[0]))


class ParseError(ValueError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class StrongMotionFile:
    header: dict  # canonical key -> raw string, in file order
    counts: np.ndarray  # int64

    @property
    def sampling_hz(self) -> float:
        return parse_sampling(self.header["sampling_hz"])

    @property
    def scale(self) -> Fraction:
        """Gal per count."""
        return parse_scale_factor(self.header["scale_factor"])

    @property
    def acceleration_gal(self) -> np.ndarray:
        s = self.scale
        return self.counts * (s.numerator / s.denominator)


def parse_sampling(text: str, line=None) -> float:
    m = re.match(r"^\s*([0-9]*\.?[0-9]+)\s*(hz)?\s*$", text, re.IGNORECASE)
    if not m:
        raise ParseError(f"cannot read sampling frequency {text!r}", line)
    hz = float(m.group(1))
    if hz not in ALLOWED_RATES:
        raise ParseError(f"sampling frequency {hz:g} Hz is not 100 or 200 Hz", line)
    return hz


def parse_scale_factor(text: str, line=None) -> Fraction:
    """``"3920(gal)/6182761"`` -> Fraction(3920, 6182761) gal per count."""
    m = re.match(r"^\s*([0-9]*\.?[0-9]+)\s*\(gal\)\s*/\s*([0-9]*\.?[0-9]+)\s*$", text,
                 re.IGNORECASE)
    if not m:
        raise ParseError(f"cannot read scale factor {text!r}", line)
    num, den = Fraction(m.group(1)), Fraction(m.group(2))
    if num <= 0 or den <= 0:
        raise ParseError(f"scale factor must be positive, got {text!r}", line)
    return num / den


def _split_header(line: str):
    for alias, canon in _PREFIXES:
        if line[:len(alias)].lower() == alias.lower():
            rest = line[len(alias):]
            if not rest or rest[0].isspace():
                return canon, rest.strip()
    key = line[:KEY_WIDTH].strip()
    canon = _LOOKUP.get(_norm(key))
    if canon is not None:
        return canon, line[KEY_WIDTH:].strip()
    return None, None


def parse_strong_motion(data: bytes | str, noise_seconds: float = 1.0):
    """Parse one record into ``(StrongMotionFile, TimeSeries)``.

    The header ends at ``Memo.`` or at the first line of integers. Errors
    carry the offending line number.
    """
    text = data.decode("ascii", errors="strict") if isinstance(data, bytes) else data
    lines = text.splitlines()
    header: dict[str, str] = {}
    where: dict[str, int] = {}
    i = 0
    while i < len(lines):
        raw = lines[i].rstrip()
        if not raw.strip():
            i += 1
            continue
        if re.match(r"^\s*[-+]?\d+(\s+[-+]?\d+)*\s*$", raw) and "scale_factor" in header:
            break
        key, value = _split_header(raw)
        if key is None:
            raise ParseError(f"unrecognised header line {raw.strip()!r}", i + 1)
        header[key] = value
        where[key] = i + 1
        i += 1
        if key == "memo":
            break
    for key in MANDATORY:
        if key not in header:
            raise ParseError(f"missing mandatory header key {CANONICAL_LABELS[key]!r}", i + 1)
    hz = parse_sampling(header["sampling_hz"], where["sampling_hz"])
    scale = parse_scale_factor(header["scale_factor"], where["scale_factor"])

    counts = []
    for j in range(i, len(lines)):
        for tok in lines[j].split():
            try:
                counts.append(int(tok))
            except ValueError:
                raise ParseError(f"non-integer sample {tok!r}", j + 1) from None
    if len(counts) < 2:
        raise ParseError("record holds fewer than 2 samples", len(lines))
    counts = np.asarray(counts, dtype=np.int64)
    dt = 1.0 / hz
    if "duration_s" in header:
        try:
            dur = float(header["duration_s"])
        except ValueError:
            raise ParseError(f"cannot read duration {header['duration_s']!r}",
                             where["duration_s"]) from None
        if abs(counts.size * dt - dur) > dt + 1e-9:
            raise ParseError(f"{counts.size} samples at {hz:g} Hz do not span the "
                             f"declared {dur:g} s", where["duration_s"])
    smf = StrongMotionFile(header, counts)
    acc = counts * (float(scale.numerator) / float(scale.denominator)) * GAL
    n0 = max(1, min(acc.size, int(round(noise_seconds * hz))))
    acc = acc - acc[:n0].mean()
    return smf, TimeSeries(acc, dt)


def read_strong_motion(path):
    with open(path, "rb") as fh:
        return parse_strong_motion(fh.read())


def format_strong_motion(smf: StrongMotionFile, per_line: int = 8) -> str:
    """Render a record in the fixed-width layout read by :func:`parse_strong_motion`."""
    out = io.StringIO()
    for key, value in smf.header.items():
        out.write(f"{CANONICAL_LABELS[key]:<{KEY_WIDTH}}{value}\n")
    if "memo" not in smf.header:
        out.write(f"{CANONICAL_LABELS['memo']}\n")
    c = smf.counts
    # 8-character fields, widened so neighbouring values never touch
    width = max(8, max(len(str(int(c.min()))), len(str(int(c.max())))) + 1)
    for s in range(0, c.size, per_line):
        out.write("".join(f"{v:{width}d}" for v in c[s:s + per_line]) + "\n")
    return out.getvalue()


def counts_from_acceleration(acc: np.ndarray, scale: Fraction) -> np.ndarray:
    """Quantise m/s^2 to integer counts for a given gal-per-count scale."""
    return np.rint(np.asarray(acc) / GAL / (scale.numerator / scale.denominator)).astype(np.int64)


# --- dataset filters -------------------------------------------------------------

MIN_MW = 4.5
MIN_VS30 = 500.0
MAX_DEPTH = 25.0
MIN_PGA_GAL = 2.5
RULES = ("incomplete-metadata", "magnitude", "vs30", "depth", "pga", "external")
METADATA_COLUMNS = ("record_id", "mw", "depth_km", "distance_km", "distance_kind",
                    "vs30", "network", "pga_gal")


@dataclass(frozen=True)
class RecordMetadata:
    mw: float | None
    depth: float | None  # km
    distance: float | None  # km
    distance_kind: str | None  # "rrup" or "rhyp"
    vs30: float | None
    network: str | None = None  # "K-NET" or "KiK-net"
    pga_gal: float | None = None
    record_id: str = ""


@dataclass(frozen=True)
class FilterDecision:
    record_id: str
    accepted: bool
    rule: str | None  # first failing rule, None when accepted


@dataclass(frozen=True)
class FilterReport:
    decisions: tuple[FilterDecision, ...] = field(default=())

    @property
    def accepted(self) -> tuple[str, ...]:
        return tuple(d.record_id for d in self.decisions if d.accepted)

    def counts(self) -> dict[str, int]:
        out = {"accepted": 0}
        for d in self.decisions:
            key = "accepted" if d.accepted else d.rule
            out[key] = out.get(key, 0) + 1
        return out


def _finite(v):
    return v is not None and isinstance(v, (int, float)) and math.isfinite(v)


def apply_dataset_filters(meta: RecordMetadata, metrics: ScalarMetrics | None = None,
                          external: Callable[[RecordMetadata], bool] | None = None
                          ) -> FilterDecision:
    """Accept iff Mw >= 4.5, Vs30 >= 500 m/s, depth <= 25 km and PGA >= 2.5 gal.

    PGA comes from ``metrics`` when given, otherwise from ``meta.pga_gal``.
    ``external`` is an optional extra predicate (for instance a
    magnitude-distance cut) checked last.
    """
    pga = metrics.pga / GAL if metrics is not None else meta.pga_gal
    needed = (meta.mw, meta.vs30, meta.depth, pga)
    if not all(_finite(v) for v in needed):
        return FilterDecision(meta.record_id, False, "incomplete-metadata")
    if meta.distance_kind is not None and meta.distance_kind not in ("rrup", "rhyp"):
        return FilterDecision(meta.record_id, False, "incomplete-metadata")
    if meta.mw < MIN_MW:
        return FilterDecision(meta.record_id, False, "magnitude")
    if meta.vs30 < MIN_VS30:
        return FilterDecision(meta.record_id, False, "vs30")
    if meta.depth > MAX_DEPTH:
        return FilterDecision(meta.record_id, False, "depth")
    if pga < MIN_PGA_GAL:
        return FilterDecision(meta.record_id, False, "pga")
    if external is not None and not external(meta):
        return FilterDecision(meta.record_id, False, "external")
    return FilterDecision(meta.record_id, True, None)


def _opt_float(text):
    text = (text or "").strip()
    if not text:
        return None
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def read_metadata_csv(text: str) -> list[RecordMetadata]:
    """Rows of a metadata CSV; blank or non-numeric cells become missing values."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or "record_id" not in reader.fieldnames:
        raise ParseError("metadata CSV needs a header row with a record_id column", 1)
    unknown = set(reader.fieldnames) - set(METADATA_COLUMNS)
    if unknown:
        raise ParseError(f"unknown metadata columns {sorted(unknown)}", 1)
    rows = []
    for row in reader:
        kind = (row.get("distance_kind") or "").strip() or None
        net = (row.get("network") or "").strip() or None
        rows.append(RecordMetadata(_opt_float(row.get("mw")), _opt_float(row.get("depth_km")),
                                   _opt_float(row.get("distance_km")), kind,
                                   _opt_float(row.get("vs30")), net,
                                   _opt_float(row.get("pga_gal")), row["record_id"]))
    return rows


def filter_records(rows, external=None) -> FilterReport:
    return FilterReport(tuple(apply_dataset_filters(r, external=external) for r in rows))
