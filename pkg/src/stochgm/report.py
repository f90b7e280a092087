"""CSV/JSON output, trace files and key = value configuration."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .gmpe import Scenario
from .metrics import TimeSeries
from .synth.sampling import SimulationConfig

SCHEMA_VERSION = "1.0"
TRACE_COLUMNS = ("time_s", "acc_m_s2")


def fmt(value) -> str:
    """Decimal text with 9 significant digits; blanks for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return f"{v:.9g}"
    return str(value)


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a sibling temporary file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write(path, csv_text(header, rows))


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.9g}") if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    doc = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    return atomic_write(path, json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def read_json(path, expect_version: bool = True) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if expect_version and doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: expected schema_version {SCHEMA_VERSION}, "
                         f"got {doc.get('schema_version')!r}")
    return doc


# --- traces ---------------------------------------------------------------------------

def trace_csv_text(ts: TimeSeries) -> str:
    return csv_text(TRACE_COLUMNS, zip(ts.times, ts.samples))


def write_trace_csv(path, ts: TimeSeries) -> Path:
    return atomic_write(path, trace_csv_text(ts))


def read_trace_csv(path) -> TimeSeries:
    """Read a ``time_s, acc_m_s2`` CSV; the time step must be uniform."""
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(TRACE_COLUMNS)}")
        data = np.array([[float(a), float(b)] for a, b in reader], dtype=float)
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least 2 samples")
    steps = np.diff(data[:, 0])
    dt = float(np.mean(steps))
    if np.max(np.abs(steps - dt)) > 1e-6 * max(dt, 1.0):
        raise ValueError(f"{path}: time column is not uniformly sampled")
    return TimeSeries(data[:, 1], dt, float(data[0, 0]))


# --- configuration -----------------------------------------------------------------------

_SCENARIO_KEYS = ("mw", "rrup", "vs30")


def parse_key_values(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {no}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {no}: empty key")
        out[key] = value
    return out


def _convert(text: str, default):
    low = text.strip().lower()
    if isinstance(default, bool):
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if low in ("none", "null", ""):
        return None
    if isinstance(default, tuple):
        parts = [p for p in text.replace("(", "").replace(")", "").split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None:
        return float(text)
    return text.strip()


def config_from_mapping(values: dict, base: SimulationConfig | None = None) -> SimulationConfig:
    """Build a config from string values; scenario keys are ``mw``, ``rrup``, ``vs30``."""
    known = {f.name: f for f in dataclasses.fields(SimulationConfig)} | {
        k: None for k in _SCENARIO_KEYS}
    unknown = sorted(set(values) - set(known) - {"scenario"})
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    if base is None:
        missing = [k for k in _SCENARIO_KEYS if k not in values]
        if missing:
            raise ValueError(f"scenario keys missing: {', '.join(missing)}")
        scenario = Scenario(*(float(values[k]) for k in _SCENARIO_KEYS))
        base = SimulationConfig(scenario)
    else:
        s = base.scenario
        scenario = Scenario(*(float(values[k]) if k in values else getattr(s, k)
                              for k in _SCENARIO_KEYS))
    kwargs = {"scenario": scenario}
    for key, text in values.items():
        if key in _SCENARIO_KEYS or key == "scenario":
            continue
        default = getattr(base, key)
        try:
            kwargs[key] = _convert(str(text), default)
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from None
    return dataclasses.replace(base, **kwargs)


def read_config(path) -> SimulationConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_mapping(parse_key_values(fh.read()))


def config_text(cfg: SimulationConfig) -> str:
    """Inverse of :func:`read_config` for every field."""
    lines = [f"mw = {fmt(cfg.scenario.mw)}", f"rrup = {fmt(cfg.scenario.rrup)}",
             f"vs30 = {fmt(cfg.scenario.vs30)}"]
    for f in dataclasses.fields(cfg):
        if f.name == "scenario":
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(fmt(x) for x in v)
        elif v is None:
            v = "none"
        else:
            v = fmt(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
