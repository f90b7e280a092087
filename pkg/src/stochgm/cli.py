"""Command-line interface: ``stochgm <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import analyze_record
from .gmpe import (Scenario, ScenarioRangeWarning, predict_ai, predict_dsr, predict_fc_params,
                   predict_spectrum)
from .metrics import TABULATED_PERIODS, ResponseSpectrum, ScalarMetrics
from .records import (GAL, filter_records, format_strong_motion, read_metadata_csv,
                      read_strong_motion)
from .report import (SCHEMA_VERSION, _jsonable, config_from_mapping, parse_key_values,
                     read_json, read_trace_csv, write_csv, write_json, write_trace_csv)
from .synth.ensemble import EnsembleError, select_best_match, simulate_ensemble
from .synth.sampling import (SampledParams, SimulationConfig, gmpe_targets,
                             truncated_normal_moments)
from .synth.spectrogram import SyntheticMotion


class CliError(Exception):
    """A user-facing failure; the message is printed without a traceback."""


def _period_label(p: float) -> str:
    return "pga" if p == 0 else f"sa_{p:g}"


# --- predict -----------------------------------------------------------------------------

def _pred_row(target, pred, period=None, hdef=None):
    row = {"target": target, "median": pred.median, "mean_ln": pred.mean_ln, "phi": pred.phi,
           "tau": pred.tau, "sigma": pred.sigma, "units": pred.units}
    if period is not None:
        row["period_s"] = period
    if hdef is not None:
        row["hdef"] = hdef
    return row


def cmd_predict(args) -> int:
    s = Scenario(args.mw, args.rrup, args.vs30)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScenarioRangeWarning)
        if args.param in ("sa", "all"):
            periods, preds = predict_spectrum(s)
            for p, pred in zip(periods, preds):
                rows.append(_pred_row("PGA" if p == 0 else "SA", pred, p))
        if args.param in ("ai", "all"):
            for h in ([args.hdef] if args.hdef else ["GM", "AM"]):
                rows.append(_pred_row("AI", predict_ai(s, h), hdef=h))
        if args.param in ("dsr", "all"):
            for h in ([args.hdef] if args.hdef else ["GM", "IND"]):
                rows.append(_pred_row("DSR", predict_dsr(s, h), hdef=h))
        if args.param in ("fc", "all"):
            a, lnb = predict_fc_params(s)
            rows.append(_pred_row("A", a, hdef="GM") | {"median": a.mean_ln})
            rows.append(_pred_row("lnB", lnb, hdef="GM") | {"median": lnb.mean_ln,
                                                            "B_median": lnb.median})
    payload = {"scenario": asdict(s), "range_flags": list(s.range_issues()), "predictions": rows}
    if args.out:
        write_json(args.out, payload)
    else:
        print(json.dumps({"schema_version": SCHEMA_VERSION, **_jsonable(payload)}, indent=2,
                         ensure_ascii=False))
    return 0


# --- analyze --------------------------------------------------------------------------------

def _load_trace(path: Path):
    with open(path, "rb") as fh:
        head = fh.read(64)
    if head.lstrip().startswith(b"time_s"):
        return read_trace_csv(path)
    return read_strong_motion(path)[1]


def cmd_analyze(args) -> int:
    header = ["file", "n_samples", "dt_s", "pga_m_s2", "pga_g", "ai_m_s", "t5_s", "t95_s",
              "dsr_s", "p_arrival_s", "fc_status", "fc_branch", "fc_A", "fc_B",
              "fc_rms"] + [_period_label(p) + "_g" for p in TABULATED_PERIODS if p > 0]
    rows = []
    for name in args.files:
        path = Path(name)
        try:
            ts = _load_trace(path)
        except (OSError, ValueError) as exc:
            raise CliError(f"{path}: {exc}") from None
        a = analyze_record(ts, p_arrival=args.p_arrival, with_fc=not args.no_fc)
        m, fit = a.metrics, a.fit
        rows.append([str(path), len(ts), ts.dt, m.pga, m.pga_g, m.ai, m.t5, m.t95, m.dsr,
                     a.p_arrival, a.fc_status, fit.branch if fit else None,
                     fit.A if fit else None, fit.B if fit else None,
                     fit.rms_residual if fit else None]
                    + list(a.spectrum.sa[a.spectrum.periods > 0]))
    out = Path(args.out)
    write_csv(out, header, rows)
    print(f"wrote {out} ({len(rows)} record(s))")
    return 0


# --- simulate -------------------------------------------------------------------------------------

_FLAG_TO_FIELD = {"n": "n_sims", "seed": "master_seed", "truncate_sigma": "truncate_sigma",
                  "dt": "dt", "spectrum_form": "spectrum_form"}


def _simulation_config(args) -> SimulationConfig:
    values = parse_key_values(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    for key in ("mw", "rrup", "vs30"):
        if getattr(args, key) is not None:
            values[key] = str(getattr(args, key))
    for flag, field in _FLAG_TO_FIELD.items():
        v = getattr(args, flag)
        if v is not None:
            values[field] = str(v)
    if args.no_truncation:
        values["truncate_sigma"] = "none"
    return config_from_mapping(values)


def ensemble_tables(cfg: SimulationConfig, motions):
    """Rows for the per-simulation statistics CSV and the spectrum summary CSV."""
    periods = np.asarray(motions[0].spectrum.periods)
    sa = np.vstack([m.spectrum.sa for m in motions])
    stat_header = ["index", "sub_seed", "ln_ai_sampled", "ln_dsr_sampled", "A_sampled",
                   "ln_B_sampled", "stress_drop_bar", "q0", "n_exp", "ln_ai_measured",
                   "ln_dsr_measured", "pga_g"] + [_period_label(p) + "_g" for p in periods
                                                  if p > 0]
    stat_rows = []
    for m, row in zip(motions, sa):
        p, q = m.params, m.measured
        stat_rows.append([m.index, str(p.sub_seed), math.log(p.ai), math.log(p.dsr), p.A,
                          math.log(p.B), p.stress_drop, p.q0, p.n_exp, math.log(q.ai),
                          math.log(q.dsr), q.pga_g] + list(row[periods > 0]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScenarioRangeWarning)
        _, preds = predict_spectrum(cfg.scenario)
    gm = {round(p, 6): pr for p, pr in zip(TABULATED_PERIODS, preds)}
    lsa = np.log(sa)
    sum_header = ["period_s", "gmpe_median_g", "gmpe_sigma", "sim_median_g", "sim_p16_g",
                  "sim_p84_g", "ln_bias"]
    sum_rows = []
    for j, per in enumerate(periods):
        pr = gm.get(round(float(per), 6))
        med = float(np.exp(np.median(lsa[:, j])))
        sum_rows.append([per, pr.median if pr else None, pr.sigma if pr else None, med,
                         float(np.exp(np.percentile(lsa[:, j], 16))),
                         float(np.exp(np.percentile(lsa[:, j], 84))),
                         math.log(med / pr.median) if pr else None])
    return (stat_header, stat_rows), (sum_header, sum_rows)


def _manifest(cfg, motions, trace_files, figures, tables):
    sims = []
    for m, tf in zip(motions, trace_files):
        sims.append({"index": m.index, "sub_seed": str(m.params.sub_seed),
                     "params": {k: v for k, v in asdict(m.params).items()
                                if k not in ("sub_seed", "index")},
                     "measured": asdict(m.measured),
                     "sa_g": list(m.spectrum.sa), "trace": tf})
    cfg_echo = cfg.to_dict()
    cfg_echo["master_seed"] = str(cfg.master_seed)
    return {"kind": "ensemble", "config": cfg_echo,
            "periods_s": list(motions[0].spectrum.periods), "simulations": sims,
            "files": {"tables": tables, "figures": figures}}


def cmd_simulate(args) -> int:
    cfg = _simulation_config(args)
    out = Path(args.out_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ScenarioRangeWarning)
        targets = gmpe_targets(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    try:
        motions = simulate_ensemble(cfg, n_jobs=args.jobs, compute_spectra=True,
                                    keep_traces=not args.no_traces)
    except EnsembleError as exc:
        raise CliError(str(exc)) from None
    trace_files = []
    for m in motions:
        if args.no_traces:
            trace_files.append(None)
            continue
        name = f"traces/sim_{m.index:05d}.csv"
        write_trace_csv(out / name, m.ts)
        trace_files.append(name)
    (sh, sr), (ph, pr) = ensemble_tables(cfg, motions)
    write_csv(out / "ensemble_stats.csv", sh, sr)
    write_csv(out / "spectrum_summary.csv", ph, pr)
    figures = []
    if not args.no_plots:
        from .plotting import plot_ensemble_spectra, plot_parameter_histograms
        periods = motions[0].spectrum.periods
        sa = np.vstack([m.spectrum.sa for m in motions])
        plot_ensemble_spectra(periods, sa, [r[1] for r in pr], [r[2] for r in pr],
                              out / "spectra.png",
                              title=f"Mw {cfg.scenario.mw:g}, R {cfg.scenario.rrup:g} km")
        c = cfg.truncate_sigma
        samples = {"ln AI (measured)": [math.log(m.measured.ai) for m in motions],
                   "ln D_SR (measured)": [math.log(m.measured.dsr) for m in motions],
                   "A (sampled)": [m.params.A for m in motions],
                   "ln B (sampled)": [math.log(m.params.B) for m in motions]}
        tgt = {"ln AI (measured)": (targets.ln_ai.mean_ln, targets.ln_ai.sigma, c),
               "ln D_SR (measured)": (targets.ln_dsr.mean_ln, targets.ln_dsr.sigma, c),
               "A (sampled)": (targets.A.mean_ln, targets.A.sigma, c),
               "ln B (sampled)": (targets.ln_b.mean_ln, targets.ln_b.sigma, c)}
        plot_parameter_histograms(samples, tgt, out / "parameters.png")
        figures = ["spectra.png", "parameters.png"]
    manifest = _manifest(cfg, motions, trace_files, figures,
                         ["ensemble_stats.csv", "spectrum_summary.csv"])
    m_ai = truncated_normal_moments(targets.ln_ai.mean_ln, targets.ln_ai.sigma, cfg.truncate_sigma)
    manifest["targets"] = {"ln_ai": asdict(targets.ln_ai), "ln_dsr": asdict(targets.ln_dsr),
                           "A": asdict(targets.A), "ln_b": asdict(targets.ln_b),
                           "ln_ai_truncated_mean": m_ai[0], "flags": list(targets.flags)}
    write_json(out / "manifest.json", manifest)
    print(f"wrote {len(motions)} simulation(s) to {out}")
    return 0


# --- select ------------------------------------------------------------------------------------------

def _read_target(path: Path, column: str | None) -> ResponseSpectrum:
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "period_s" not in cols:
            raise CliError(f"{path}: target spectrum needs a period_s column")
        col = column or next((c for c in ("sa_g", "gmpe_median_g") if c in cols), None)
        if col is None or col not in cols:
            raise CliError(f"{path}: no spectral column (expected sa_g or gmpe_median_g)")
        rows = [(float(r["period_s"]), float(r[col])) for r in reader]
    rows.sort()
    return ResponseSpectrum([p for p, _ in rows], [v for _, v in rows])


def cmd_select(args) -> int:
    doc = read_json(args.ensemble)
    if doc.get("kind") != "ensemble":
        raise CliError(f"{args.ensemble}: not an ensemble manifest")
    target = _read_target(Path(args.target), args.column)
    periods = np.asarray(doc["periods_s"], dtype=float)
    cols = []
    for p in target.periods:
        hit = np.nonzero(np.isclose(periods, p, rtol=1e-6, atol=1e-9))[0]
        if hit.size == 0:
            raise CliError(f"target period {p:g} s is not in the ensemble manifest")
        cols.append(int(hit[0]))
    motions = []
    for sim in doc["simulations"]:
        params = SampledParams(**sim["params"], sub_seed=int(sim["sub_seed"]), index=sim["index"])
        spec = ResponseSpectrum(target.periods, np.asarray(sim["sa_g"])[cols])
        motions.append(SyntheticMotion(None, params, ScalarMetrics(**sim["measured"]),
                                       spectrum=spec, index=sim["index"]))
    if args.k < 0:
        raise CliError("--k must be non-negative")
    if args.k > len(motions):
        raise CliError(f"--k {args.k} exceeds the ensemble size {len(motions)}")
    result = select_best_match(motions, target, args.k) if motions else None
    by_index = {s["index"]: s for s in doc["simulations"]}
    chosen = []
    if result is not None:
        for rank, (i, score) in enumerate(zip(result.indices, result.scores), 1):
            chosen.append({"rank": rank, "index": i, "mse_ln_sa": score,
                           "trace": by_index[i]["trace"], "sub_seed": by_index[i]["sub_seed"]})
    payload = {"kind": "selection", "ensemble": str(args.ensemble), "target": str(args.target),
               "periods_s": list(target.periods), "target_sa_g": list(target.sa), "k": args.k,
               "selection": chosen}
    write_json(args.out, payload)
    print(f"selected {len(chosen)} of {len(motions)} motion(s) -> {args.out}")
    return 0


# --- parse / filter ------------------------------------------------------------------------------------

def cmd_parse(args) -> int:
    path = Path(args.file)
    smf, ts = read_strong_motion(path)
    out = Path(args.out_dir)
    stem = path.name.replace(".", "_")
    write_trace_csv(out / f"{stem}.csv", ts)
    header = {"file": str(path), "header": smf.header, "n_samples": int(smf.counts.size),
              "dt_s": ts.dt, "scale_gal_per_count": [smf.scale.numerator, smf.scale.denominator],
              "pga_gal": float(np.max(np.abs(ts.samples))) / GAL}
    write_json(out / f"{stem}.header.json", header)
    if args.roundtrip:
        (out / f"{stem}.roundtrip.txt").write_text(format_strong_motion(smf), encoding="ascii")
    print(f"wrote {out / (stem + '.csv')} ({smf.counts.size} samples)")
    return 0


def cmd_filter(args) -> int:
    rows = read_metadata_csv(Path(args.metadata).read_text(encoding="utf-8"))
    report = filter_records(rows)
    write_csv(args.out, ["record_id", "accepted", "rule"],
              [[d.record_id, d.accepted, d.rule] for d in report.decisions])
    counts = ", ".join(f"{k}={v}" for k, v in sorted(report.counts().items()))
    print(f"filtered {len(rows)} record(s): {counts} -> {args.out}")
    return 0


# --- entry point --------------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochgm", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("predict", help="GMPE medians and dispersions for a scenario")
    q.add_argument("--mw", type=float, required=True)
    q.add_argument("--rrup", type=float, required=True, help="rupture distance (km)")
    q.add_argument("--vs30", type=float, required=True, help="m/s")
    q.add_argument("--param", choices=("sa", "ai", "dsr", "fc", "all"), default="all")
    q.add_argument("--hdef", choices=("GM", "AM", "IND"), default=None)
    q.add_argument("--out", default=None, help="JSON file (default: stdout)")
    q.set_defaults(func=cmd_predict)

    q = sub.add_parser("analyze", help="metrics, F_C fit and SA of records")
    q.add_argument("files", nargs="+")
    q.add_argument("--out", default="analysis.csv")
    q.add_argument("--p-arrival", type=float, default=None, help="override the P pick (s)")
    q.add_argument("--no-fc", action="store_true", help="skip the S-transform analysis")
    q.set_defaults(func=cmd_analyze)

    q = sub.add_parser("simulate", help="generate a stochastic ensemble")
    q.add_argument("--config", default=None, help="key = value file; flags override it")
    q.add_argument("--mw", type=float)
    q.add_argument("--rrup", type=float)
    q.add_argument("--vs30", type=float)
    q.add_argument("--n", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--truncate-sigma", type=float)
    q.add_argument("--no-truncation", action="store_true")
    q.add_argument("--dt", type=float)
    q.add_argument("--spectrum-form", choices=("as-printed", "brune-standard"))
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--out-dir", default="ensemble")
    q.add_argument("--no-traces", action="store_true")
    q.add_argument("--no-plots", action="store_true")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("select", help="rank ensemble motions against a target spectrum")
    q.add_argument("--ensemble", required=True, help="manifest.json from simulate")
    q.add_argument("--target", required=True, help="CSV with period_s and sa_g columns")
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--column", default=None, help="spectral column of the target CSV")
    q.add_argument("--out", default="selection.json")
    q.set_defaults(func=cmd_select)

    q = sub.add_parser("parse", help="convert a strong-motion file to CSV + JSON")
    q.add_argument("file")
    q.add_argument("--out-dir", default=".")
    q.add_argument("--roundtrip", action="store_true", help="also re-render the record")
    q.set_defaults(func=cmd_parse)

    q = sub.add_parser("filter", help="apply the dataset selection rules to a metadata CSV")
    q.add_argument("metadata")
    q.add_argument("--out", default="filter_report.csv")
    q.set_defaults(func=cmd_filter)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"stochgm: error: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"stochgm: error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
