"""Writing experiment reports and plot data.

Machine-facing CSVs carry 17 significant digits; ``summary.txt`` rounds to
three decimals.  Apart from the wall-clock timing files, every file is
a deterministic function of the configuration, data and seeds.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .pipeline import METRICS, EvaluationMode, ExperimentReport
from .spa import LossKind

__all__ = ["TIMING_FILES", "emit_plot_data", "write_report"]

TIMING_FILES = ("timing.csv", "timing_runs.csv")


def _f(v) -> str:
    if v is None:
        return "failed"
    v = float(v)
    return "nan" if not np.isfinite(v) else format(v, ".17g")


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _forecast_rows(report: ExperimentReport, horizon: int, label: str):
    fset = report.forecasts[(horizon, label)]
    n_est = report.config.split.n_estimation
    targets = np.arange(n_est, len(report.prices))
    pooled = report.config.evaluation is EvaluationMode.POOLED
    leads = range(1, horizon + 1) if pooled else []
    cols = [fset.at_lead(horizon, targets)] + [fset.at_lead(h, targets) for h in leads]
    header = ["date", "actual", "prev_actual", "predicted"] + [f"lead_{h}" for h in leads]
    rows = []
    for i, t in enumerate(targets):
        rows.append(
            [str(report.dates[t]), _f(report.prices[t]), _f(report.prices[t - 1])] + [_f(c[i]) for c in cols]
        )
    return header, rows


def write_report(report: ExperimentReport, out_dir) -> list[Path]:
    """Write all report files into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = report.config
    labels = report.labels
    written = []

    rows = [[m, h] + [_f(report.median_accuracy(m, h, lbl)) for lbl in labels] for m in METRICS for h in cfg.horizons]
    written.append(_write_csv(out / "accuracy.csv", ["metric", "horizon"] + labels, rows))
    rows = [
        [m, h, lbl, r, _f(report.accuracy.get((r, m, h, lbl)))]
        for m in METRICS
        for h in cfg.horizons
        for lbl in labels
        for r in report.runs
    ]
    written.append(_write_csv(out / "accuracy_runs.csv", ["metric", "horizon", "model", "run", "value"], rows))

    rows = [[k.value, h] + [_f(report.median_spa(k, h, lbl)) for lbl in labels] for k in LossKind for h in cfg.horizons]
    written.append(_write_csv(out / "spa_pvalues.csv", ["loss", "horizon"] + labels, rows))
    rows = []
    for k in LossKind:
        for h in cfg.horizons:
            for lbl in labels:
                for r in report.runs:
                    res = report.spa.get((r, k, h, lbl))
                    vals = [None] * 4 if res is None else [res.statistic, res.p_value, res.p_lower, res.p_upper]
                    rows.append([k.value, h, lbl, r] + [_f(v) for v in vals])
    header = ["loss", "horizon", "base_model", "run", "statistic", "p_consistent", "p_lower", "p_upper"]
    written.append(_write_csv(out / "spa_runs.csv", header, rows))

    rows = [[h] + [_f(report.median_timing(h, lbl)) for lbl in labels] for h in cfg.horizons]
    written.append(_write_csv(out / "timing.csv", ["horizon"] + labels, rows))
    rows = [[h, lbl, r, _f(report.timing.get((r, h, lbl)))] for h in cfg.horizons for lbl in labels for r in report.runs]
    written.append(_write_csv(out / "timing_runs.csv", ["horizon", "model", "run", "seconds"], rows))

    rows = [[t, comp, kind, n, " ".join(map(str, lags)) if lags else "failed"] for t, comp, kind, n, lags in report.lags]
    written.append(_write_csv(out / "lags.csv", ["technique", "component", "criterion", "lead_or_horizon", "lags"], rows))
    rows = [[r, h, lbl, reason] for r, h, lbl, reason in report.failures]
    written.append(_write_csv(out / "failures.csv", ["run", "horizon", "model", "reason"], rows))

    for sp in report.specs:
        if (sp.horizon, sp.label) in report.forecasts:
            header, rows = _forecast_rows(report, sp.horizon, sp.label)
            written.append(_write_csv(out / "forecasts" / f"{sp.file_stem}.csv", header, rows))

    summary = out / "summary.txt"
    summary.write_text(_summary_text(report))
    written.append(summary)

    manifest = out / "manifest.txt"
    lines = ["# run manifest", "[config]"] + report.config.describe() + ["", "[provenance]"]
    lines += [f"{k} = {v}" for k, v in sorted(report.provenance.items())]
    lines += ["", "[files]"] + sorted(p.relative_to(out).as_posix() for p in written)
    lines += ["", "# wall-clock files (not reproducible): " + ", ".join(TIMING_FILES)]
    manifest.write_text("\n".join(lines) + "\n")
    written.append(manifest)
    return written


def _summary_text(report: ExperimentReport) -> str:
    cfg = report.config
    labels = report.labels
    width = max(len(lbl) for lbl in labels) + 2
    out = [f"Median over {cfg.n_seeded_runs} run(s); evaluation = {cfg.evaluation.value}", ""]
    for m in METRICS:
        out.append(f"{m.upper():<{width}}" + "".join(f"{'H=' + str(h):>9}" for h in cfg.horizons))
        for lbl in labels:
            vals = "".join(f"{report.median_accuracy(m, h, lbl):9.3f}" for h in cfg.horizons)
            out.append(f"{lbl:<{width}}{vals}")
        out.append("")
    for k in LossKind:
        out.append(f"SPA p ({k.value})".ljust(width) + "".join(f"{'H=' + str(h):>9}" for h in cfg.horizons))
        for lbl in labels:
            vals = "".join(f"{report.median_spa(k, h, lbl):9.3f}" for h in cfg.horizons)
            out.append(f"{lbl:<{width}}{vals}")
        out.append("")
    if report.failures:
        out.append(f"{len(report.failures)} failed cell(s); see failures.csv")
    return "\n".join(out) + "\n"


def emit_plot_data(report: ExperimentReport, out_dir) -> list[Path]:
    """Two-column ``actual,predicted`` files plus gnuplot stubs, one per
    model and horizon with forecasts; returns the paths written."""
    out = Path(out_dir)
    written = []
    for sp in report.specs:
        key = (sp.horizon, sp.label)
        if key not in report.forecasts:
            continue
        targets = np.arange(report.config.split.n_estimation, len(report.prices))
        pred = report.forecasts[key].at_lead(sp.horizon, targets)
        rows = [[_f(a), _f(p)] for a, p in zip(report.prices[targets], pred)]
        data = _write_csv(out / f"{sp.file_stem}.csv", ["actual", "predicted"], rows)
        script = out / f"{sp.file_stem}.gp"
        script.write_text(
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            f"set title '{sp.label}, lead {sp.horizon}'\n"
            "set xlabel 'holdout week'\nset ylabel 'USD/barrel'\n"
            f"plot '{data.name}' using 0:1 with lines, '' using 0:2 with lines\n"
        )
        written += [data, script]
    return written
