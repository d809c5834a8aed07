"""Command-line interface.

Subcommands::

    msfc decompose  --data FILE [--boundary sbm|mirror|truncate] --out-dir DIR
    msfc forecast   --data FILE --model NAME [--strategy S] --horizon H --out-dir DIR
    msfc experiment --data FILE [--config FILE] --out-dir DIR [--jobs N]
    msfc spa        --data FILE --forecasts DIR --out-dir DIR

``--data wti`` selects the bundled weekly WTI series.  Exit codes: 0
success, 1 usage or configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import load_config
from .emd import BoundaryMode, decompose
from .exceptions import CapabilityError, ConfigError, DataError, MsfcError, NumericalError
from .ingest import read_price_csv, wti_path
from .pipeline import (
    DecompositionScope,
    EvaluationMode,
    ExperimentConfig,
    Technique,
    run_experiment,
)
from .report import emit_plot_data, write_report
from .spa import LossKind, LossSeries, spa_matrix
from .strategies import Strategy

log = logging.getLogger("msfc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

_SCOPES = {"rolling": "rolling", "estimation": "estimation", "full": "full"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", required=True, help="price CSV (date,price) or 'wti' for the bundled series")
    common.add_argument("--config", help="sections-and-keys configuration file")
    common.add_argument("--out-dir", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="base seed (overrides MSFC_SEED and the config)")
    common.add_argument("--jobs", type=int, help="worker processes (default 1)")
    common.add_argument("--bootstrap-b", type=int, help="SPA bootstrap replicates")
    common.add_argument("--decomposition-scope", choices=sorted(_SCOPES), help="data seen by forecast-time decompositions")
    common.add_argument("--evaluation", choices=[m.value for m in EvaluationMode], help="pool leads 1..H or use lead H only")
    common.add_argument("-q", "--quiet", action="store_true", help="only print errors")

    parser = _Parser(prog="msfc", description="Multi-step-ahead forecasting with EMD ensembles.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("decompose", parents=[common], help="write IMFs and residue as CSV")
    p.add_argument("--boundary", choices=[b.value for b in BoundaryMode], default="sbm")
    p.add_argument("--estimation-only", action="store_true", help="decompose only the estimation sample")

    p = sub.add_parser("forecast", parents=[common], help="one model, strategy and horizon")
    p.add_argument("--model", required=True, choices=[t.value for t in Technique])
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="iterated")
    p.add_argument("--horizon", type=int, required=True)

    p = sub.add_parser("experiment", parents=[common], help="full protocol; writes the report files")
    p.add_argument("--horizon", type=int, action="append", help="restrict to these horizons (repeatable)")
    p.add_argument("--model", action="append", choices=[t.value for t in Technique], help="restrict techniques")
    p.add_argument("--strategy", action="append", choices=[s.value for s in Strategy], help="restrict strategies")
    p.add_argument("--no-plots", action="store_true", help="skip plot-data emission")

    p = sub.add_parser("spa", parents=[common], help="SPA p-values from existing forecast CSVs")
    p.add_argument("--forecasts", required=True, help="directory of forecast CSVs written by experiment/forecast")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    seed = args.seed
    if seed is None and os.environ.get("MSFC_SEED"):
        try:
            seed = int(os.environ["MSFC_SEED"])
        except ValueError:
            raise ConfigError(f"MSFC_SEED must be an integer, got {os.environ['MSFC_SEED']!r}") from None
    changes = {}
    if seed is not None:
        changes["base_seed"] = seed
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.bootstrap_b is not None:
        changes["spa"] = replace(cfg.spa, n_bootstrap=args.bootstrap_b)
    if args.decomposition_scope:
        changes["decomposition_scope"] = _SCOPES[args.decomposition_scope]
    if args.evaluation:
        changes["evaluation"] = args.evaluation
    try:
        return replace(cfg, **changes)
    except DataError as exc:
        raise ConfigError(str(exc)) from None


def _load(args, say):
    summary = read_price_csv(wti_path() if args.data == "wti" else args.data)
    for line in summary.lines():
        say(line)
    return summary.series


def _fit_split(cfg: ExperimentConfig, n: int, say) -> ExperimentConfig:
    """Keep the configured split if it fits; otherwise hold out the same share."""
    if cfg.split.total == n:
        return cfg
    from .series import SplitSpec

    n_hold = max(1, round(n * cfg.split.n_holdout / cfg.split.total))
    say(f"split {cfg.split.n_estimation}/{cfg.split.n_holdout} does not fit {n} observations; using {n - n_hold}/{n_hold}")
    return replace(cfg, split=SplitSpec(n - n_hold, n_hold))


def cmd_decompose(args, say) -> int:
    cfg = _experiment_config(args)
    series = _load(args, say)
    values, dates = series.values, series.timestamps
    if args.estimation_only:
        cfg = _fit_split(cfg, len(values), say)
        values, dates = values[: cfg.split.n_estimation], dates[: cfg.split.n_estimation]
    dec = decompose(values, replace(cfg.sift, boundary_mode=args.boundary))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"imfs_{args.boundary}.csv"
    header = ["date"] + [f"imf{i + 1}" for i in range(len(dec.imfs))] + ["residue"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(len(values)):
            w.writerow([str(dates[t])] + [format(float(c[t]), ".17g") for c in dec.components])
    say(f"{len(dec.imfs)} IMFs + residue written to {path}")
    return EXIT_OK


def _run_and_write(cfg, series, out_dir, say, plots=True) -> int:
    report = run_experiment(cfg, series, progress=say)
    written = write_report(report, out_dir)
    if plots:
        plot_files = emit_plot_data(report, Path(out_dir) / "plots")
        if not plot_files:
            say("no forecasts to plot")
    say(f"{len(written)} report files written to {out_dir}")
    for line in (Path(out_dir) / "summary.txt").read_text().splitlines():
        say(line)
    if report.failures:
        say(f"warning: {len(report.failures)} cell(s) failed; see failures.csv")
    return EXIT_OK


def cmd_forecast(args, say) -> int:
    cfg = _experiment_config(args)
    series = _load(args, say)
    cfg = _fit_split(cfg, len(series), say)
    tech = Technique(args.model)
    cfg = replace(cfg, horizons=(args.horizon,), techniques=(tech,), strategies=(Strategy(args.strategy),), n_seeded_runs=1)
    return _run_and_write(cfg, series, args.out_dir, say, plots=False)


def cmd_experiment(args, say) -> int:
    cfg = _experiment_config(args)
    series = _load(args, say)
    cfg = _fit_split(cfg, len(series), say)
    changes = {}
    if args.horizon:
        changes["horizons"] = tuple(args.horizon)
    if args.model:
        changes["techniques"] = tuple(args.model)
    if args.strategy:
        changes["strategies"] = tuple(args.strategy)
    try:
        cfg = replace(cfg, **changes)
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    return _run_and_write(cfg, series, args.out_dir, say, plots=not args.no_plots)


_STEM = re.compile(r"^(?P<model>.+)_(?P<strategy>naive|iterated|direct|mimo)_H(?P<h>\d+)$")


def _read_forecast_file(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"actual", "predicted", "prev_actual"} <= set(rows[0]):
        raise DataError(f"{path}: expected columns date, actual, prev_actual, predicted")
    leads = sorted((int(k[5:]) for k in rows[0] if k.startswith("lead_")))
    cols = [f"lead_{h}" for h in leads] or ["predicted"]
    actual = np.array([float(r["actual"]) for r in rows])
    prev = np.array([float(r["prev_actual"]) for r in rows])
    preds = np.array([[float(r[c]) for c in cols] for r in rows])
    return [r["date"] for r in rows], actual, prev, preds


def cmd_spa(args, say) -> int:
    from .metrics import EvaluationFrame
    from .spa import per_observation_losses

    cfg = _experiment_config(args)
    series = _load(args, say)
    cfg = _fit_split(cfg, len(series), say)
    estimation = series.values[: cfg.split.n_estimation]
    groups: dict = {}
    for path in sorted(Path(args.forecasts).glob("*.csv")):
        m = _STEM.match(path.stem)
        if not m:
            continue
        label = m["model"] if m["strategy"] == "naive" else f"{m['model']}_{m['strategy']}"
        groups.setdefault(int(m["h"]), {})[label] = _read_forecast_file(path)
    if not groups:
        raise DataError(f"no forecast files (<model>_<strategy>_H<h>.csv) in {args.forecasts}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = sorted({lbl for g in groups.values() for lbl in g})
    rows = []
    for kind in LossKind:
        for h in sorted(groups):
            models = []
            for lbl, (dates, actual, prev, preds) in sorted(groups[h].items()):
                losses = [
                    per_observation_losses(EvaluationFrame(actual, preds[:, j], prev, estimation), kind).losses
                    for j in range(preds.shape[1])
                ]
                models.append(LossSeries(lbl, np.mean(losses, axis=0)))
            if len(models) < 2:
                say(f"H={h}: fewer than two models; skipped")
                continue
            res = spa_matrix(models, cfg.spa)
            rows.append([kind.value, h] + [format(res[l].p_value, ".17g") if l in res else "" for l in labels])
    path = out / "spa_pvalues.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["loss", "horizon"] + labels)
        w.writerows(rows)
    say(f"SPA p-values written to {path}")
    return EXIT_OK


COMMANDS = {"decompose": cmd_decompose, "forecast": cmd_forecast, "experiment": cmd_experiment, "spa": cmd_spa}

_HINTS = {
    EXIT_USAGE: "run 'msfc COMMAND --help' for the accepted options",
    EXIT_DATA: "check the input file (header 'date,price', one row per week) and the split sizes",
    EXIT_NUMERIC: "try another --seed or a shorter horizon; numerical details are in the message above",
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (UsageError, ConfigError, CapabilityError)):
        return EXIT_USAGE
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    if isinstance(exc, MsfcError):
        return EXIT_DATA
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    say = (lambda msg: None) if args.quiet else print
    try:
        return COMMANDS[args.command](args, say)
    except (MsfcError, UsageError, OSError, FloatingPointError, np.linalg.LinAlgError) as exc:
        code = exit_code_for(exc)
        print(f"msfc {args.command}: {exc}", file=sys.stderr)
        print(f"hint: {_HINTS[code]}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
