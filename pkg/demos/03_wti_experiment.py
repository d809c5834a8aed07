"""A reduced version of the full WTI experiment.

Runs the random walk, the plain network and the two EMD ensembles with the
MIMO strategy at a four-week horizon, one seeded run, then prints the
accuracy table, the SPA p-values (each model taken in turn as the base) and
the selected lags.  The full protocol is ``msfc experiment --data wti
--config configs/desk.ini``; this demo takes a few minutes on one CPU.

    python demos/03_wti_experiment.py [--out demos/out/wti]
"""

import argparse
from pathlib import Path

from msfc import load_wti
from msfc.nnet import TrainConfig
from msfc.pipeline import ExperimentConfig, Technique, run_experiment
from msfc.spa import LossKind, SpaConfig
from msfc.strategies import Strategy


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent / "out" / "wti"))
    args = parser.parse_args()

    config = ExperimentConfig(
        horizons=(4,),
        n_seeded_runs=1,
        strategies=(Strategy.MIMO,),
        train=TrainConfig(max_epochs=30, n_restarts=1),
        spa=SpaConfig(n_bootstrap=1000),
    )
    report = run_experiment(config, load_wti(), progress=print)

    print(f"\n{'model':<20}{'SMAPE':>8}{'MASE':>8}{'DS':>8}{'SPA p':>8}{'secs':>8}")
    for label in report.labels:
        acc = [report.median_accuracy(m, 4, label) for m in ("smape", "mase", "ds")]
        p = report.median_spa(LossKind.SMAPE, 4, label)
        secs = report.median_timing(4, label)
        print(f"{label:<20}" + "".join(f"{v:>8.3f}" for v in acc) + f"{p:>8.3f}{secs:>8.1f}")
    print("\nA high SPA p-value means no rival beats that model significantly.")

    print("\nselected lags (MIMO inputs come from the Delta test):")
    for tech, comp, crit, n, lags in report.lags:
        if tech != Technique.RANDOM_WALK.value:
            print(f"  {tech:<12}{comp:<9}{crit:<6}{n:>3}  {lags}")

    report.write(args.out)
    print(f"\nreport files written to {args.out}")


if __name__ == "__main__":
    main()
