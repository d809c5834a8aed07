"""Iterated, direct and MIMO forecasts side by side.

The same network trainer and the same inputs are used under each strategy on
a noisy seasonal series.  The iterated model feeds its own forecasts back, the
direct strategy trains one network per lead, and MIMO trains one network
with a vector output.  Error is reported per lead so the accumulation of
iterated errors is visible, together with the training time of each.

    python demos/02_strategies.py
"""

import time

import numpy as np

from msfc.nnet import FnnRegressor, TrainConfig
from msfc.series import fit_scaler
from msfc.strategies import Strategy, rolling_forecasts, train_strategy

H = 8
LAGS = (1, 2, 3, 6, 12)


def main():
    rng = np.random.default_rng(0)
    t = np.arange(500)
    x = 2 + np.sin(2 * np.pi * t / 26) + 0.5 * np.sin(2 * np.pi * t / 9) + rng.normal(0, 0.15, len(t))
    n_train = 400
    scaler = fit_scaler(x[:n_train])
    z = scaler.transform(x)
    reg = FnnRegressor(10, TrainConfig(seed=1, max_epochs=60, n_restarts=1))
    origins = np.arange(n_train - 1, len(x) - H)

    print(f"lags {LAGS}, {len(origins)} rolling origins, error = mean |forecast - actual|")
    print(f"{'strategy':<10}{'train s':>9}" + "".join(f"{'h=' + str(h):>8}" for h in range(1, H + 1)))
    for kind in Strategy:
        t0 = time.perf_counter()
        model = train_strategy(kind, z[:n_train], LAGS, H, reg)
        elapsed = time.perf_counter() - t0
        fc = scaler.inverse_transform(rolling_forecasts(model, z, origins, H).forecasts)
        actual = x[origins[:, None] + np.arange(1, H + 1)]
        mae = np.mean(np.abs(fc - actual), axis=0)
        print(f"{kind.value:<10}{elapsed:>9.2f}" + "".join(f"{v:>8.3f}" for v in mae))
    print("\nDirect trains H networks, so its training time is roughly H times the others.")


if __name__ == "__main__":
    main()
