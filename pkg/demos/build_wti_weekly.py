"""Rebuild the bundled weekly WTI spot-price file from daily data.

EIA publishes the weekly Cushing WTI spot price (series RWTCW) as the
average of the daily spot prices (RWTCD, mirrored on FRED as DCOILWTICO)
for the week ending Friday.  The ``arch`` package ships a copy of the daily
FRED series, so the weekly sample can be rebuilt offline::

    pip install arch
    python demos/build_wti_weekly.py

The output is written to ``src/msfc/data/wti_weekly.csv`` with two columns,
``date`` (ISO-8601 week-ending Friday) and ``price`` (USD/barrel).
"""

from pathlib import Path

import pandas as pd
from arch.data import wti

START, END = "2000-01-07", "2011-12-30"
OUT = Path(__file__).resolve().parents[1] / "src" / "msfc" / "data" / "wti_weekly.csv"


def main():
    daily = wti.load()
    daily.index = pd.to_datetime(daily.index)
    prices = pd.to_numeric(daily["DCOILWTICO"], errors="coerce").dropna()
    weekly = prices.resample("W-FRI").mean().loc[START:END].round(4)
    frame = pd.DataFrame({"date": weekly.index.strftime("%Y-%m-%d"), "price": weekly.values})
    frame.to_csv(OUT, index=False, float_format="%.4f")
    print(f"wrote {len(frame)} weeks to {OUT}")


if __name__ == "__main__":
    main()
