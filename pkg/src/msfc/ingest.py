"""Reading price files into :class:`~msfc.series.Series`."""

from __future__ import annotations

import csv
import logging
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import IngestionError
from .series import Series

log = logging.getLogger(__name__)

__all__ = ["IngestSummary", "ingest", "load_wti", "read_price_csv", "write_series_csv"]

# ISO first, then the layouts found in EIA spreadsheet exports
DATE_FORMATS = ("%Y-%m-%d", "%m/%d/%Y", "%b %d, %Y", "%b %d %Y", "%b-%d-%Y", "%d-%b-%Y", "%Y%m%d")


def parse_date(text: str) -> np.datetime64:
    text = text.strip()
    for fmt in DATE_FORMATS:
        try:
            return np.datetime64(datetime.strptime(text, fmt).date(), "D")
        except ValueError:
            continue
    raise ValueError(f"unrecognised date {text!r}")


class IngestSummary:
    """What ingestion kept and dropped, for the user-facing notice."""

    def __init__(self, path, n_rows, dropped, resorted):
        self.path = str(path)
        self.n_rows = n_rows
        self.dropped = dropped
        self.resorted = resorted
        self.series: Series | None = None

    def lines(self) -> list[str]:
        s = self.series
        out = [f"{self.path}: {len(s)} observations, {s.timestamps[0]} .. {s.timestamps[-1]}"]
        if self.dropped:
            word = "row" if len(self.dropped) == 1 else "rows"
            rows = ", ".join(str(r) for r in self.dropped)
            out.append(f"dropped {len(self.dropped)} without a numeric price ({word} {rows})")
        if self.resorted:
            out.append("dates were out of order and have been sorted")
        return out


def read_price_csv(path) -> IngestSummary:
    """Parse a ``date,price`` CSV (header required; extra columns ignored).

    Row numbers in messages count the header as row 1.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise IngestionError(f"{path} is empty")
    header = [h.strip().lower() for h in rows[0]]
    try:
        i_date = next(i for i, h in enumerate(header) if h in ("date", "week", "week of"))
        i_price = next(i for i, h in enumerate(header) if h in ("price", "value", "close") or "price" in h)
    except StopIteration:
        raise IngestionError(f"{path}: header needs a date column and a price column, got {rows[0]}") from None
    dates, values, dropped = [], [], []
    for row_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            d = parse_date(row[i_date])
        except (ValueError, IndexError) as exc:
            raise IngestionError(f"{path}, row {row_no}: {exc}") from None
        try:
            v = float(row[i_price])
            if not np.isfinite(v):
                raise ValueError
        except (ValueError, IndexError):
            dropped.append(row_no)
            log.warning("%s, row %d: no numeric price; row dropped", path, row_no)
            continue
        dates.append(d)
        values.append(v)
    if len(values) < 2:
        raise IngestionError(f"{path}: fewer than 2 usable rows")
    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(values)
    order = np.argsort(dates, kind="stable")
    resorted = bool(np.any(order != np.arange(len(order))))
    dates, values = dates[order], values[order]
    dup = np.flatnonzero(dates[1:] == dates[:-1])
    if len(dup):
        raise IngestionError(f"{path}: duplicate date(s) {', '.join(str(dates[i]) for i in dup)}")
    summary = IngestSummary(path, len(values), dropped, resorted)
    summary.series = Series(dates, values)
    return summary


def ingest(path) -> Series:
    """Load a price CSV, logging what was dropped or re-sorted."""
    summary = read_price_csv(path)
    for line in summary.lines():
        log.info(line)
    return summary.series


def write_series_csv(series: Series, path) -> None:
    """Write ``date,price`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "price"])
        for d, v in zip(series.timestamps, series.values):
            w.writerow([str(d), format(float(v), ".17g")])


def wti_path() -> Path:
    return Path(str(resources.files("msfc") / "data" / "wti_weekly.csv"))


def load_wti() -> Series:
    """Weekly WTI spot prices, 2000-01-07 .. 2011-12-30 (626 weeks)."""
    return read_price_csv(wti_path()).series
