"""Dated count series: ingestion, validation and summary statistics."""
import csv
import datetime as dt
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ValidationError

# months between observations for calendar frequencies, days for fixed ones
FREQUENCIES = {"daily": ("days", 1), "weekly": ("days", 7), "monthly": ("months", 1),
               "quarterly": ("months", 3), "annual": ("months", 12)}


@dataclass(frozen=True, eq=False)
class CountSeries:
    """T x m matrix of nonnegative integer counts on a regular date grid."""

    dates: tuple
    values: np.ndarray
    labels: tuple
    frequency: str = "weekly"

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] == 0:
            raise ValidationError("a count series needs at least one observation")
        if np.any(vals < 0) or np.any(vals != np.round(vals)):
            raise ValidationError("counts must be nonnegative integers")
        if len(self.dates) != vals.shape[0]:
            raise ValidationError("one date per observation is required")
        if len(self.labels) != vals.shape[1]:
            raise ValidationError("one label per column is required")
        object.__setattr__(self, "values", vals.astype(np.int64))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_array(cls, values, labels=None, start="2000-01-03", frequency="weekly"):
        """Attach a regular date grid to raw counts (used for simulated data)."""
        vals = np.asarray(values)
        if vals.ndim == 1:
            vals = vals[:, None]
        labels = labels or [f"y{j + 1}" for j in range(vals.shape[1])]
        first = dt.date.fromisoformat(start)
        dates = [_advance(first, frequency, i) for i in range(vals.shape[0])]
        return cls(tuple(dates), vals, tuple(labels), frequency)

    @property
    def n_obs(self):
        return self.values.shape[0]

    @property
    def n_series(self):
        return self.values.shape[1]

    def column(self, j):
        return self.values[:, j]

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["date", *self.labels])
        for d, row in zip(self.dates, self.values):
            writer.writerow([d.isoformat(), *[int(v) for v in row]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def __eq__(self, other):
        if not isinstance(other, CountSeries):
            return NotImplemented
        return (self.dates == other.dates and self.labels == other.labels
                and np.array_equal(self.values, other.values))


def _advance(start, frequency, steps):
    if frequency not in FREQUENCIES:
        raise ValidationError(f"unknown frequency {frequency!r}; choose from {sorted(FREQUENCIES)}")
    unit, size = FREQUENCIES[frequency]
    if unit == "days":
        return start + dt.timedelta(days=size * steps)
    months = start.month - 1 + size * steps
    year, month = start.year + months // 12, months % 12 + 1
    return start.replace(year=year, month=month, day=min(start.day, 28))


def _months_between(a, b):
    return (b.year - a.year) * 12 + b.month - a.month


def ingest(path_or_text, frequency="weekly"):
    """Read a ``date,label1,...,labelm`` CSV into a validated :class:`CountSeries`.

    Row numbers in error messages count the header as row 1.
    """
    if frequency not in FREQUENCIES:
        raise ValidationError(f"unknown frequency {frequency!r}; choose from {sorted(FREQUENCIES)}")
    text = path_or_text
    if "\n" not in text:
        with open(path_or_text) as fh:
            text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValidationError("input file is empty")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise ValidationError("header must be 'date,label1,...'")
    if len(rows) == 1:
        raise ValidationError("input file has a header but no observations")
    dates, values = [], []
    unit, size = FREQUENCIES[frequency]
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValidationError(f"row {i}: expected {len(header)} cells, got {len(row)}")
        try:
            d = dt.date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise ValidationError(f"row {i}: bad date {row[0]!r}") from exc
        cells = []
        for cell in row[1:]:
            cell = cell.strip()
            if cell == "":
                raise ValidationError(f"row {i}: missing value")
            try:
                num = float(cell)
            except ValueError as exc:
                raise ValidationError(f"row {i}: non-numeric cell {cell!r}") from exc
            if num < 0 or num != int(num):
                raise ValidationError(f"row {i}: {cell!r} is not a nonnegative integer count")
            cells.append(int(num))
        if dates:
            prev = dates[-1]
            if d <= prev:
                raise ValidationError(f"row {i}: dates must be strictly increasing")
            gap = (d - prev).days if unit == "days" else _months_between(prev, d)
            if gap != size:
                raise ValidationError(f"row {i}: gap in the {frequency} date grid after {prev}")
        dates.append(d)
        values.append(cells)
    return CountSeries(tuple(dates), np.array(values, dtype=np.int64), tuple(header[1:]), frequency)


def summary(series):
    """Mean, variance, skewness and kurtosis (not excess) of each column."""
    out = {}
    for j, label in enumerate(series.labels):
        col = series.values[:, j].astype(float)
        out[label] = {
            "mean": float(col.mean()),
            "variance": float(col.var(ddof=1)) if col.size > 1 else 0.0,
            "skewness": float(stats.skew(col)) if col.std() > 0 else 0.0,
            "kurtosis": float(stats.kurtosis(col, fisher=False)) if col.std() > 0 else 0.0,
        }
    return out


def summary_csv(series):
    stats_ = summary(series)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["statistic", *series.labels])
    for key in ("mean", "variance", "skewness", "kurtosis"):
        writer.writerow([key, *[repr(stats_[lab][key]) for lab in series.labels]])
    return buf.getvalue()
