"""Forward-looking rolling-window association between two groups of series.

Input is a delimited text file (comma or tab) with a header row, an ISO-8601
date in the first column and one numeric column per series.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .estimators import estimate, estimate_raw_batch
from .exceptions import DegenerateInputError, InsufficientDataError, InvalidInputError
from .measures import ALL_MEASURES, MeasureEstimate, check_measure, resolve_convention
from .ranks import SampleMatrix, Scaling
from .resampling import ResamplingConfig, jackknife_se, standard_error

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "n/a", "."})
DEFAULT_WINDOW = 250
_WINDOW_BATCH = 256


class DataWarning(UserWarning):
    """Rows dropped or reordered while reading a panel."""


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned returns; the first ``p`` columns form the X-block."""

    dates: tuple[dt.date, ...]
    values: np.ndarray
    labels: tuple[str, ...]
    p: int
    q: int
    dropped_rows: int = 0
    notices: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "labels", tuple(self.labels))
        if v.ndim != 2 or v.shape != (len(self.dates), self.p + self.q):
            raise InvalidInputError(f"values must be {len(self.dates)}x{self.p + self.q}, got {v.shape}")
        if len(self.labels) != self.p + self.q:
            raise InvalidInputError("one label per column is required")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidInputError("dates must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("panel values must be finite")

    @property
    def T(self) -> int:
        return len(self.dates)

    def window(self, start: int, width: int) -> SampleMatrix:
        return SampleMatrix(self.values[start : start + width], self.p, self.q)

    def shifted(self, k: int) -> ReturnPanel:
        """Drop the first ``k`` rows."""
        return ReturnPanel(self.dates[k:], self.values[k:], self.labels, self.p, self.q)


@dataclass(frozen=True)
class RollingResult:
    window: int
    window_start_dates: tuple[dt.date, ...]
    series: dict  # measure -> list of MeasureEstimate or None (degenerate window)

    def values(self, measure: str) -> np.ndarray:
        return np.array([np.nan if e is None else e.value for e in self.series[measure]])

    def __len__(self):
        return len(self.window_start_dates)


# ingest ------------------------------------------------------------------------


def _parse_partition(header, partition):
    """Return (column indices of X, column indices of Y) within the numeric columns."""
    if isinstance(partition, str):
        partition = parse_partition(partition)
    if isinstance(partition, tuple) and len(partition) == 2 and all(isinstance(k, int) for k in partition):
        p, q = partition
        if p < 1 or q < 1 or p + q != len(header):
            raise InvalidInputError(f"partition p={p}, q={q} does not match {len(header)} data columns")
        return list(range(p)), list(range(p, p + q))
    try:
        xl, yl = partition
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"bad partition {partition!r}") from exc
    idx = {name: i for i, name in enumerate(header)}
    missing = [c for c in list(xl) + list(yl) if c not in idx]
    if missing:
        raise InvalidInputError(f"unknown column label(s): {', '.join(missing)}")
    xs, ys = [idx[c] for c in xl], [idx[c] for c in yl]
    if not xs or not ys or set(xs) & set(ys):
        raise InvalidInputError("X and Y label lists must be non-empty and disjoint")
    return xs, ys


def parse_partition(text: str):
    """Parse ``"p=3,q=2"`` into ``(3, 2)`` or ``"x=a,b;y=c"`` into label lists."""
    text = text.strip()
    try:
        if ";" in text or not all(part.split("=", 1)[-1].strip().isdigit() for part in text.split(",")):
            parts = dict(s.split("=", 1) for s in text.split(";"))
            return (
                [s.strip() for s in parts["x"].split(",") if s.strip()],
                [s.strip() for s in parts["y"].split(",") if s.strip()],
            )
        kv = dict(s.split("=", 1) for s in text.split(","))
        return int(kv["p"]), int(kv["q"])
    except (KeyError, ValueError) as exc:
        raise InvalidInputError(f"partition must look like 'p=3,q=2' or 'x=a,b;y=c,d', got {text!r}") from exc


def _sniff_delimiter(first_line: str) -> str:
    return "\t" if "\t" in first_line else ","


def read_table(path, date_column: str | int | None = 0):
    """Read a delimited file into ``(dates or None, header, rows of cells, line numbers)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise InvalidInputError(f"{path}: empty file or missing header row")
    reader = csv.reader(io.StringIO(text), delimiter=_sniff_delimiter(lines[0]))
    rows = list(reader)
    header = [h.strip() for h in rows[0]]
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if any(c.strip() for c in r)]
    if date_column is None:
        dcol = None
    elif isinstance(date_column, int):
        dcol = date_column
    else:
        if date_column not in header:
            raise InvalidInputError(f"{path}: date column {date_column!r} not in header")
        dcol = header.index(date_column)
    dates = [] if dcol is not None else None
    cells = []
    for lineno, r in body:
        if len(r) != len(header):
            raise InvalidInputError(f"{path}: row {lineno} has {len(r)} fields, header has {len(header)}")
        if dcol is not None:
            raw = r[dcol].strip()
            try:
                dates.append(dt.date.fromisoformat(raw))
            except ValueError as exc:
                raise InvalidInputError(
                    f"{path}: row {lineno}, column {header[dcol]!r}: {raw!r} is not an ISO-8601 date"
                ) from exc
        cells.append([c for j, c in enumerate(r) if j != dcol])
    names = [h for j, h in enumerate(header) if j != dcol]
    return dates, names, cells, [ln for ln, _ in body]


def _to_float(cell, path, lineno, col):
    s = cell.strip()
    if s.lower() in MISSING_TOKENS:
        return math.nan
    try:
        v = float(s)
    except ValueError:
        raise InvalidInputError(f"{path}: row {lineno}, column {col!r}: {s!r} is not numeric") from None
    if not math.isfinite(v):
        raise InvalidInputError(f"{path}: row {lineno}, column {col!r}: {s!r} is not finite")
    return v


def ingest(path, format: str = "returns", partition=None, date_column=0, min_returns: int | None = None) -> ReturnPanel:
    """Read a panel of levels or returns and align it.

    Parameters
    ----------
    path : path-like
    format : {"returns", "levels"}
        Levels are turned into log-returns ``log(P_t / P_{t-1})``, each
        labelled with the later date.
    partition : "p=..,q=.." string, (p, q) tuple or (x_labels, y_labels)
        Which numeric columns form the X-block and which the Y-block.
    date_column : int or str
        Position or header name of the date column.
    min_returns : int, optional
        Raise :class:`InsufficientDataError` if fewer returns remain.

    Notes
    -----
    Rows with any missing cell are dropped (listwise deletion) with a
    :class:`DataWarning`; unsorted dates are sorted, also with a warning.
    """
    if format not in ("returns", "levels"):
        raise InvalidInputError(f"format must be 'returns' or 'levels', got {format!r}")
    if partition is None:
        raise InvalidInputError("a partition is required")
    if date_column is None:
        raise InvalidInputError("a return panel needs a date column")
    dates, names, cells, linenos = read_table(path, date_column)
    xs, ys = _parse_partition(names, partition)
    cols = xs + ys
    vals = np.array(
        [[_to_float(row[c], path, ln, names[c]) for c in cols] for row, ln in zip(cells, linenos)],
        dtype=np.float64,
    ).reshape(len(cells), len(cols))
    notices = []
    order = np.argsort(np.array([d.toordinal() for d in dates]), kind="stable")
    if np.any(order != np.arange(len(order))):
        msg = f"{path}: dates were not in ascending order; rows sorted"
        warnings.warn(msg, DataWarning, stacklevel=2)
        notices.append(msg)
        dates = [dates[i] for i in order]
        vals = vals[order]
        linenos = [linenos[i] for i in order]
    dup = [a for a, b in zip(dates, dates[1:]) if a == b]
    if dup:
        raise InvalidInputError(f"{path}: duplicate date {dup[0].isoformat()}")
    ok = ~np.isnan(vals).any(axis=1)
    dropped = int(np.sum(~ok))
    if dropped:
        msg = f"{path}: {dropped} row(s) with missing values dropped"
        warnings.warn(msg, DataWarning, stacklevel=2)
        notices.append(msg)
        dates = [d for d, keep in zip(dates, ok) if keep]
        vals = vals[ok]
    if format == "levels":
        if np.any(vals <= 0):
            raise InvalidInputError(f"{path}: levels must be positive to take log-returns")
        vals = np.diff(np.log(vals), axis=0)
        dates = dates[1:]
    if min_returns is not None and len(dates) < int(min_returns):
        raise InsufficientDataError(
            f"{path}: {len(dates)} usable return rows, at least {int(min_returns)} needed"
        )
    labels = [names[c] for c in cols]
    return ReturnPanel(tuple(dates), vals, tuple(labels), len(xs), len(ys), dropped, tuple(notices))


def _looks_dated(path) -> bool:
    with open(path, newline="", encoding="utf-8") as fh:
        head = [fh.readline(), fh.readline()]
    delim = _sniff_delimiter(head[0])
    first = head[1].split(delim, 1)[0].strip() if head[1].strip() else ""
    try:
        dt.date.fromisoformat(first)
        return True
    except ValueError:
        return head[0].split(delim, 1)[0].strip().lower() in ("date", "day", "time")


def load_sample(path, partition, date_column="auto") -> SampleMatrix:
    """Read a delimited file as one sample, dropping rows with missing cells.

    With ``date_column="auto"`` the first column is skipped when it holds
    ISO-8601 dates or is headed ``date``.
    """
    if partition is None:
        raise InvalidInputError("a partition is required")
    if date_column == "auto":
        date_column = 0 if _looks_dated(path) else None
    _, names, cells, linenos = read_table(path, date_column)
    xs, ys = _parse_partition(names, partition)
    cols = xs + ys
    vals = np.array(
        [[_to_float(row[c], path, ln, names[c]) for c in cols] for row, ln in zip(cells, linenos)],
        dtype=np.float64,
    ).reshape(len(cells), len(cols))
    ok = ~np.isnan(vals).any(axis=1)
    if not ok.all():
        warnings.warn(f"{path}: {int(np.sum(~ok))} row(s) with missing values dropped", DataWarning, stacklevel=2)
    if ok.sum() < 2:
        raise InsufficientDataError(f"{path}: fewer than 2 complete rows")
    return SampleMatrix(vals[ok], len(xs), len(ys))


# rolling -----------------------------------------------------------------------------


def _window_stack(values, starts, w):
    return np.stack([values[s : s + w] for s in starts])


def _se(sample, measure, resampling, convention, scaling, key):
    cfg = resampling
    try:
        if cfg.method == "jackknife":
            return jackknife_se(sample, measure, convention, scaling)
        # bootstrap substream keyed by the window's start date, so shifting the
        # panel keeps each window's resamples
        cfg = ResamplingConfig("bootstrap", cfg.b_iterations, _mix(cfg.seed, key))
        return standard_error(sample, measure, cfg, convention, scaling)
    except DegenerateInputError:
        return math.nan


def _mix(seed, key):
    return int(np.random.SeedSequence([int(seed), int(key)]).generate_state(2, np.uint64)[0])


def rolling_measures(
    panel: ReturnPanel,
    window: int = DEFAULT_WINDOW,
    measures=ALL_MEASURES,
    resampling: ResamplingConfig | None = None,
    convention=None,
    scaling=Scaling.OVER_N,
) -> RollingResult:
    """Estimate each measure on rows ``t .. t + window - 1`` for every start ``t``.

    A window on which an estimator is degenerate gets ``None`` for that
    measure; other measures and windows are unaffected.
    """
    w = int(window)
    if w < 2:
        raise InvalidInputError("window must be >= 2")
    if w > panel.T:
        raise InsufficientDataError(f"window {w} exceeds the {panel.T} available rows")
    measures = tuple(check_measure(m) for m in measures)
    starts = np.arange(panel.T - w + 1)
    series = {}
    for m in measures:
        conv = resolve_convention(m, convention)
        vals = np.empty(len(starts))
        for s in range(0, len(starts), _WINDOW_BATCH):
            chunk = starts[s : s + _WINDOW_BATCH]
            vals[s : s + len(chunk)] = estimate_raw_batch(
                _window_stack(panel.values, chunk, w), panel.p, m, convention, scaling
            )
        out = []
        for t, v in zip(starts, vals):
            if not np.isfinite(v):
                out.append(None)
                continue
            est = MeasureEstimate(m, float(v), w, conv)
            if resampling is not None:
                se = _se(panel.window(t, w), m, resampling, convention, scaling, panel.dates[t].toordinal())
                if np.isfinite(se):
                    est = est.with_se(se, resampling.method)
            out.append(est)
        series[m] = out
    return RollingResult(w, tuple(panel.dates[t] for t in starts), series)


def direct_estimate(panel: ReturnPanel, start: int, window: int, measure: str, convention=None, scaling=Scaling.OVER_N):
    """Estimate on one row slice through the single-sample API (reference for the rolling path)."""
    return estimate(panel.window(start, window), measure, convention, scaling)


def _fmt(v) -> str:
    return "" if v is None or not np.isfinite(v) else repr(float(v))


def format_rolling(result: RollingResult, delimiter: str = ",") -> str:
    """Delimited table: one row per window start, value (and SE) columns per measure."""
    with_se = any(e is not None and e.se is not None for s in result.series.values() for e in s)
    cols = ["window_start"]
    for m in result.series:
        cols.append(m)
        if with_se:
            cols.append(f"{m}_se")
    buf = io.StringIO()
    wr = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    wr.writerow(cols)
    for i, d in enumerate(result.window_start_dates):
        row = [d.isoformat()]
        for m, s in result.series.items():
            e = s[i]
            row.append(_fmt(None if e is None else e.value))
            if with_se:
                row.append(_fmt(None if e is None or e.se is None else e.se.value))
        wr.writerow(row)
    return buf.getvalue()


__all__ = [
    "DataWarning",
    "ReturnPanel",
    "RollingResult",
    "direct_estimate",
    "format_rolling",
    "ingest",
    "load_sample",
    "parse_partition",
    "read_table",
    "rolling_measures",
]
