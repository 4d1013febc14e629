"""Monthly return panels in the Fama-French CSV layout, and window plans.

Input files have a header row (date column first, then asset names)
followed by rows ``YYYYMM,v1,...,vn`` with returns in percent. Values are
stored in decimal units. The library's missing-value sentinels are
``-99.99`` and ``-999``.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, MissingDataError

MISSING_SENTINELS = (-99.99, -999.0)
PERCENT = 100.0


@dataclass(frozen=True, order=True)
class YearMonth:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise DataError(f"month must lie in 1..12, got {self.month}")

    @classmethod
    def parse(cls, stamp):
        """Parse ``YYYYMM`` (an int or a six-digit string)."""
        text = str(stamp).strip()
        if len(text) != 6 or not text.isdigit():
            raise DataError(f"malformed date {text!r}, expected YYYYMM")
        return cls(int(text[:4]), int(text[4:]))

    @property
    def stamp(self):
        return f"{self.year:04d}{self.month:02d}"

    @property
    def index(self):
        """Months since year 0, so consecutive months differ by one."""
        return 12 * self.year + self.month - 1

    def shift(self, months):
        i = self.index + months
        return YearMonth(i // 12, i % 12 + 1)

    def __str__(self):
        return f"{self.month:02d}/{self.year:04d}"


def _as_month(value):
    return value if isinstance(value, YearMonth) else YearMonth.parse(value)


@dataclass(frozen=True)
class Window:
    """Inclusive range of months."""

    start: YearMonth
    end: YearMonth

    def __post_init__(self):
        object.__setattr__(self, "start", _as_month(self.start))
        object.__setattr__(self, "end", _as_month(self.end))
        if self.end < self.start:
            raise DataError(f"window ends ({self.end}) before it starts ({self.start})")

    @property
    def months(self):
        return self.end.index - self.start.index + 1

    @property
    def label(self):
        """Short ``MM/YY-MM/YY`` label."""
        return (f"{self.start.month:02d}/{self.start.year % 100:02d}-"
                f"{self.end.month:02d}/{self.end.year % 100:02d}")


def window(start, end):
    return Window(_as_month(start), _as_month(end))


@dataclass(frozen=True)
class ReturnsPanel:
    dates: tuple
    assets: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(self.dates), len(self.assets)):
            raise DataError(f"values of shape {values.shape} do not match "
                            f"{len(self.dates)} dates x {len(self.assets)} assets")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur.index != prev.index + 1:
                raise DataError(f"month gap between {prev.stamp} and {cur.stamp}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))

    @property
    def T(self):
        return len(self.dates)

    @property
    def n(self):
        return len(self.assets)

    @property
    def has_missing(self):
        return bool(np.isnan(self.values).any())

    def equals(self, other):
        """Exact equality, treating missing cells as equal to each other."""
        return (self.dates == other.dates and self.assets == other.assets
                and np.array_equal(self.values, other.values, equal_nan=True))


def _is_sentinel(x):
    return any(math.isclose(x, s, rel_tol=0.0, abs_tol=1e-9) for s in MISSING_SENTINELS)


def parse_returns_csv(source, allow_missing=False):
    """Read a panel from a path or an open text stream.

    Missing-value sentinels raise :class:`MissingDataError` unless
    ``allow_missing`` is set, in which case they are stored as NaN (see
    :func:`drop_incomplete_assets`).
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise DataError(f"data file not found: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            return _parse_rows(csv.reader(fh), allow_missing)
    return _parse_rows(csv.reader(source), allow_missing)


def parse_returns_text(text, allow_missing=False):
    """:func:`parse_returns_csv` on CSV content held in a string."""
    return parse_returns_csv(io.StringIO(text), allow_missing)


def _parse_rows(reader, allow_missing):
    header = None
    dates, rows = [], []
    for lineno, row in enumerate(reader, start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        if header is None:
            header = cells
            if len(header) < 2:
                raise DataError("header needs a date column and at least one asset", lineno)
            if any(not name for name in header[1:]):
                raise DataError("empty asset name in header", lineno)
            continue
        if len(cells) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(cells)}", lineno)
        try:
            ym = YearMonth.parse(cells[0])
        except DataError as exc:
            raise DataError(str(exc), lineno) from None
        if dates and ym.index != dates[-1].index + 1:
            raise DataError(f"month gap between {dates[-1].stamp} and {ym.stamp}", lineno)
        values = []
        for col, text in enumerate(cells[1:], start=1):
            try:
                v = float(text)
            except ValueError:
                raise DataError(f"non-numeric value {text!r} in column {header[col]!r}",
                                lineno) from None
            if not math.isfinite(v):
                raise DataError(f"non-finite value {text!r} in column {header[col]!r}", lineno)
            if _is_sentinel(v):
                if not allow_missing:
                    raise MissingDataError(
                        f"missing value ({text}) for {header[col]!r} in {ym.stamp}", lineno)
                v = math.nan
            values.append(v / PERCENT)
        dates.append(ym)
        rows.append(values)
    if header is None:
        raise DataError("empty input")
    if not rows:
        raise DataError("no data rows after the header")
    return ReturnsPanel(tuple(dates), tuple(header[1:]), np.array(rows))


def _percent_text(v):
    """Shortest text that parses back to exactly ``v`` after division by 100."""
    if math.isnan(v):
        return "-99.99"
    c = v * PERCENT
    candidates = [c]
    up = down = c
    for _ in range(8):
        up, down = math.nextafter(up, math.inf), math.nextafter(down, -math.inf)
        candidates += [up, down]
    for cand in candidates:
        text = repr(cand)
        if float(text) / PERCENT == v:
            return text
    raise DataError(f"cannot represent {v!r} exactly in percent")


def serialize_returns_csv(panel, date_header="Date"):
    """Render ``panel`` in the input layout so that parsing it returns the same panel."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([date_header, *panel.assets])
    for ym, row in zip(panel.dates, panel.values):
        writer.writerow([ym.stamp, *(_percent_text(float(v)) for v in row)])
    return out.getvalue()


def convert_french_table(lines, header_line, first_line, last_line):
    """Cut one table out of a raw library file.

    The raw files hold several tables with prose between them, so the caller
    names the 1-based line numbers of the header row and of the first and
    last data rows instead of having the boundaries guessed. Returns CSV
    text in the input layout.
    """
    lines = list(lines)
    if not 1 <= header_line < first_line <= last_line <= len(lines):
        raise DataError(f"bad line range header={header_line}, rows={first_line}..{last_line} "
                        f"for a file of {len(lines)} lines")
    header = [c.strip() for c in next(csv.reader([lines[header_line - 1]]))]
    header[0] = header[0] or "Date"
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in csv.reader(lines[first_line - 1:last_line]):
        writer.writerow([c.strip() for c in row])
    return out.getvalue()


def _row_range(panel, w):
    if not panel.dates:
        raise DataError("empty panel")
    first, last = panel.dates[0], panel.dates[-1]
    if w.start < first or w.end > last:
        raise DataError(f"window {w.start}-{w.end} outside the panel range {first}-{last}")
    lo = w.start.index - first.index
    return lo, lo + w.months


def slice_window(panel, w):
    """Rows of ``panel`` falling in window ``w``, as a new ``months x n`` array."""
    lo, hi = _row_range(panel, w)
    return np.array(panel.values[lo:hi])


def compute_beta(panel, w):
    """Average monthly return of the equal-weight portfolio over ``w``."""
    block = slice_window(panel, w)
    if block.size == 0:
        raise DataError("empty window")
    if np.isnan(block).any():
        raise MissingDataError(f"missing values inside window {w.label}")
    return float(block.mean(axis=1).mean())


def select_assets(panel, keep):
    """Panel restricted to the assets whose column indices are in ``keep``."""
    keep = list(keep)
    return ReturnsPanel(panel.dates, tuple(panel.assets[i] for i in keep),
                        panel.values[:, keep])


def drop_incomplete_assets(panel, windows):
    """Drop every asset with a missing value in any of ``windows``.

    Returns the reduced panel and the names of the dropped assets.
    """
    bad = np.zeros(panel.n, dtype=bool)
    for w in windows:
        lo, hi = _row_range(panel, w)
        bad |= np.isnan(panel.values[lo:hi]).any(axis=0)
    dropped = tuple(name for name, b in zip(panel.assets, bad) if b)
    kept = select_assets(panel, np.flatnonzero(~bad))
    if kept.n < 2:
        raise DataError("fewer than two assets remain after dropping incomplete ones")
    return kept, dropped


@dataclass(frozen=True)
class WindowPlan:
    """Estimation window paired with each evaluation sub-period."""

    estimation: tuple
    evaluation: tuple
    fixed_estimation: bool = field(default=False)

    def __post_init__(self):
        if len(self.estimation) != len(self.evaluation) or not self.evaluation:
            raise DataError("need one estimation window per evaluation sub-period")
        for est, ev in zip(self.estimation, self.evaluation):
            if est.end >= ev.start:
                raise DataError(f"estimation window {est.label} overlaps or follows "
                                f"its evaluation period {ev.label}")
        for prev, cur in zip(self.evaluation, self.evaluation[1:]):
            if cur.start <= prev.end:
                raise DataError("evaluation sub-periods must be ordered and disjoint")

    @property
    def windows(self):
        return tuple(self.estimation) + tuple(self.evaluation)

    @property
    def whole(self):
        """The span of all evaluation months."""
        return Window(self.evaluation[0].start, self.evaluation[-1].end)


def rolling_plan(first_evaluation, periods, period_months, estimation_months,
                 fixed_estimation=False):
    """Consecutive sub-periods, each estimated on the months right before it.

    With ``fixed_estimation`` every sub-period reuses the first estimation
    window instead.
    """
    if periods < 1 or period_months < 1 or estimation_months < 2:
        raise DataError("periods, period length and estimation length must be positive")
    start = _as_month(first_evaluation)
    evaluation, estimation = [], []
    for k in range(periods):
        s = start.shift(k * period_months)
        evaluation.append(Window(s, s.shift(period_months - 1)))
        anchor = start if fixed_estimation else s
        estimation.append(Window(anchor.shift(-estimation_months), anchor.shift(-1)))
    return WindowPlan(tuple(estimation), tuple(evaluation), fixed_estimation)


def default_plan(fixed_estimation=False):
    """Six five-year sub-periods from 07/1976 to 06/2006 with 60-month estimation."""
    return rolling_plan(YearMonth(1976, 7), 6, 60, 60, fixed_estimation)
