"""Price panels, forward filling, log returns and rolling windows.

A price CSV looks like::

    date,OilB,CarE,...
    2020-12-15,50.29,31.80,...

Cells that are empty, equal to one of the sentinel tokens, or that do not
parse as a number are treated as absent.  Absent cells are repaired with
:func:`forward_fill` before :func:`log_returns` is applied.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import InputError

DEFAULT_DATE_FORMAT = "%Y-%m-%d"
DEFAULT_SENTINELS = ("", "NA", "NaN")
# rows beyond the number of regressors, required in every window
EXTRA_OBSERVATIONS = 10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_names(names: Sequence[str]) -> tuple[str, ...]:
    names = tuple(str(n) for n in names)
    if any(not n.strip() for n in names):
        raise InputError("series names must be nonempty")
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise InputError(f"duplicate series names: {dupes}")
    return names


def _check_dates(dates: Sequence[date]) -> tuple[date, ...]:
    dates = tuple(dates)
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise InputError(f"dates must be strictly increasing, got {a} followed by {b}")
    return dates


@dataclass(frozen=True)
class PricePanel:
    """Date-indexed matrix of prices with a presence mask.

    ``values`` holds NaN wherever ``mask`` is False.
    """

    dates: tuple[date, ...]
    names: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        dates = _check_dates(self.dates)
        names = _check_names(self.names)
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.shape != (len(dates), len(names)) or mask.shape != values.shape:
            raise InputError(
                f"panel shape mismatch: values {values.shape}, mask {mask.shape}, "
                f"{len(dates)} dates, {len(names)} names"
            )
        values = np.where(mask, values, np.nan)
        present = values[mask]
        if not np.all(np.isfinite(present)) or np.any(present <= 0):
            raise InputError("present prices must be finite and strictly positive")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "mask", _readonly(mask))

    @property
    def n_obs(self) -> int:
        return len(self.dates)

    @property
    def n_series(self) -> int:
        return len(self.names)

    @property
    def complete(self) -> bool:
        """True when every cell is present."""
        return bool(self.mask.all())


@dataclass(frozen=True)
class ReturnPanel:
    """Date-indexed matrix of log returns, one column per series."""

    dates: tuple[date, ...]
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        dates = _check_dates(self.dates)
        names = _check_names(self.names)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(dates), len(names)):
            raise InputError(
                f"return matrix shape {values.shape} does not match "
                f"{len(dates)} dates x {len(names)} names"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("returns must be finite")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def from_array(
        cls,
        values,
        names: Sequence[str] | None = None,
        dates: Sequence[date] | None = None,
        start: date = date(2000, 1, 1),
    ) -> "ReturnPanel":
        """Wrap a plain ``(T, K)`` array, inventing labels and daily dates if needed."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise InputError("returns must be a 2-D array (T, K)")
        if names is None:
            names = [f"y{i + 1}" for i in range(values.shape[1])]
        if dates is None:
            dates = [start + timedelta(days=i) for i in range(values.shape[0])]
        return cls(tuple(dates), tuple(names), values)

    @property
    def n_obs(self) -> int:
        return len(self.dates)

    @property
    def n_series(self) -> int:
        return len(self.names)

    def window(self, w: "Window") -> np.ndarray:
        """Rows covered by ``w`` as a read-only view."""
        return self.values[w.start_index : w.start_index + w.length]


@dataclass(frozen=True)
class Window:
    start_index: int
    length: int
    end_date: date

    @property
    def stop(self) -> int:
        return self.start_index + self.length


def minimum_window(n_series: int, p_max: int) -> int:
    """Smallest admissible window for a K-variable system with up to ``p_max`` lags.

    The contemporaneous+lagged regression has ``K(p+1) - 1`` right-hand side
    columns, so ``K(p_max + 1) + 10`` rows leave ten spare degrees of freedom.
    """
    return n_series * (p_max + 1) + EXTRA_OBSERVATIONS


def _parse_price(cell: str, sentinels: frozenset[str]) -> float:
    token = cell.strip()
    if token in sentinels:
        return math.nan
    try:
        x = float(token)
    except ValueError:
        return math.nan
    return x if math.isfinite(x) else math.nan


def load_csv(
    path: str | Path,
    date_format: str = DEFAULT_DATE_FORMAT,
    sentinels: Iterable[str] = DEFAULT_SENTINELS,
) -> PricePanel:
    """Read a ``date,<name1>,...,<nameK>`` price file.

    Parameters
    ----------
    path : str or Path
        UTF-8 comma-separated file with a header row.
    date_format : str
        ``strptime`` format of the first column.
    sentinels : iterable of str
        Tokens marking a missing price, compared after stripping whitespace.

    Returns
    -------
    PricePanel
        Rows sorted by date; unparseable or sentinel cells are masked out.

    Raises
    ------
    InputError
        Empty file, fewer than two series, bad dates, duplicate dates, or a
        non-positive price (the message names the date and column).
    """
    path = Path(path)
    sentinel_set = frozenset(s.strip() for s in sentinels)
    try:
        with path.open(newline="", encoding="utf-8-sig") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not valid UTF-8 ({exc})") from None
    if not rows:
        raise InputError(f"{path}: file is empty")
    header, body = rows[0], rows[1:]
    names = [h.strip() for h in header[1:]]
    if len(names) < 2:
        raise InputError(f"{path}: need at least 2 series, header has {len(names)}")
    names = list(_check_names(names))
    if not body:
        raise InputError(f"{path}: no data rows")

    dates: list[date] = []
    values = np.full((len(body), len(names)), np.nan)
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != len(header):
            raise InputError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
        try:
            d = datetime.strptime(row[0].strip(), date_format).date()
        except ValueError:
            raise InputError(
                f"{path}:{line}: cannot parse date {row[0]!r} with format {date_format!r}"
            ) from None
        dates.append(d)
        for c, cell in enumerate(row[1:]):
            x = _parse_price(cell, sentinel_set)
            if x <= 0:
                raise InputError(
                    f"{path}:{line}: non-positive price {cell.strip()!r} "
                    f"for series {names[c]!r} on {d.isoformat()}"
                )
            values[r, c] = x

    order = sorted(range(len(dates)), key=dates.__getitem__)
    sorted_dates = [dates[i] for i in order]
    for a, b in zip(sorted_dates, sorted_dates[1:]):
        if a == b:
            raise InputError(f"{path}: duplicate date {a.isoformat()}")
    values = values[order]
    return PricePanel(tuple(sorted_dates), tuple(names), values, ~np.isnan(values))


def forward_fill(panel: PricePanel) -> PricePanel:
    """Fill absent prices with the last present price of the same series.

    Rows before the first date by which every series has been observed are
    dropped instead of being back-filled.

    Raises
    ------
    InputError
        If some series has no present value at all.
    """
    mask = panel.mask
    empty = [n for n, has in zip(panel.names, mask.any(axis=0)) if not has]
    if empty:
        raise InputError(f"series entirely absent: {empty}")
    if panel.complete:
        return panel
    start = int(mask.argmax(axis=0).max())
    rows = np.arange(len(mask))[:, None]
    last = np.maximum.accumulate(np.where(mask, rows, 0), axis=0)
    filled = np.take_along_axis(panel.values, last, axis=0)[start:]
    return PricePanel(panel.dates[start:], panel.names, filled, np.ones_like(filled, dtype=bool))


def log_returns(panel: PricePanel) -> ReturnPanel:
    """``ln(p[t+1] / p[t])`` for each series, dated by the later observation."""
    if not panel.complete:
        r, c = np.argwhere(~panel.mask)[0]
        raise InputError(
            f"price for {panel.names[c]!r} on {panel.dates[r].isoformat()} is absent; "
            "run forward_fill first"
        )
    if panel.n_obs < 2:
        raise InputError("need at least two price rows to form returns")
    rets = np.diff(np.log(panel.values), axis=0)
    return ReturnPanel(panel.dates[1:], panel.names, rets)


def windows(returns: ReturnPanel, length: int, *, p_max: int | None = None) -> list[Window]:
    """All contiguous windows of ``length`` rows, stepping by one row.

    When ``p_max`` is given the length is also checked against
    :func:`minimum_window`.
    """
    length = int(length)
    n = returns.n_obs
    if length < 1:
        raise InputError(f"window length must be positive, got {length}")
    if length > n:
        raise InputError(f"window length {length} exceeds the {n} available return rows")
    if p_max is not None:
        need = minimum_window(returns.n_series, p_max)
        if length < need:
            raise InputError(
                f"window length {length} is below the minimum {need} for "
                f"{returns.n_series} series and {p_max} lag(s)"
            )
    return [Window(s, length, returns.dates[s + length - 1]) for s in range(n - length + 1)]
