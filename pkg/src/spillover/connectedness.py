"""Connectedness measures, BIC lag selection and the rolling-window engine.

Every measure is carried as a triple on the last axis, ordered as
:data:`COMPONENTS` = ``(overall, contemp, lagged)``.  Pairwise entry
``[i, j]`` is the share of series ``i`` explained by series ``j``.  Own-series
terms (the diagonal, i.e. own lags) stay out of TO, FROM, NET and TCI and are
reported through ``own_lag`` and ``inc_own``.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from .dybench import var_ols
from .errors import EstimationError, SpilloverError
from .panel import ReturnPanel, Window, windows
from .r2core import full_decomposition, split

log = logging.getLogger(__name__)

COMPONENTS = ("overall", "contemp", "lagged")
THREADS_ENV = "SPILLOVER_THREADS"


@dataclass(frozen=True)
class ConnectednessTable:
    """All connectedness measures of one system.

    Arrays end in an axis of length 3 ordered as :data:`COMPONENTS`, except
    ``own_lag`` which is the diagonal of the lagged block.  ``tci_literal`` is
    the mean of the full regression R2 values, own lags included, kept as a
    diagnostic next to ``tci`` (the mean of FROM).
    """

    names: tuple[str, ...]
    pairwise: np.ndarray
    to: np.ndarray
    from_: np.ndarray
    net: np.ndarray
    inc_own: np.ndarray
    tci: np.ndarray
    own_lag: np.ndarray
    npdc: np.ndarray
    tci_literal: np.ndarray
    percent: bool = False
    has_split: bool = True

    @property
    def K(self) -> int:
        return len(self.names)

    @property
    def is_nan(self) -> bool:
        return bool(np.isnan(self.tci[0]))

    def without_split(self) -> "ConnectednessTable":
        return replace(self, has_split=False)

    @classmethod
    def nan(cls, names: Sequence[str], percent: bool = False, has_split: bool = True):
        """Placeholder for a window whose estimation failed."""
        K = len(names)
        vec = np.full((K, 3), np.nan)
        mat = np.full((K, K, 3), np.nan)
        return cls(
            tuple(names), mat, vec, vec.copy(), vec.copy(), vec.copy(),
            np.full(3, np.nan), np.full(K, np.nan), mat.copy(), np.full(3, np.nan),
            percent, has_split,
        )


@dataclass(frozen=True)
class NpdcMatrix:
    """Net pairwise directional connectedness.

    ``values[i, j] > 0`` means j explains more of i than i explains of j.
    """

    values: np.ndarray


@dataclass(frozen=True)
class DynamicSeries:
    names: tuple[str, ...]
    end_dates: tuple[date, ...]
    tables: tuple[ConnectednessTable, ...]
    warnings: tuple[tuple[str, ...], ...] = field(default=())
    lags: tuple[int, ...] = field(default=())
    method: str = "r2"
    kind: str | None = "pearson"

    def __post_init__(self):
        if len(self.end_dates) != len(self.tables):
            raise SpilloverError("end_dates and tables differ in length")
        for a, b in zip(self.end_dates, self.end_dates[1:]):
            if not a < b:
                raise SpilloverError("window end dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.tables)

    def stack(self, attr: str) -> np.ndarray:
        """``getattr(table, attr)`` for every window, stacked on a new first axis."""
        return np.stack([getattr(t, attr) for t in self.tables])

    @property
    def tci(self) -> np.ndarray:
        return self.stack("tci")

    @property
    def failed(self) -> np.ndarray:
        return np.array([t.is_nan for t in self.tables], dtype=bool)


def _check_square(R_C: np.ndarray, R_L: np.ndarray) -> None:
    if R_C.ndim != 2 or R_C.shape[0] != R_C.shape[1] or R_C.shape != R_L.shape:
        raise SpilloverError(
            f"contemporaneous {R_C.shape} and lagged {R_L.shape} matrices must be equal K x K"
        )


def _triples(R_C, R_L) -> np.ndarray:
    R_C = np.asarray(R_C, dtype=float)
    R_L = np.asarray(R_L, dtype=float)
    _check_square(R_C, R_L)
    return np.stack([R_C + R_L, R_C, R_L], axis=-1)


def npdc(R_C, R_L, percent: bool = False) -> NpdcMatrix:
    pair = _triples(R_C, R_L)
    scale = 100.0 if percent else 1.0
    return NpdcMatrix(scale * (pair - pair.transpose(1, 0, 2)))


def measures(R_C, R_L, percent: bool = False, names: Sequence[str] | None = None) -> ConnectednessTable:
    """TO, FROM, NET, Inc.Own and TCI from the contemporaneous and lagged matrices.

    ``FROM_i = sum_{k != i} R[i, k]``, ``TO_i = sum_{k != i} R[k, i]``,
    ``NET_i = TO_i - FROM_i``, ``TCI = mean(FROM)`` and
    ``inc_own_i = TO_i + R[i, i]`` for each of the three components.  With
    ``percent=True`` everything is multiplied by 100.
    """
    pair = _triples(R_C, R_L)
    K = pair.shape[0]
    if names is None:
        names = [f"y{i + 1}" for i in range(K)]
    if len(names) != K:
        raise SpilloverError(f"{len(names)} names for a {K}-series system")
    scale = 100.0 if percent else 1.0
    pair = scale * pair
    diag = pair[np.arange(K), np.arange(K)]
    off = pair.copy()
    off[np.arange(K), np.arange(K)] = 0.0
    from_ = off.sum(axis=1)
    to = off.sum(axis=0)
    return ConnectednessTable(
        names=tuple(names),
        pairwise=pair,
        to=to,
        from_=from_,
        net=to - from_,
        inc_own=to + diag,
        tci=from_.mean(axis=0),
        own_lag=diag[:, 2].copy(),
        npdc=off - off.transpose(1, 0, 2),
        tci_literal=pair.sum(axis=1).mean(axis=0),
        percent=percent,
    )


def bic_lag(window, p_max: int) -> int:
    """Lag order of a plain VAR minimising BIC over ``1..p_max``.

    All candidates are fitted on the common sample starting at row ``p_max``;
    ``BIC(p) = ln det(Sigma_ML) + p K^2 ln(T) / T``.  Orders whose criterion is
    within 1e-12 of the minimum are resolved toward the smaller lag.
    """
    y = np.asarray(window, dtype=float)
    if p_max < 1:
        raise SpilloverError(f"p_max must be >= 1, got {p_max}")
    n, K = y.shape
    if n <= K * p_max + 10:
        raise EstimationError(f"{n} rows are too few for lag selection up to {p_max}")
    T = n - p_max
    crit = []
    for p in range(1, p_max + 1):
        fit = var_ols(y, p, start=p_max, ddof=False)
        sign, logdet = np.linalg.slogdet(fit.sigma)
        if sign <= 0:
            raise EstimationError(f"residual covariance of VAR({p}) is singular")
        crit.append(logdet + np.log(T) / T * p * K * K)
    crit = np.array(crit)
    return int(np.flatnonzero(crit <= crit.min() + 1e-12)[0]) + 1


def _worker_count(workers: int | None) -> int:
    if workers is None:
        try:
            workers = int(os.environ.get(THREADS_ENV, "1"))
        except ValueError:
            workers = 1
    return max(1, int(workers))


def evaluate_windows(
    wins: Sequence[Window],
    fn: Callable[[Window], tuple[ConnectednessTable, Sequence[str]]],
    names: Sequence[str],
    *,
    workers: int | None = None,
    percent: bool = False,
    has_split: bool = True,
) -> tuple[list[ConnectednessTable], list[tuple[str, ...]]]:
    """Apply ``fn`` to every window, in date order, tolerating isolated failures.

    A failing window yields a NaN table and a warning.  If every window fails
    the first error is re-raised.
    """

    def guarded(w):
        try:
            table, notes = fn(w)
            return table, tuple(notes), None
        except (SpilloverError, np.linalg.LinAlgError) as exc:
            msg = f"window ending {w.end_date.isoformat()} failed: {exc}"
            return ConnectednessTable.nan(names, percent, has_split), (msg,), exc

    n_workers = _worker_count(workers)
    if n_workers > 1 and len(wins) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(guarded, wins))
    else:
        results = [guarded(w) for w in wins]
    errors = [err for _, _, err in results if err is not None]
    if errors and len(errors) == len(results):
        raise errors[0]
    for _, notes, err in results:
        if err is not None:
            log.warning(notes[0])
    return [t for t, _, _ in results], [n for _, n, _ in results]


def rolling(
    returns: ReturnPanel,
    window_length: int,
    p: int | str = 1,
    kind: str = "pearson",
    *,
    p_max: int = 5,
    per_window_lag: bool = False,
    percent: bool = False,
    workers: int | None = None,
) -> DynamicSeries:
    """R2-decomposed connectedness on every rolling window.

    Parameters
    ----------
    returns : ReturnPanel
    window_length : int
        Rows per window.
    p : int or "auto"
        Lag order.  ``"auto"`` picks it by :func:`bic_lag` once on the full
        sample, or per window when ``per_window_lag`` is set.
    kind : {"pearson", "spearman", "kendall"}
        Correlation estimator behind the decomposition.
    percent : bool
        Report measures on the 0-100 scale.
    workers : int, optional
        Thread count; defaults to ``$SPILLOVER_THREADS`` or 1.
    """
    auto = p == "auto"
    if not auto:
        p = int(p)
        if p < 0:
            raise SpilloverError(f"lag order must be >= 0 or 'auto', got {p}")
    if auto and not per_window_lag:
        p = bic_lag(returns.values, p_max)
        log.info("BIC selected lag order %d on the full sample", p)
    wins = windows(returns, window_length, p_max=p_max if auto else p)
    names = returns.names
    chosen: dict[int, int] = {}

    def one(w: Window):
        data = returns.window(w)
        lag = bic_lag(data, p_max) if (auto and per_window_lag) else p
        chosen[w.start_index] = lag
        D = full_decomposition(data, lag, kind)
        R_C, R_L = split(D)
        return measures(R_C, R_L, percent=percent, names=names), D.warnings

    tables, notes = evaluate_windows(wins, one, names, workers=workers, percent=percent)
    return DynamicSeries(
        names=names,
        end_dates=tuple(w.end_date for w in wins),
        tables=tuple(tables),
        warnings=tuple(notes),
        lags=tuple(chosen.get(w.start_index, -1) for w in wins),
        method="r2",
        kind=kind,
    )
