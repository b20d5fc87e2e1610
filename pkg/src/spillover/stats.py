"""Descriptive moments, Jarque-Bera, and Pearson/Spearman/Kendall correlations.

Kendall's tau is the tie-corrected tau-b, computed in O(n log n) with
Knight's algorithm: lexicographic sort on ``(x, y)`` followed by a merge sort
of ``y`` that counts exchanges.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numba
import numpy as np
from scipy import stats as sps

from .errors import InputError

KINDS = ("pearson", "spearman", "kendall")


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    jb_statistic: float
    n: int

    @property
    def jb_pvalue(self) -> float:
        """Upper tail of the chi-square(2) reference distribution."""
        return float(sps.chi2.sf(self.jb_statistic, 2))


@dataclass(frozen=True)
class CorrelationMatrix:
    kind: str
    values: np.ndarray
    pvalues: np.ndarray
    names: tuple[str, ...] = ()


def moments(series) -> MomentSummary:
    """Population moments and the Jarque-Bera statistic of one series.

    ``skewness = m3 / m2**1.5``, ``excess_kurtosis = m4 / m2**2 - 3`` and
    ``jb = n / 6 * (S**2 + EK**2 / 4)`` with central moments normalised by n.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 4:
        raise InputError(f"moments need at least 4 observations, got {n}")
    if not np.all(np.isfinite(x)):
        raise InputError("moments need finite observations")
    mu = x.mean()
    d = x - mu
    m2 = np.mean(d**2)
    if m2 <= 0.0:
        raise InputError("series has zero variance")
    m3 = np.mean(d**3)
    m4 = np.mean(d**4)
    skew = m3 / m2**1.5
    ekurt = m4 / m2**2 - 3.0
    jb = n / 6.0 * (skew**2 + ekurt**2 / 4.0)
    return MomentSummary(float(mu), float(m2), float(skew), float(ekurt), float(jb), n)


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise InputError(f"length mismatch: {x.size} vs {y.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("correlation inputs must be finite")
    return x, y


def _check_nonconstant(data: np.ndarray, labels: Sequence[str] | None = None) -> None:
    flat = np.ptp(data, axis=0) == 0
    if flat.any():
        j = int(np.argmax(flat))
        label = labels[j] if labels is not None else f"column {j}"
        raise InputError(f"{label} is constant; correlation undefined")


def _t_pvalue(r, n: int):
    """Two-sided p-value of a correlation coefficient under the t(n-2) approximation."""
    r = np.clip(np.asarray(r, dtype=float), -1.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = r * np.sqrt((n - 2) / ((1.0 - r) * (1.0 + r)))
    return 2.0 * sps.t.sf(np.abs(t), n - 2)


def pearson(x, y) -> tuple[float, float]:
    """Pearson's r with a two-sided t-test p-value."""
    x, y = _pair(x, y)
    if x.size < 3:
        raise InputError("pearson needs at least 3 observations")
    _check_nonconstant(np.column_stack([x, y]), ["x", "y"])
    r = float(_pearson_matrix(np.column_stack([x, y]))[0, 1])
    return r, float(_t_pvalue(r, x.size))


def rank_average(x) -> np.ndarray:
    """1-based ranks with ties given the average of the ranks they span."""
    return sps.rankdata(np.asarray(x, dtype=float), method="average", axis=0)


def spearman(x, y) -> tuple[float, float]:
    x, y = _pair(x, y)
    if x.size < 3:
        raise InputError("spearman needs at least 3 observations")
    _check_nonconstant(np.column_stack([x, y]), ["x", "y"])
    return pearson(rank_average(x), rank_average(y))


# --- Kendall tau-b ---------------------------------------------------------


@numba.njit(cache=True)
def _count_exchanges(a, buf):
    """Stable bottom-up merge sort of ``a`` in place; returns strict inversions."""
    n = a.size
    swaps = 0
    width = 1
    src = a
    dst = buf
    in_buf = False
    while width < n:
        lo = 0
        while lo < n:
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
            lo += 2 * width
        src, dst = dst, src
        in_buf = not in_buf
        width *= 2
    if in_buf:
        a[:] = src
    return swaps


@numba.njit(cache=True)
def _tie_pairs(sorted_vals):
    total = 0
    run = 1
    for i in range(1, sorted_vals.size):
        if sorted_vals[i] == sorted_vals[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@numba.njit(cache=True)
def _kendall_counts(x, y):
    """Return ``(S, n0 - n1, n0 - n2)`` where ``S`` = concordant - discordant.

    ``n1``/``n2`` are pairs tied in x/y; tau-b = S / sqrt((n0-n1)(n0-n2)).
    """
    n = x.size
    order = np.argsort(y, kind="mergesort")
    order = order[np.argsort(x[order], kind="mergesort")]
    xs = x[order]
    ys = y[order].copy()

    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n3 = 0
    run = 1
    for i in range(1, n):
        if xs[i] == xs[i - 1] and ys[i] == ys[i - 1]:
            run += 1
        else:
            n3 += run * (run - 1) // 2
            run = 1
    n3 += run * (run - 1) // 2

    swaps = _count_exchanges(ys, np.empty_like(ys))
    n2 = _tie_pairs(ys)
    s = n0 - n1 - n2 + n3 - 2 * swaps
    return s, n0 - n1, n0 - n2


@numba.njit(cache=True)
def _kendall_matrix(data):
    """All pairwise tau-b values; returns ``(matrix, bad_column or -1)``.

    Column ``i`` is sorted once and reused for every partner ``j``; only the
    runs of tied ``x`` need a secondary sort on ``y``.
    """
    n, k = data.shape
    out = np.eye(k)
    n0 = n * (n - 1) // 2
    buf = np.empty(n)
    for i in range(k):
        xi = np.ascontiguousarray(data[:, i])
        order = np.argsort(xi, kind="mergesort")
        xs = xi[order]
        n1 = _tie_pairs(xs)
        if n1 == n0:
            return out, i
        for j in range(i + 1, k):
            ys = data[:, j][order]
            lo = 0
            for m in range(1, n + 1):
                if m == n or xs[m] != xs[lo]:
                    if m - lo > 1:
                        ys[lo:m] = np.sort(ys[lo:m])
                    lo = m
            n3 = 0
            run = 1
            for m in range(1, n):
                if xs[m] == xs[m - 1] and ys[m] == ys[m - 1]:
                    run += 1
                else:
                    n3 += run * (run - 1) // 2
                    run = 1
            n3 += run * (run - 1) // 2
            swaps = _count_exchanges(ys, buf)
            n2 = _tie_pairs(ys)
            if n2 == n0:
                return out, j
            s = n0 - n1 - n2 + n3 - 2 * swaps
            tau = s / np.sqrt(float(n0 - n1) * float(n0 - n2))
            out[i, j] = tau
            out[j, i] = tau
    return out, -1


def _tie_variance_terms(x: np.ndarray) -> tuple[float, float, float]:
    _, t = np.unique(x, return_counts=True)
    t = t[t > 1].astype(float)
    return (
        float(np.sum(t * (t - 1) * (2 * t + 5))),
        float(np.sum(t * (t - 1))),
        float(np.sum(t * (t - 1) * (t - 2))),
    )


def _kendall_pvalue(x: np.ndarray, y: np.ndarray, s: float) -> float:
    n = float(x.size)
    vx, v1x, v2x = _tie_variance_terms(x)
    vy, v1y, v2y = _tie_variance_terms(y)
    var = (
        (n * (n - 1) * (2 * n + 5) - vx - vy) / 18.0
        + v1x * v1y / (2 * n * (n - 1))
        + v2x * v2y / (9 * n * (n - 1) * (n - 2))
    )
    if var <= 0:
        return 1.0
    z = s / np.sqrt(var)
    return float(2.0 * sps.norm.sf(abs(z)))


def kendall(x, y) -> tuple[float, float]:
    """Kendall's tau-b and its asymptotic two-sided p-value.

    Without ties the p-value uses ``z = 3 tau sqrt(n(n-1)) / sqrt(2(2n+5))``;
    with ties the variance of ``S`` carries the usual tie corrections.

    Raises
    ------
    InputError
        Fewer than 3 observations, or every pair tied in one argument.
    """
    x, y = _pair(x, y)
    if x.size < 3:
        raise InputError("kendall needs at least 3 observations")
    s, dx, dy = _kendall_counts(x, y)
    if dx == 0 or dy == 0:
        raise InputError(f"all pairs are tied in {'x' if dx == 0 else 'y'}")
    tau = s / np.sqrt(float(dx) * float(dy))
    return float(np.clip(tau, -1.0, 1.0)), _kendall_pvalue(x, y, float(s))


# --- matrices --------------------------------------------------------------


def _pearson_matrix(data: np.ndarray) -> np.ndarray:
    z = data - data.mean(axis=0)
    cov = z.T @ z
    d = np.sqrt(np.diag(cov))
    r = cov / np.outer(d, d)
    r = np.triu(r, 1)
    r = r + r.T
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


def correlation_values(data, kind: str = "pearson", labels: Sequence[str] | None = None) -> np.ndarray:
    """Correlation matrix of the columns of ``data`` without p-values.

    This is the fast path used inside the rolling decomposition.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise InputError("correlation data must be 2-D (n, K)")
    if data.shape[0] < 3:
        raise InputError("correlations need at least 3 observations")
    _check_nonconstant(data, labels)
    if kind == "pearson":
        return _pearson_matrix(data)
    if kind == "spearman":
        return _pearson_matrix(rank_average(data))
    if kind == "kendall":
        out, bad = _kendall_matrix(np.ascontiguousarray(data))
        if bad >= 0:
            label = labels[bad] if labels is not None else f"column {bad}"
            raise InputError(f"{label}: all pairs tied")
        return np.clip(out, -1.0, 1.0)
    raise InputError(f"unknown correlation kind {kind!r}; expected one of {KINDS}")


def correlation_matrix(panel, kind: str = "pearson") -> CorrelationMatrix:
    """Pairwise correlations of every series in ``panel`` with p-values.

    ``panel`` is a :class:`~spillover.panel.ReturnPanel` or a ``(n, K)`` array.
    Diagonal p-values are zero.
    """
    if hasattr(panel, "values") and hasattr(panel, "names"):
        data, names = np.asarray(panel.values, dtype=float), tuple(panel.names)
    else:
        data = np.asarray(panel, dtype=float)
        names = tuple(f"column {j}" for j in range(data.shape[1]))
    flat = np.ptp(data, axis=0) == 0 if data.ndim == 2 and data.size else None
    if flat is not None and flat.any():
        j = int(np.argmax(flat))
        other = names[1] if j == 0 and len(names) > 1 else names[0]
        raise InputError(
            f"correlation between {other!r} and {names[j]!r} is undefined: {names[j]!r} is constant"
        )
    values = correlation_values(data, kind, labels=[repr(n) for n in names])
    n = data.shape[0]
    if kind == "kendall":
        k = data.shape[1]
        pvalues = np.zeros((k, k))
        for i in range(k):
            for j in range(i + 1, k):
                s = np.round(values[i, j] * _kendall_norm(data[:, i], data[:, j]))
                pvalues[i, j] = pvalues[j, i] = _kendall_pvalue(data[:, i], data[:, j], s)
    else:
        pvalues = _t_pvalue(values, n)
        np.fill_diagonal(pvalues, 0.0)
    return CorrelationMatrix(kind, values, pvalues, names)


def _kendall_norm(x: np.ndarray, y: np.ndarray) -> float:
    n0 = x.size * (x.size - 1) / 2
    _, v1x, _ = _tie_variance_terms(x)
    _, v1y, _ = _tie_variance_terms(y)
    return float(np.sqrt((n0 - v1x / 2) * (n0 - v1y / 2)))
