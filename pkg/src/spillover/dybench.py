"""Diebold-Yilmaz connectedness from a generalized FEVD of a plain VAR(p).

This is the order-invariant baseline the R2 measures are compared with.
The VAR has an intercept and no contemporaneous block; the generalized
decomposition of the H-step forecast error variance is row-normalised and
fed through the same TO/FROM/NET/NPDC/TCI formulas as the R2 tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, SpilloverError

DEFAULT_HORIZON = 10


@dataclass(frozen=True)
class VarFit:
    """Least-squares VAR(p) estimates.

    ``coef[l - 1]`` is the K x K matrix multiplying ``y_{t-l}``.
    """

    p: int
    coef: tuple[np.ndarray, ...]
    intercept: np.ndarray
    sigma: np.ndarray
    stderr: tuple[np.ndarray, ...] = ()
    nobs: int = 0
    resid: np.ndarray | None = None
    spectral_radius: float = 0.0
    warnings: tuple[str, ...] = field(default=())

    @property
    def K(self) -> int:
        return self.sigma.shape[0]

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0


@dataclass(frozen=True)
class GfevdTable:
    """Scaled generalized FEVD; ``values[i, j]`` is the share of i's FEV due to j."""

    horizon: int
    values: np.ndarray
    raw: np.ndarray


def lagged_design(y: np.ndarray, p: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Targets ``y[start:]`` and regressors ``[1, y_{t-1}, ..., y_{t-p}]``."""
    n = y.shape[0]
    Y = y[start:]
    cols = [np.ones((n - start, 1))]
    cols += [y[start - lag : n - lag] for lag in range(1, p + 1)]
    return Y, np.hstack(cols)


def companion_radius(coef) -> float:
    """Spectral radius of the VAR companion matrix."""
    if not coef:
        return 0.0
    K = coef[0].shape[0]
    p = len(coef)
    top = np.hstack(coef)
    if p == 1:
        comp = top
    else:
        comp = np.vstack([top, np.eye(K * (p - 1), K * p)])
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def var_ols(window, p: int, *, start: int | None = None, ddof: bool = True) -> VarFit:
    """Equation-by-equation least squares for a VAR(p) with intercept.

    Parameters
    ----------
    window : array_like, shape (n, K)
    p : int
        Lag order, ``p >= 0``.
    start : int, optional
        First row used as a target; defaults to ``p``.  Lag selection passes a
        common ``start = p_max`` so every candidate order sees the same sample.
    ddof : bool
        If True the residual covariance is divided by ``T* - Kp - 1``,
        otherwise by ``T*`` (the maximum likelihood normaliser).

    Raises
    ------
    EstimationError
        Too few rows, or a rank-deficient regressor matrix.
    """
    y = np.asarray(window, dtype=float)
    if y.ndim != 2:
        raise EstimationError("VAR data must be 2-D (n, K)")
    n, K = y.shape
    if p < 0:
        raise EstimationError(f"lag order must be >= 0, got {p}")
    start = p if start is None else int(start)
    if start < p:
        raise EstimationError(f"start row {start} leaves no room for {p} lag(s)")
    if n <= K * p + 10:
        raise EstimationError(f"{n} rows are too few for a VAR({p}) in {K} variables")
    Y, X = lagged_design(y, p, start)
    T = Y.shape[0]
    B, _, rank, _ = np.linalg.lstsq(X, Y, rcond=None)
    if rank < X.shape[1]:
        raise EstimationError(
            f"singular regressor cross-product (rank {rank} < {X.shape[1]})"
        )
    resid = Y - X @ B
    dof = T - K * p - 1 if ddof else T
    if dof <= 0:
        raise EstimationError("no residual degrees of freedom")
    sigma = resid.T @ resid / dof
    sigma = (sigma + sigma.T) / 2
    xtx_inv = np.linalg.inv(X.T @ X)
    coef = tuple(B[1 + (lag - 1) * K : 1 + lag * K].T.copy() for lag in range(1, p + 1))
    diag_inv = np.diag(xtx_inv)
    stderr = tuple(
        np.sqrt(np.outer(np.diag(sigma), diag_inv[1 + (lag - 1) * K : 1 + lag * K]))
        for lag in range(1, p + 1)
    )
    radius = companion_radius(coef)
    notes = ()
    if radius >= 1.0:
        notes = (f"nonstationary VAR fit: companion spectral radius {radius:.4f}",)
    return VarFit(p, coef, B[0].copy(), sigma, stderr, T, resid, radius, notes)


def ma_coefficients(fit: VarFit, H: int) -> list[np.ndarray]:
    """Moving-average matrices ``A_0 = I, ..., A_{H-1}`` of the fitted VAR."""
    if H < 1:
        raise SpilloverError(f"horizon must be >= 1, got {H}")
    K = fit.K
    A = [np.eye(K)]
    for h in range(1, H):
        acc = np.zeros((K, K))
        for lag in range(1, min(h, fit.p) + 1):
            acc += fit.coef[lag - 1] @ A[h - lag]
        A.append(acc)
    return A


def gfevd(fit: VarFit, H: int = DEFAULT_HORIZON) -> GfevdTable:
    """Generalized forecast error variance decomposition at horizon H.

    ``raw[i, j] = sum_h (A_h S)_{ij}^2 / (S_jj * sum_h (A_h S A_h')_{ii})``;
    ``values`` rescales each row of ``raw`` to sum to one.
    """
    sigma = np.asarray(fit.sigma, dtype=float)
    s_jj = np.diag(sigma)
    if np.any(s_jj <= 0):
        raise EstimationError("innovation variances must be positive")
    num = np.zeros_like(sigma)
    den = np.zeros(sigma.shape[0])
    for A in ma_coefficients(fit, H):
        AS = A @ sigma
        num += AS**2
        den += np.einsum("ij,ij->i", AS, A)
    raw = num / den[:, None] / s_jj[None, :]
    return GfevdTable(H, raw / raw.sum(axis=1, keepdims=True), raw)


def dy_measures(table: GfevdTable, percent: bool = False, names=None):
    """Connectedness table of a scaled GFEVD.

    There is no contemporaneous/lagged split for this method; every triple is
    emitted as ``(overall, 0, overall)`` and the table is flagged with
    ``has_split=False``.
    """
    from .connectedness import measures

    values = np.asarray(table.values, dtype=float)
    out = measures(np.zeros_like(values), values, percent=percent, names=names)
    return out.without_split()


def dy_rolling(
    returns,
    window_length: int,
    p: int = 1,
    horizon: int = DEFAULT_HORIZON,
    *,
    percent: bool = False,
    workers: int | None = None,
):
    """Rolling-window DY connectedness on the same windows as the R2 engine."""
    from .connectedness import DynamicSeries, evaluate_windows
    from .panel import windows

    wins = windows(returns, window_length, p_max=p)
    names = returns.names

    def one(w):
        fit = var_ols(returns.window(w), p)
        return dy_measures(gfevd(fit, horizon), percent=percent, names=names), fit.warnings

    tables, notes = evaluate_windows(
        wins, one, names, workers=workers, percent=percent, has_split=False
    )
    return DynamicSeries(
        names=names,
        end_dates=tuple(w.end_date for w in wins),
        tables=tuple(tables),
        warnings=tuple(notes),
        lags=tuple(p for _ in wins),
        method="dy",
        kind=None,
    )
