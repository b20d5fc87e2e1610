"""R2 decomposition of contemporaneous-plus-lagged regressions.

Every series ``k`` is regressed on the same-period values of the other
series and on ``p`` lags of all series.  The regression R2 is allocated to
the individual regressors through the symmetric square root ``C`` of the
regressor correlation matrix::

    R_xx = V diag(lam) V'      C = V diag(sqrt(lam)) V'
    w = C^{-1} R_yx            contributions = (C * C) @ (w * w)

with both squarings element-wise.  Because the columns of ``C * C`` sum to
the unit diagonal of ``R_xx``, the contributions add up to
``R_yx' R_xx^{-1} R_yx``, the goodness of fit of the full regression.
Stacking the K equations gives a ``K x K(p+1)`` matrix whose first block
holds contemporaneous and whose remaining blocks hold lagged shares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DecompositionError
from .panel import EXTRA_OBSERVATIONS
from .stats import correlation_values

SYMMETRY_TOL = 1e-10
NEGATIVE_EIG_TOL = 1e-8
EIG_FLOOR = 1e-10
R2_EXCESS_TOL = 1e-6


@dataclass(frozen=True)
class DesignSpec:
    """Column layout of one equation.

    ``column_map[c] = (series, lag)`` names right-hand side column ``c``:
    first the other series at lag 0, then all series at lags ``1..p``.
    """

    k: int
    p: int
    column_map: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class DecompositionVector:
    k: int | None
    contributions: np.ndarray
    r_squared: float
    clamped: bool = False


@dataclass(frozen=True)
class DecompositionMatrix:
    """Stacked decompositions of all K equations of one window.

    ``blocks[l][k, j]`` is the R2 share of equation ``k`` explained by series
    ``j`` at lag ``l``; ``blocks[0]`` has a zero diagonal.
    """

    K: int
    p: int
    blocks: np.ndarray
    r_squared_per_equation: np.ndarray
    warnings: tuple[str, ...] = field(default=())


def column_map(n_series: int, k: int, p: int) -> tuple[tuple[int, int], ...]:
    if not 0 <= k < n_series:
        raise DecompositionError(f"target index {k} outside [0, {n_series})")
    if p < 0:
        raise DecompositionError(f"lag order must be >= 0, got {p}")
    contemp = [(j, 0) for j in range(n_series) if j != k]
    lagged = [(j, lag) for lag in range(1, p + 1) for j in range(n_series)]
    return tuple(contemp + lagged)


def _check_rows(n_rows: int, n_series: int, p: int) -> None:
    need = n_series * (p + 1) - 1 + EXTRA_OBSERVATIONS
    if n_rows <= need:
        raise DecompositionError(
            f"window has {n_rows} rows; more than {need} are needed for "
            f"{n_series} series with {p} lag(s)"
        )


def stacked_lags(window: np.ndarray, p: int) -> np.ndarray:
    """``[y_t, y_{t-1}, ..., y_{t-p}]`` for ``t = p .. n-1``, shape ``(n-p, K(p+1))``."""
    n = window.shape[0]
    return np.hstack([window[p - lag : n - lag] for lag in range(p + 1)])


def build_design(window, k: int, p: int) -> tuple[np.ndarray, np.ndarray, DesignSpec]:
    """Demeaned left- and right-hand sides of equation ``k``.

    Parameters
    ----------
    window : array_like, shape (n, K)
        Consecutive return rows.
    k : int
        Target series.
    p : int
        Number of lags.

    Returns
    -------
    lhs : ndarray, shape (n - p,)
    rhs : ndarray, shape (n - p, K(p+1) - 1)
    spec : DesignSpec
    """
    window = np.asarray(window, dtype=float)
    n, n_series = window.shape
    cmap = column_map(n_series, k, p)
    _check_rows(n, n_series, p)
    z = stacked_lags(window, p)
    lhs = z[:, k]
    rhs = np.column_stack([z[:, lag * n_series + j] for j, lag in cmap])
    flat = np.ptp(rhs, axis=0) == 0
    if flat.any():
        j, lag = cmap[int(np.argmax(flat))]
        raise DecompositionError(f"design column (series {j}, lag {lag}) is constant")
    if np.ptp(lhs) == 0:
        raise DecompositionError(f"target series {k} is constant")
    return lhs - lhs.mean(), rhs - rhs.mean(axis=0), DesignSpec(k, p, cmap)


def _spectrum(R) -> tuple[np.ndarray, np.ndarray, bool]:
    """Eigenpairs of a correlation-like matrix with small negatives clamped."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DecompositionError(f"expected a square matrix, got shape {R.shape}")
    asym = np.max(np.abs(R - R.T)) if R.size else 0.0
    if asym > SYMMETRY_TOL:
        raise DecompositionError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    lam, V = np.linalg.eigh((R + R.T) / 2)
    if lam.size and lam[0] < -NEGATIVE_EIG_TOL:
        raise DecompositionError(
            f"smallest eigenvalue {lam[0]:.3g} is negative; not a correlation matrix"
        )
    clamped = bool(lam.size and lam[0] < EIG_FLOOR)
    return np.maximum(lam, EIG_FLOOR), V, clamped


def symmetric_sqrt(R) -> np.ndarray:
    """The symmetric positive semidefinite square root ``V diag(sqrt(lam)) V'``.

    Eigenvalues below ``EIG_FLOOR`` are raised to it, so ``C @ C`` reproduces
    ``R`` up to that floor.  Eigenvalues below ``-1e-8`` raise
    :class:`DecompositionError`.
    """
    lam, V = _spectrum(R)[:2]
    C = (V * np.sqrt(lam)) @ V.T
    return (C + C.T) / 2


def decompose_r2(R_xx, R_yx, k: int | None = None) -> DecompositionVector:
    """Allocate the regression R2 over the right-hand side variables.

    ``R_xx`` is the correlation matrix of the regressors and ``R_yx`` the
    vector of correlations between the target and each regressor.
    ``C^{-1} R_yx`` is evaluated as ``V diag(lam^{-1/2}) V' R_yx``.
    """
    R_yx = np.asarray(R_yx, dtype=float).ravel()
    lam, V, clamped = _spectrum(R_xx)
    if R_yx.size != lam.size:
        raise DecompositionError(
            f"R_yx has {R_yx.size} entries but R_xx is {lam.size}x{lam.size}"
        )
    if np.any(np.abs(R_yx) > 1.0 + 1e-12):
        raise DecompositionError("target correlations must lie in [-1, 1]")
    root = np.sqrt(lam)
    C = (V * root) @ V.T
    w = V @ ((V.T @ R_yx) / root)
    contributions = (C * C) @ (w * w)
    r2 = float(contributions.sum())
    if r2 > 1.0 + R2_EXCESS_TOL:
        raise DecompositionError(f"R2 of {r2:.8f} exceeds 1; inconsistent correlation inputs")
    return DecompositionVector(k, contributions, r2, clamped)


def full_decomposition(window, p: int, kind: str = "pearson") -> DecompositionMatrix:
    """Decompose all K equations of one window and stack the results.

    One correlation matrix of ``[y_t, ..., y_{t-p}]`` is computed per window;
    each equation reads its ``R_xx`` and ``R_yx`` out of it.  Correlations are
    invariant to demeaning, so this matches :func:`build_design` followed by a
    per-equation correlation.
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 2:
        raise DecompositionError("window must be 2-D (n, K)")
    n, n_series = window.shape
    _check_rows(n, n_series, p)
    z = stacked_lags(window, p)
    labels = [f"design column (series {c % n_series}, lag {c // n_series})" for c in range(z.shape[1])]
    try:
        corr = correlation_values(z, kind, labels=labels)
    except ValueError as exc:
        raise DecompositionError(str(exc)) from None

    blocks = np.zeros((p + 1, n_series, n_series))
    r2 = np.zeros(n_series)
    notes = []
    for k in range(n_series):
        cmap = column_map(n_series, k, p)
        idx = np.array([lag * n_series + j for j, lag in cmap], dtype=int)
        try:
            vec = decompose_r2(corr[np.ix_(idx, idx)], corr[idx, k], k=k)
        except DecompositionError as exc:
            raise DecompositionError(f"equation {k}: {exc}") from None
        if vec.clamped:
            notes.append(f"equation {k}: near-singular regressor correlation, eigenvalues clamped")
        lags = idx // n_series
        series = idx % n_series
        blocks[lags, k, series] = vec.contributions
        r2[k] = vec.r_squared
    return DecompositionMatrix(n_series, p, blocks, r2, tuple(notes))


def split(D: DecompositionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Contemporaneous block and the sum of all lag blocks."""
    R_C = D.blocks[0].copy()
    R_L = D.blocks[1:].sum(axis=0) if D.p > 0 else np.zeros_like(R_C)
    return R_C, R_L
