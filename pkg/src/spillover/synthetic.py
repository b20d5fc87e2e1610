"""Simulated return panels with known spillover structure.

Used by the test-suite and to build the bundled 19-series demo panel
(``data/synthetic_panel.csv``).  Run ``python -m spillover.synthetic PATH`` to
regenerate that file.
"""

from __future__ import annotations

import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .panel import PricePanel, ReturnPanel

BUNDLED_PANEL = Path(__file__).parent / "data" / "synthetic_panel.csv"
BUNDLED_SEED = 20201215


def simulate_var(coef, sigma, T: int, rng: np.random.Generator, *, burn: int = 200, df: float | None = None):
    """Draw ``T`` observations of ``y_t = sum_l coef[l] y_{t-l} + u_t``.

    Innovations are Gaussian with covariance ``sigma``, or Student-t with
    ``df`` degrees of freedom rescaled to the same covariance.
    """
    sigma = np.asarray(sigma, dtype=float)
    K = sigma.shape[0]
    p = len(coef)
    chol = np.linalg.cholesky(sigma)
    total = T + burn
    z = rng.standard_normal((total, K))
    if df is not None:
        z *= np.sqrt((df - 2) / rng.chisquare(df, size=(total, 1)))
    u = z @ chol.T
    y = np.zeros((total + p, K))
    for t in range(total):
        acc = u[t].copy()
        for lag in range(1, p + 1):
            acc += coef[lag - 1] @ y[p + t - lag]
        y[p + t] = acc
    return y[p + burn :]


def planted_transmitter(K: int = 6, T: int = 1000, strength: float = 0.4, seed: int = 0) -> ReturnPanel:
    """Series 1 drives every other series at lag 1; everything else is independent noise."""
    A = np.zeros((K, K))
    A[1:, 0] = strength
    y = simulate_var([A], np.eye(K), T, np.random.default_rng(seed))
    return ReturnPanel.from_array(y)


def independent_noise(K: int = 6, T: int = 1000, seed: int = 0) -> ReturnPanel:
    rng = np.random.default_rng(seed)
    return ReturnPanel.from_array(rng.standard_normal((T, K)))


def diagonal_var(K: int = 6, T: int = 1000, seed: int = 0, own: float = 0.5) -> ReturnPanel:
    """Stationary VAR(1) with diagonal coefficients and diagonal innovation covariance."""
    rng = np.random.default_rng(seed)
    A = np.diag(rng.uniform(-own, own, K))
    return ReturnPanel.from_array(simulate_var([A], np.diag(rng.uniform(0.5, 2.0, K)), T, rng))


def _business_days(start: date, n: int) -> list[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def synthetic_prices(K: int = 19, T: int = 773, seed: int = BUNDLED_SEED, missing: float = 0.01) -> PricePanel:
    """Daily price panel with a time-varying common factor and lagged transmitters.

    Returns follow ``r_t = load_t * beta * f_t + A r_{t-1} + e_t`` with
    Student-t shocks.  The factor loading swells and fades twice over the
    sample so that connectedness varies through time.  A fraction
    ``missing`` of cells after the first row is blanked to exercise
    forward filling.
    """
    rng = np.random.default_rng(seed)
    n = T - 1
    t = np.arange(n)
    load = 0.35 + 0.5 * (1 + np.sin(2 * np.pi * t / 360.0)) / 2 + 0.6 * np.exp(-0.5 * ((t - 450) / 40.0) ** 2)
    beta = rng.uniform(0.4, 1.2, K)
    f = rng.standard_t(5, n) * np.sqrt(3 / 5)
    A = np.diag(rng.uniform(-0.1, 0.1, K))
    if K > 4:
        A[4:9, 3] = 0.2
    if K > 13:
        A[10:13, 12] = -0.15
    e = simulate_var([A], np.eye(K), n, rng, df=5.0)
    r = 0.01 * (load[:, None] * beta[None, :] * f[:, None] + e)
    prices = 100.0 * np.exp(np.vstack([np.zeros(K), np.cumsum(r, axis=0)]))
    prices = np.round(prices, 6)
    mask = rng.random((T, K)) >= missing
    mask[0] = True
    names = tuple(f"S{i + 1:02d}" for i in range(K))
    return PricePanel(tuple(_business_days(date(2020, 12, 15), T)), names, prices, mask)


def write_price_csv(panel: PricePanel, path: str | Path) -> Path:
    path = Path(path)
    lines = ["date," + ",".join(panel.names)]
    for d, row, present in zip(panel.dates, panel.values, panel.mask):
        cells = [f"{v:.6f}" if ok else "" for v, ok in zip(row, present)]
        lines.append(d.isoformat() + "," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else BUNDLED_PANEL
    print(write_price_csv(synthetic_prices(), target))
