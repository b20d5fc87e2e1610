"""Contemporaneous and lagged spillover measurement for multivariate return panels."""

__version__ = "0.1.0"

from .connectedness import ConnectednessTable, DynamicSeries, measures, npdc, rolling
from .panel import ReturnPanel, forward_fill, load_csv, log_returns, windows
from .r2core import decompose_r2, full_decomposition, split

__all__ = [
    "ConnectednessTable",
    "DynamicSeries",
    "ReturnPanel",
    "decompose_r2",
    "forward_fill",
    "full_decomposition",
    "load_csv",
    "log_returns",
    "measures",
    "npdc",
    "rolling",
    "split",
    "windows",
]
