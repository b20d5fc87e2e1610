"""Serialization of statistics, connectedness tables, dynamic series and networks.

CSV numbers use six decimals and an empty cell for NaN.  JSON keeps full
float precision (``null`` for NaN) so tables survive a round trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .connectedness import COMPONENTS, ConnectednessTable, DynamicSeries
from .errors import SpilloverError
from .stats import CorrelationMatrix, MomentSummary

ROW_LABELS = ("TO", "Inc.Own", "NET", "TCI")


def fmt(x: float) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return f"{round(float(x), 6) + 0.0:.6f}"


def stars(p: float) -> str:
    """Significance marks at the 10%, 5% and 1% levels."""
    if p is None or not math.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _unjson(obj):
    """Inverse of :func:`_jsonable` for numeric nests: ``None`` becomes NaN."""
    if isinstance(obj, list):
        return [_unjson(v) for v in obj]
    return math.nan if obj is None else obj


def write_json(path: Path, payload) -> Path:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


# --- tables ------------------------------------------------------------------


_TABLE_ARRAYS = ("pairwise", "to", "from_", "net", "inc_own", "tci", "own_lag", "npdc", "tci_literal")


def table_to_dict(table: ConnectednessTable) -> dict:
    out = {"names": list(table.names), "components": list(COMPONENTS)}
    out.update({name: getattr(table, name) for name in _TABLE_ARRAYS})
    out["percent"] = table.percent
    out["has_split"] = table.has_split
    return _jsonable(out)


def table_from_dict(d: dict) -> ConnectednessTable:
    arrays = {name: np.array(_unjson(d[name]), dtype=float) for name in _TABLE_ARRAYS}
    return ConnectednessTable(
        names=tuple(d["names"]), percent=bool(d["percent"]), has_split=bool(d["has_split"]), **arrays
    )


def export_averaged(series: DynamicSeries) -> tuple[ConnectednessTable, int]:
    """Window-average of every measure, skipping failed (NaN) windows.

    Returns the averaged table and the number of windows it averages.
    """
    ok = [t for t in series.tables if not t.is_nan]
    if not ok:
        raise SpilloverError("every window failed; nothing to average")
    first = ok[0]
    arrays = {name: np.mean(np.stack([getattr(t, name) for t in ok]), axis=0) for name in _TABLE_ARRAYS}
    table = ConnectednessTable(
        names=first.names, percent=first.percent, has_split=first.has_split, **arrays
    )
    return table, len(ok)


def averaged_rows(table: ConnectednessTable) -> tuple[list[str], list[list[str]]]:
    """Grid of the averaged table: one line per (row, component).

    Series rows carry pairwise shares and FROM in the last column; the TO row
    carries the sum of TO in the last column, Inc.Own leaves it blank, and the
    NET and TCI rows carry the TCI.
    """
    header = ["row", "component", *table.names, "FROM"]
    rows = []
    for i, name in enumerate(table.names):
        for c, comp in enumerate(COMPONENTS):
            rows.append([name, comp, *map(fmt, table.pairwise[i, :, c]), fmt(table.from_[i, c])])
    blank = [""] * table.K
    for c, comp in enumerate(COMPONENTS):
        rows.append(["TO", comp, *map(fmt, table.to[:, c]), fmt(table.to[:, c].sum())])
    for c, comp in enumerate(COMPONENTS):
        rows.append(["Inc.Own", comp, *map(fmt, table.inc_own[:, c]), ""])
    for c, comp in enumerate(COMPONENTS):
        rows.append(["NET", comp, *map(fmt, table.net[:, c]), fmt(table.tci[c])])
    for c, comp in enumerate(COMPONENTS):
        rows.append(["TCI", comp, *blank, fmt(table.tci[c])])
    return header, rows


def write_averaged(table: ConnectednessTable, out: Path, stem: str, formats: Sequence[str], extra: dict | None = None) -> list[Path]:
    paths = []
    if "csv" in formats:
        header, rows = averaged_rows(table)
        paths.append(write_csv(out / f"{stem}.csv", header, rows))
    if "json" in formats:
        payload = table_to_dict(table)
        if extra:
            payload.update(_jsonable(extra))
        paths.append(write_json(out / f"{stem}.json", payload))
    return paths


# --- dynamic series ----------------------------------------------------------


def dynamic_tci_rows(series: dict[str, DynamicSeries]) -> tuple[list[str], list[list[str]]]:
    """One row per window end date with TCI triples for R2 and overall TCI for DY."""
    header = ["date"]
    columns = []
    for method, s in series.items():
        comps = COMPONENTS if s.tables and s.tables[0].has_split else COMPONENTS[:1]
        for c, comp in enumerate(comps):
            header.append(f"{method}_{comp}")
            columns.append(s.tci[:, c])
    dates = next(iter(series.values())).end_dates
    rows = [[d.isoformat(), *(fmt(col[t]) for col in columns)] for t, d in enumerate(dates)]
    return header, rows


def dynamic_measure_rows(series: DynamicSeries, attr: str) -> tuple[list[str], list[list[str]]]:
    """Per-series TO/FROM/NET paths: ``<name>_<component>`` columns."""
    data = series.stack(attr)
    comps = COMPONENTS if series.tables[0].has_split else COMPONENTS[:1]
    header = ["date"] + [f"{n}_{comp}" for n in series.names for comp in comps]
    rows = []
    for t, d in enumerate(series.end_dates):
        rows.append([d.isoformat(), *(fmt(data[t, i, c]) for i in range(len(series.names)) for c in range(len(comps)))])
    return header, rows


def dynamic_npdc_rows(series: DynamicSeries) -> tuple[list[str], list[list[str]]]:
    """Pairwise NPDC paths for every ``i < j``; column ``A|B_<component>`` is NPDC[A, B]."""
    data = series.stack("npdc")
    names = series.names
    comps = COMPONENTS if series.tables[0].has_split else COMPONENTS[:1]
    pairs = [(i, j) for i in range(len(names)) for j in range(i + 1, len(names))]
    header = ["date"] + [f"{names[i]}|{names[j]}_{comp}" for i, j in pairs for comp in comps]
    rows = []
    for t, d in enumerate(series.end_dates):
        rows.append([d.isoformat(), *(fmt(data[t, i, j, c]) for i, j in pairs for c in range(len(comps)))])
    return header, rows


# --- statistics ----------------------------------------------------------------


def summary_rows(names: Sequence[str], summaries: Sequence[MomentSummary]):
    header = ["series", "mean", "variance", "skewness", "excess_kurtosis", "jb", "jb_pvalue", "jb_stars", "n"]
    rows = [
        [n, fmt(s.mean), fmt(s.variance), fmt(s.skewness), fmt(s.excess_kurtosis),
         fmt(s.jb_statistic), fmt(s.jb_pvalue), stars(s.jb_pvalue), str(s.n)]
        for n, s in zip(names, summaries)
    ]
    return header, rows


def summary_payload(names: Sequence[str], summaries: Sequence[MomentSummary]) -> dict:
    return {
        "series": [
            {
                "name": n, "mean": s.mean, "variance": s.variance, "skewness": s.skewness,
                "excess_kurtosis": s.excess_kurtosis, "jb": s.jb_statistic,
                "jb_pvalue": s.jb_pvalue, "jb_stars": stars(s.jb_pvalue), "n": s.n,
            }
            for n, s in zip(names, summaries)
        ]
    }


def correlation_rows(cm: CorrelationMatrix):
    """Long format: one line per unordered pair ``i < j``."""
    header = ["series_a", "series_b", "coefficient", "pvalue", "stars"]
    rows = []
    K = len(cm.names)
    for i in range(K):
        for j in range(i + 1, K):
            p = cm.pvalues[i, j]
            rows.append([cm.names[i], cm.names[j], fmt(cm.values[i, j]), fmt(p), stars(p)])
    return header, rows


def correlation_payload(cm: CorrelationMatrix) -> dict:
    return {
        "kind": cm.kind,
        "names": list(cm.names),
        "values": cm.values,
        "pvalues": cm.pvalues,
        "stars": [[stars(p) if i != j else "" for j, p in enumerate(row)] for i, row in enumerate(cm.pvalues)],
    }


# --- networks ----------------------------------------------------------------


@dataclass(frozen=True)
class EdgeList:
    """Directed net-spillover graph.

    An edge ``(source, target, weight, component)`` means ``source`` explains
    more of ``target`` than the reverse, by ``weight``.
    """

    nodes: tuple[str, ...]
    net: tuple[float, ...]
    edges: tuple[tuple[str, str, float, str], ...]
    component: str


def export_network(table: ConnectednessTable, component: str = "overall", threshold: float = 0.0) -> EdgeList:
    """Edges ``j -> i`` for every positive ``NPDC[i, j]`` at or above ``threshold``."""
    if component not in COMPONENTS:
        raise SpilloverError(f"unknown component {component!r}; expected one of {COMPONENTS}")
    c = COMPONENTS.index(component)
    values = table.npdc[:, :, c]
    edges = []
    for i in range(table.K):
        for j in range(table.K):
            w = float(values[i, j])
            if i != j and w > 0 and w >= threshold:
                edges.append((table.names[j], table.names[i], w, component))
    return EdgeList(table.names, tuple(float(x) for x in table.net[:, c]), tuple(edges), component)


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def edgelist_to_dot(graph: EdgeList) -> str:
    lines = [f"digraph net_{graph.component} {{"]
    for name, net in zip(graph.nodes, graph.net):
        role = "transmitter" if net > 0 else "receiver"
        lines.append(f"  {_dot_id(name)} [net={fmt(net)}, role={role}];")
    for src, dst, w, _ in graph.edges:
        lines.append(f"  {_dot_id(src)} -> {_dot_id(dst)} [weight={fmt(w)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def edgelist_payload(graph: EdgeList) -> dict:
    return {
        "component": graph.component,
        "nodes": [{"name": n, "net": v} for n, v in zip(graph.nodes, graph.net)],
        "edges": [{"source": s, "target": t, "weight": w} for s, t, w, _ in graph.edges],
    }
