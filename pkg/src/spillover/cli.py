"""Command line front end: ``spillover run`` and ``spillover synth``.

Exit codes: 0 success, 1 internal error, 2 input or configuration error.
Outputs are staged in a temporary directory and only moved into ``--out``
once every stage has succeeded.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .connectedness import COMPONENTS, THREADS_ENV, bic_lag, rolling
from .dybench import DEFAULT_HORIZON, dy_rolling
from .errors import InputError
from .export import (
    correlation_payload,
    correlation_rows,
    dynamic_measure_rows,
    dynamic_npdc_rows,
    dynamic_tci_rows,
    edgelist_payload,
    edgelist_to_dot,
    export_averaged,
    export_network,
    summary_payload,
    summary_rows,
    write_averaged,
    write_csv,
    write_json,
)
from .panel import DEFAULT_DATE_FORMAT, DEFAULT_SENTINELS, forward_fill, load_csv, log_returns, minimum_window
from .stats import KINDS, correlation_matrix, moments

log = logging.getLogger("spillover")

METHODS = ("r2", "dy")
FORMATS = ("csv", "json", "dot")


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass(frozen=True)
class RunConfig:
    input_path: Path | None = None
    date_format: str = DEFAULT_DATE_FORMAT
    sentinels: tuple[str, ...] = DEFAULT_SENTINELS
    window_length: int = 200
    lag: int | str = 1
    p_max: int = 5
    per_window_lag: bool = False
    kind: str = "pearson"
    methods: tuple[str, ...] = ("r2",)
    dy_horizon: int = DEFAULT_HORIZON
    percent: bool = True
    output_dir: Path = Path("spillover_out")
    formats: tuple[str, ...] = ("csv", "json")
    network_threshold: float = 0.0
    threads: int | None = field(default=None, compare=False)

    def validate(self) -> "RunConfig":
        if self.input_path is None:
            raise InputError("no input file given (--input)")
        if self.kind not in KINDS:
            raise InputError(f"unknown correlation kind {self.kind!r}; choose from {KINDS}")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise InputError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        bad = set(self.formats) - set(FORMATS)
        if bad or not self.formats:
            raise InputError(f"formats must be a nonempty subset of {FORMATS}, got {self.formats}")
        if self.lag != "auto" and (not isinstance(self.lag, int) or self.lag < 1):
            raise InputError(f"lag must be an integer >= 1 or 'auto', got {self.lag!r}")
        if self.p_max < 1:
            raise InputError(f"max lag must be >= 1, got {self.p_max}")
        if self.dy_horizon < 1:
            raise InputError(f"DY horizon must be >= 1, got {self.dy_horizon}")
        if self.window_length < 1:
            raise InputError(f"window length must be positive, got {self.window_length}")
        return self

    def manifest(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        d["input_path"] = str(self.input_path)
        d["output_dir"] = str(self.output_dir)
        return d


# --- configuration -------------------------------------------------------------


def _split_list(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(str(v).strip() for v in value)
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


def _parse_lag(value) -> int | str:
    if isinstance(value, str) and value.strip().lower() == "auto":
        return "auto"
    try:
        return int(value)
    except (TypeError, ValueError):
        raise InputError(f"lag must be an integer or 'auto', got {value!r}") from None


# config-file / flag key -> (RunConfig field, converter)
_KEYS = {
    "input": ("input_path", Path),
    "date_format": ("date_format", str),
    "sentinels": ("sentinels", lambda v: tuple(v) if isinstance(v, (list, tuple)) else _split_list(v)),
    "window": ("window_length", int),
    "lag": ("lag", _parse_lag),
    "max_lag": ("p_max", int),
    "per_window_lag": ("per_window_lag", bool),
    "corr": ("kind", str),
    "method": ("methods", _split_list),
    "dy_horizon": ("dy_horizon", int),
    "percent": ("percent", bool),
    "out": ("output_dir", Path),
    "formats": ("formats", _split_list),
    "network_threshold": ("network_threshold", float),
    "threads": ("threads", int),
}


def read_config_file(path: str | Path) -> dict:
    """Parse a TOML ``key = value`` file into RunConfig keyword arguments."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"config file {path}: {exc}") from None
    return _convert(raw, source=str(path))


def _convert(raw: dict, source: str) -> dict:
    out = {}
    for key, value in raw.items():
        norm = key.replace("-", "_")
        if norm not in _KEYS:
            raise InputError(f"{source}: unknown setting {key!r}")
        name, conv = _KEYS[norm]
        try:
            out[name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{source}: bad value for {key!r}: {exc}") from None
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    settings = read_config_file(args.config) if args.config else {}
    flags = {
        key: getattr(args, key)
        for key in _KEYS
        if getattr(args, key, None) is not None
    }
    settings.update(_convert(flags, source="command line"))
    return RunConfig(**settings).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spillover", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compute statistics and connectedness for a price CSV")
    run.add_argument("--config", help="TOML key = value file; flags override it")
    run.add_argument("--input", help="price CSV: date,<name1>,...,<nameK>")
    run.add_argument("--window", type=int, help="rolling window length (default 200)")
    run.add_argument("--lag", help="lag order >= 1, or 'auto' for BIC (default 1)")
    run.add_argument("--max-lag", dest="max_lag", type=int, help="largest lag tried by BIC (default 5)")
    run.add_argument("--per-window-lag", dest="per_window_lag", action="store_const", const=True,
                     help="with --lag auto, select the lag separately in every window")
    run.add_argument("--corr", choices=KINDS, help="correlation behind the decomposition (default pearson)")
    run.add_argument("--method", help="comma list from r2,dy (default r2)")
    run.add_argument("--dy-horizon", dest="dy_horizon", type=int, help="GFEVD horizon (default 10)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--formats", help="comma list from csv,json,dot (default csv,json)")
    run.add_argument("--date-format", dest="date_format", help="strptime format of the date column")
    run.add_argument("--sentinels", help="comma list of tokens marking missing prices")
    run.add_argument("--no-percent", dest="percent", action="store_const", const=False,
                     help="report shares in [0, 1] instead of percent")
    run.add_argument("--network-threshold", dest="network_threshold", type=float,
                     help="drop network edges below this weight (default 0)")
    run.add_argument("--threads", type=int, help=f"worker threads, capped by ${THREADS_ENV}")
    run.add_argument("-v", "--verbose", action="store_true")

    synth = sub.add_parser("synth", help="write the synthetic 19-series demo panel")
    synth.add_argument("path", help="destination CSV")
    synth.add_argument("--seed", type=int, default=None)
    return parser


# --- orchestration -------------------------------------------------------------


def _workers(config: RunConfig) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = config.threads or 1
    if cap:
        try:
            n = min(n, int(cap)) if config.threads else int(cap)
        except ValueError:
            pass
    return max(1, n)


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run(config: RunConfig) -> list[Path]:
    """Execute a full run and return the written files (inside ``output_dir``)."""
    staging = Path(tempfile.mkdtemp(prefix="spillover-"))
    try:
        written = _run_into(config, staging)
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        final = []
        for path in written:
            target = out / path.name
            shutil.move(str(path), target)
            final.append(target)
        return final
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _run_into(config: RunConfig, out: Path) -> list[Path]:
    fmts = config.formats
    written: list[Path] = []
    workers = _workers(config)

    with _Stage("load"):
        prices = load_csv(config.input_path, config.date_format, config.sentinels)
        filled = forward_fill(prices)
        returns = log_returns(filled)
        p_floor = config.p_max if config.lag == "auto" else config.lag
        need = minimum_window(returns.n_series, p_floor)
        if config.window_length < need:
            raise InputError(f"window length {config.window_length} is below the minimum {need}")
        if config.window_length > returns.n_obs:
            raise InputError(
                f"window length {config.window_length} exceeds the {returns.n_obs} return rows"
            )

    with _Stage("stats"):
        summaries = [moments(returns.values[:, i]) for i in range(returns.n_series)]
        if "csv" in fmts:
            written.append(write_csv(out / "summary_stats.csv", *summary_rows(returns.names, summaries)))
        if "json" in fmts:
            written.append(write_json(out / "summary_stats.json", summary_payload(returns.names, summaries)))
        for kind in dict.fromkeys([config.kind, "kendall"]):
            cm = correlation_matrix(returns, kind)
            if "csv" in fmts:
                written.append(write_csv(out / f"correlations_{kind}.csv", *correlation_rows(cm)))
            if "json" in fmts:
                written.append(write_json(out / f"correlations_{kind}.json", correlation_payload(cm)))

    with _Stage("lag"):
        if config.lag == "auto" and not config.per_window_lag:
            lag = bic_lag(returns.values, config.p_max)
        else:
            lag = config.lag
        log.info("lag order: %s", lag)

    dynamic = {}
    if "r2" in config.methods:
        with _Stage("r2"):
            dynamic["r2"] = rolling(
                returns, config.window_length, lag, config.kind,
                p_max=config.p_max, per_window_lag=config.per_window_lag,
                percent=config.percent, workers=workers,
            )
    if "dy" in config.methods:
        with _Stage("dy"):
            dy_lag = lag if lag != "auto" else bic_lag(returns.values, config.p_max)
            dynamic["dy"] = dy_rolling(
                returns, config.window_length, dy_lag, config.dy_horizon,
                percent=config.percent, workers=workers,
            )

    averaged_counts = {}
    with _Stage("export"):
        for method, series in dynamic.items():
            table, count = export_averaged(series)
            averaged_counts[method] = count
            stem = "averaged_connectedness" if method == "r2" else f"averaged_connectedness_{method}"
            written += write_averaged(table, out, stem, fmts, extra={"method": method, "windows_averaged": count})
            suffix = "" if method == "r2" else f"_{method}"
            if "csv" in fmts:
                for attr, label in (("to", "to"), ("from_", "from"), ("net", "net")):
                    written.append(write_csv(out / f"dynamic_{label}{suffix}.csv", *dynamic_measure_rows(series, attr)))
                written.append(write_csv(out / f"dynamic_npdc{suffix}.csv", *dynamic_npdc_rows(series)))
            if method == "r2":
                for comp in COMPONENTS:
                    graph = export_network(table, comp, config.network_threshold)
                    if "dot" in fmts:
                        path = out / f"network_{comp}.dot"
                        path.write_text(edgelist_to_dot(graph), encoding="utf-8")
                        written.append(path)
                    if "json" in fmts:
                        written.append(write_json(out / f"network_{comp}.json", edgelist_payload(graph)))
        written.append(write_csv(out / "dynamic_tci.csv", *dynamic_tci_rows(dynamic)))

        window_notes = []
        for method, series in dynamic.items():
            for d, notes in zip(series.end_dates, series.warnings):
                if notes:
                    window_notes.append({"method": method, "end_date": d.isoformat(), "messages": list(notes)})
        first = next(iter(dynamic.values()))
        manifest = {
            "version": __version__,
            "config": config.manifest(),
            "price_rows": prices.n_obs,
            "price_rows_after_fill": filled.n_obs,
            "missing_cells_filled": int((~prices.mask).sum()),
            "return_rows": returns.n_obs,
            "series": list(returns.names),
            "windows": len(first),
            "lag_used": lag if lag != "auto" else "auto (per window)",
            "windows_per_method": {m: len(s) for m, s in dynamic.items()},
            "failed_windows": {m: int(s.failed.sum()) for m, s in dynamic.items()},
            "windows_averaged": averaged_counts,
            "window_warnings": window_notes,
            "outputs": sorted(p.name for p in written) + ["run_manifest.json"],
        }
        written.append(write_json(out / "run_manifest.json", manifest))
    return written


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "synth":
        from .synthetic import BUNDLED_SEED, synthetic_prices, write_price_csv

        seed = BUNDLED_SEED if args.seed is None else args.seed
        print(write_price_csv(synthetic_prices(seed=seed), args.path))
        return 0

    try:
        with _Stage("config"):
            config = build_config(args)
        paths = run(config)
    except StageError as exc:
        code = 2 if isinstance(exc.cause, (InputError, OSError)) else 1
        print(f"spillover: {exc}", file=sys.stderr)
        return code
    for path in paths:
        log.info("wrote %s", path)
    print(f"spillover: wrote {len(paths)} files to {config.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
