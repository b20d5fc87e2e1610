import csv
import json

import numpy as np
import pytest

from spillover.cli import RunConfig, build_parser, build_config, main
from spillover.connectedness import DynamicSeries, measures
from spillover.errors import InputError, SpilloverError
from spillover.export import (
    averaged_rows,
    edgelist_to_dot,
    export_averaged,
    export_network,
    fmt,
    stars,
    table_from_dict,
    table_to_dict,
)
from spillover.synthetic import synthetic_prices, write_price_csv
from datetime import date


def table(R_C, R_L=None, names=None):
    R_C = np.asarray(R_C, dtype=float)
    return measures(R_C, np.zeros_like(R_C) if R_L is None else R_L, names=names)


def series_of(tables):
    return DynamicSeries(
        tables[0].names, tuple(date(2022, 1, 1 + i) for i in range(len(tables))), tuple(tables),
        tuple(() for _ in tables), tuple(1 for _ in tables),
    )


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "prices.csv"
    return write_price_csv(synthetic_prices(K=4, T=140, seed=7), path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fmt_and_stars():
    assert fmt(1 / 3) == "0.333333"
    assert fmt(-0.0000001) == "0.000000"
    assert fmt(float("nan")) == ""
    assert [stars(p) for p in (0.2, 0.07, 0.03, 0.001, float("nan"))] == ["", "*", "**", "***", ""]


def test_average_of_one_window_is_identity():
    t = table([[0, 0.2], [0.1, 0]], np.diag([0.3, 0.1]))
    avg, n = export_averaged(series_of([t]))
    assert n == 1
    for name in ("pairwise", "to", "from_", "net", "inc_own", "tci", "npdc", "own_lag", "tci_literal"):
        np.testing.assert_array_equal(getattr(avg, name), getattr(t, name))


def test_average_tci_and_nan_exclusion():
    a = table([[0, 0.2], [0.2, 0]])
    b = table([[0, 0.3], [0.3, 0]])
    bad = type(a).nan(a.names)
    avg, n = export_averaged(series_of([a, bad, b]))
    assert n == 2
    assert avg.tci[0] == pytest.approx(0.25)
    np.testing.assert_allclose(avg.tci[0], avg.tci[1] + avg.tci[2], atol=1e-10)
    with pytest.raises(SpilloverError):
        export_averaged(series_of([bad]))


def test_json_round_trip_exact():
    rng = np.random.default_rng(0)
    R_C = rng.uniform(0, 0.1, (3, 3))
    np.fill_diagonal(R_C, 0)
    t = measures(R_C, rng.uniform(0, 0.1, (3, 3)), percent=True, names=["a", "b", "c"])
    back = table_from_dict(json.loads(json.dumps(table_to_dict(t))))
    for name in ("pairwise", "to", "from_", "net", "inc_own", "tci", "npdc", "own_lag", "tci_literal"):
        np.testing.assert_array_equal(getattr(back, name), getattr(t, name))
    assert back.names == t.names and back.percent


def test_averaged_grid_layout():
    header, rows = averaged_rows(table([[0, 0.2], [0.1, 0]], names=["x", "y"]))
    assert header == ["row", "component", "x", "y", "FROM"]
    assert [r[0] for r in rows] == ["x"] * 3 + ["y"] * 3 + ["TO"] * 3 + ["Inc.Own"] * 3 + ["NET"] * 3 + ["TCI"] * 3
    assert rows[0] == ["x", "overall", "0.000000", "0.200000", "0.200000"]


def test_network_examples():
    assert export_network(table(np.zeros((3, 3)))).edges == ()
    g = export_network(table([[0, 0.3], [0.1, 0]], names=["a", "b"]))
    assert [(s, t) for s, t, _, _ in g.edges] == [("b", "a")]
    assert g.edges[0][2] == pytest.approx(0.2)
    R = np.array([[0, 0.2, 0.7], [0, 0, 0], [0, 0, 0]])
    kept = export_network(table(R), "overall", threshold=0.5).edges
    assert len(kept) == 1 and kept[0][2] == pytest.approx(0.7)
    dot = edgelist_to_dot(g)
    assert '"b" -> "a"' in dot and "role=transmitter" in dot
    with pytest.raises(SpilloverError):
        export_network(table(np.zeros((2, 2))), "sideways")


def test_flags_override_config_file(tmp_path, small_csv):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'input = "{small_csv}"\nwindow = 90\ncorr = "spearman"\nmethod = ["r2", "dy"]\n')
    args = build_parser().parse_args(["run", "--config", str(cfg), "--window", "70", "--no-percent"])
    config = build_config(args)
    assert config.window_length == 70
    assert config.kind == "spearman"
    assert config.methods == ("r2", "dy")
    assert config.percent is False
    assert config.lag == 1 and config.dy_horizon == 10


@pytest.mark.parametrize(
    "kwargs",
    [dict(input_path=None), dict(kind="cosine"), dict(methods=("r3",)), dict(lag=0), dict(formats=("xml",))],
)
def test_config_validation(kwargs, small_csv):
    base = dict(input_path=small_csv)
    base.update(kwargs)
    with pytest.raises(InputError):
        RunConfig(**base).validate()


def test_unknown_config_key(tmp_path, small_csv, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("colour = 'blue'\n")
    assert main(["run", "--config", str(cfg), "--input", str(small_csv)]) == 2
    assert "config" in capsys.readouterr().err


def test_run_writes_documented_outputs(tmp_path, small_csv):
    out = tmp_path / "out"
    code = main(["run", "--input", str(small_csv), "--window", "80", "--method", "r2,dy",
                 "--corr", "kendall", "--formats", "csv,json,dot", "--out", str(out)])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    for expected in ("summary_stats.csv", "summary_stats.json", "correlations_kendall.csv",
                     "averaged_connectedness.json", "averaged_connectedness_dy.csv", "dynamic_tci.csv",
                     "dynamic_to.csv", "dynamic_from.csv", "dynamic_net.csv", "dynamic_npdc.csv",
                     "network_overall.dot", "network_contemp.dot", "network_lagged.dot", "run_manifest.json"):
        assert expected in names
    tci = read_csv(out / "dynamic_tci.csv")
    assert tci[0] == ["date", "r2_overall", "r2_contemp", "r2_lagged", "dy_overall"]
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert len(tci) - 1 == manifest["windows"] == 139 - 80 + 1
    assert manifest["config"]["kind"] == "kendall"
    assert manifest["lag_used"] == 1
    saved = table_from_dict(json.loads((out / "averaged_connectedness.json").read_text()))
    np.testing.assert_allclose(saved.tci[0], saved.tci[1] + saved.tci[2], atol=1e-10)


def test_empty_input_exit_2_without_artifacts(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    out = tmp_path / "out"
    assert main(["run", "--input", str(empty), "--out", str(out)]) == 2
    assert "load" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_window_too_short_is_input_error(tmp_path, small_csv):
    out = tmp_path / "out"
    assert main(["run", "--input", str(small_csv), "--window", "10", "--out", str(out)]) == 2
    assert not out.exists()


def test_internal_failure_exit_1(tmp_path, small_csv, monkeypatch, capsys):
    import spillover.cli as cli

    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "dy_rolling", boom)
    out = tmp_path / "out"
    assert main(["run", "--input", str(small_csv), "--window", "80", "--method", "r2,dy", "--out", str(out)]) == 1
    assert "stage 'dy'" in capsys.readouterr().err
    assert not out.exists()


def test_synth_subcommand(tmp_path):
    path = tmp_path / "demo.csv"
    assert main(["synth", str(path)]) == 0
    rows = read_csv(path)
    assert len(rows) == 774 and len(rows[0]) == 20
