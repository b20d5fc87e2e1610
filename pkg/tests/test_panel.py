from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spillover.errors import InputError
from spillover.panel import (
    PricePanel,
    ReturnPanel,
    forward_fill,
    load_csv,
    log_returns,
    minimum_window,
    windows,
)


def write(tmp_path, text, name="prices.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def panel_of(rows, names=("a", "b")):
    values = np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float)
    dates = tuple(date(2021, 1, 1 + i) for i in range(len(rows)))
    return PricePanel(dates, tuple(names), values, ~np.isnan(values))


def test_empty_cell_is_masked(tmp_path):
    p = load_csv(write(tmp_path, "date,a,b\n2021-01-01,1,2\n2021-01-02,,3\n2021-01-03,4,5\n"))
    assert p.values.shape == (3, 2)
    assert p.mask.tolist() == [[True, True], [False, True], [True, True]]


def test_sentinels_and_custom_date_format(tmp_path):
    text = "date,a,b\n01/01/2021,1,NA\n02/01/2021,2,3\n"
    p = load_csv(write(tmp_path, text), date_format="%d/%m/%Y")
    assert p.dates == (date(2021, 1, 1), date(2021, 1, 2))
    assert not p.mask[0, 1]


def test_unsorted_dates_are_sorted(tmp_path):
    text = "date,a,b\n2021-01-03,3,30\n2021-01-01,1,10\n2021-01-02,2,20\n"
    p = load_csv(write(tmp_path, text))
    assert p.dates == tuple(date(2021, 1, d) for d in (1, 2, 3))
    np.testing.assert_array_equal(p.values[:, 0], [1, 2, 3])


def test_zero_price_names_cell(tmp_path):
    with pytest.raises(InputError, match=r"2021-01-02.*'b'|'b'.*2021-01-02"):
        load_csv(write(tmp_path, "date,a,b\n2021-01-01,1,2\n2021-01-02,1,0.0\n"))


@pytest.mark.parametrize(
    "text",
    [
        "",
        "date,a\n2021-01-01,1\n",
        "date,a,b\n2021-13-01,1,2\n",
        "date,a,b\n2021-01-01,1\n",
        "date,a,b\n2021-01-01,1,2\n2021-01-01,1,2\n",
        "date,a,a\n2021-01-01,1,2\n",
    ],
    ids=["empty", "one-series", "bad-date", "short-row", "duplicate-date", "duplicate-name"],
)
def test_malformed_csv_rejected(tmp_path, text):
    with pytest.raises(InputError):
        load_csv(write(tmp_path, text))


def test_forward_fill_gap():
    filled = forward_fill(panel_of([[100, 1], [None, 1], [102, 1]]))
    np.testing.assert_array_equal(filled.values[:, 0], [100, 100, 102])
    assert filled.complete


def test_forward_fill_complete_panel_unchanged():
    p = panel_of([[1, 2], [3, 4]])
    assert forward_fill(p) is p


def test_forward_fill_truncates_leading_gap():
    filled = forward_fill(panel_of([[None, 5], [100, 6], [None, 7]]))
    assert filled.dates[0] == date(2021, 1, 2)
    np.testing.assert_array_equal(filled.values[:, 0], [100, 100])


def test_forward_fill_all_missing_series():
    with pytest.raises(InputError, match="absent"):
        forward_fill(panel_of([[None, 1], [None, 2]]))


def test_log_returns_analytic():
    r = log_returns(panel_of([[100, 100], [110, 100], [110, 100]]))
    np.testing.assert_allclose(r.values[:, 0], [np.log(1.1), 0.0])
    assert r.values[0, 0] == pytest.approx(0.0953102, abs=1e-7)
    np.testing.assert_array_equal(r.values[:, 1], [0.0, 0.0])
    assert r.dates[0] == date(2021, 1, 2)


def test_log_returns_requires_fill():
    with pytest.raises(InputError, match="forward_fill"):
        log_returns(panel_of([[1, 2], [None, 3]]))


def test_773_prices_give_772_returns_and_573_windows():
    rng = np.random.default_rng(3)
    prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, (773, 3)), axis=0))
    dates = tuple(date.fromordinal(737000 + i) for i in range(773))
    r = log_returns(PricePanel(dates, ("a", "b", "c"), prices, np.ones_like(prices, dtype=bool)))
    assert r.n_obs == 772
    wins = windows(r, 200)
    brute = [s for s in range(r.n_obs) if s + 200 <= r.n_obs]
    assert len(wins) == len(brute) == 573
    assert wins[-1].end_date == r.dates[-1]


def test_window_boundaries():
    r = ReturnPanel.from_array(np.random.default_rng(0).normal(size=(50, 2)))
    assert len(windows(r, 50)) == 1
    with pytest.raises(InputError):
        windows(r, 51)
    with pytest.raises(InputError, match="minimum"):
        windows(r, minimum_window(2, 3) - 1, p_max=3)


def test_minimum_window_formula():
    assert minimum_window(19, 1) == 48
    assert minimum_window(6, 5) == 46


@st.composite
def gappy_panels(draw):
    n = draw(st.integers(2, 12))
    k = draw(st.integers(2, 4))
    values = draw(
        st.lists(st.lists(st.floats(0.5, 500), min_size=k, max_size=k), min_size=n, max_size=n)
    )
    mask = draw(st.lists(st.lists(st.booleans(), min_size=k, max_size=k), min_size=n, max_size=n))
    mask = np.array(mask)
    mask[-1] = True
    v = np.where(mask, np.array(values), np.nan)
    return PricePanel(tuple(date(2020, 1, 1 + i) for i in range(n)), tuple(f"s{j}" for j in range(k)), v, mask)


@settings(max_examples=60, deadline=None)
@given(gappy_panels())
def test_forward_fill_idempotent(panel):
    once = forward_fill(panel)
    twice = forward_fill(once)
    assert once.dates == twice.dates
    np.testing.assert_array_equal(once.values, twice.values)


@settings(max_examples=60, deadline=None)
@given(gappy_panels())
def test_returns_round_trip_to_prices(panel):
    filled = forward_fill(panel)
    if filled.n_obs < 2:
        return
    r = log_returns(filled)
    rebuilt = filled.values[0] * np.exp(np.vstack([np.zeros(r.n_series), np.cumsum(r.values, axis=0)]))
    np.testing.assert_allclose(rebuilt, filled.values, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40))
def test_windows_tile_rows(n, length):
    if length > n:
        return
    r = ReturnPanel.from_array(np.zeros((n, 2)) + np.arange(n)[:, None])
    counts = np.zeros(n, dtype=int)
    for w in windows(r, length):
        counts[w.start_index : w.stop] += 1
    expected = [min(i + 1, length, n - i, n - length + 1) for i in range(n)]
    np.testing.assert_array_equal(counts, expected)
