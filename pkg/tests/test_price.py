import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridsched.desk import synthetic_prices
from gridsched.price import (PERIOD, PriceBook, PriceDataError, PriceSeries, TwoPriceBook, fit_sarima,
                             forecast, format_price_file, nearest_rank, parse_price_file)
from gridsched.workload import ConfigError


def sinusoid(n, start=0):
    h = np.arange(start, start + n)
    return 40 + 10 * np.sin(2 * np.pi * h / PERIOD)


def test_constant_series():
    m = fit_sarima([50.0] * 72)
    assert forecast(m, 24) == [50.0] * 24


def test_horizon_zero():
    assert forecast(fit_sarima(sinusoid(72)), 0) == []


def test_too_short():
    with pytest.raises(ValueError):
        fit_sarima([1.0] * 71)


def test_sinusoid_next_day():
    fc = forecast(fit_sarima(sinusoid(72)), 24)
    assert np.mean(np.abs(np.array(fc) - sinusoid(24, 72))) < 0.5


def test_sinusoid_two_days_correlation():
    fc = forecast(fit_sarima(sinusoid(72)), 48)
    assert np.corrcoef(fc, sinusoid(48, 72))[0, 1] > 0.95


def test_white_noise_mean():
    means = []
    for seed in range(50):
        y = np.random.default_rng(seed).normal(30, 2, size=72)
        means.append(np.mean(forecast(fit_sarima(y), 24)))
    se = np.std(means, ddof=1) / np.sqrt(len(means))
    assert abs(np.mean(means) - 30) <= 2 * se


def test_forecast_deterministic():
    y = synthetic_prices("Z", 0.1, 4).prices[:72]
    assert forecast(fit_sarima(y), 30) == forecast(fit_sarima(list(y)), 30)


def test_drifting_daily_series_mape():
    # desk-style prices: afternoon peak, AR(1) noise, day-to-day drift
    errs = []
    for seed in range(10):
        p = np.array(synthetic_prices("Z", 0.1, seed, days=2, history_days=3).prices)
        fc = np.array(forecast(fit_sarima(p[:72]), 24))
        errs.append(np.mean(np.abs(fc - p[72:96]) / p[72:96]))
    assert np.mean(errs) <= 0.15


# -- price book -------------------------------------------------------------

def book_for(series):
    return PriceBook({"Z": series}, fixed={"UK": 0.08})


def test_fixed_zone_constant():
    b = book_for(PriceSeries("Z", 0, tuple(sinusoid(200))))
    b.reveal(0)
    assert {b.price_at("UK", h) for h in range(0, 500, 7)} == {0.08}


def test_known_hours_verbatim():
    ser = PriceSeries("Z", -72, tuple(sinusoid(300, -72)))
    b = book_for(ser)
    b.reveal(5 * 3600)  # known until hour 24
    assert all(b.price_at("Z", h) == ser.actual(h) for h in range(-72, 24))


def test_forecast_beyond_known():
    rng = np.random.default_rng(3)
    vals = sinusoid(300, -72) + rng.normal(0, 1, 300)
    ser = PriceSeries("Z", -72, tuple(np.maximum(vals, 0)))
    b = book_for(ser)
    b.reveal(30 * 3600)  # day 1 -> known until hour 48
    assert b.known_until == 48
    train = [ser.actual(h) for h in range(48 - 72, 48)]
    expect = forecast(fit_sarima(train), 4)[3]
    assert b.price_at("Z", 48 + 3) == expect
    assert b.price_at("Z", 48 + 3) != ser.actual(51)


def test_reveal_at_midnight_boundary():
    b = book_for(PriceSeries("Z", -72, tuple(sinusoid(300, -72))))
    b.reveal(24 * 3600 - 1)
    assert b.known_until == 24
    b.reveal(24 * 3600)
    assert b.known_until == 48


def test_unknown_zone_and_early_hour():
    b = book_for(PriceSeries("Z", 0, tuple(sinusoid(100))))
    with pytest.raises(PriceDataError):
        b.price_at("nope", 3)
    with pytest.raises(PriceDataError):
        b.price_at("Z", -1)


def test_short_history_fallbacks():
    b = book_for(PriceSeries("Z", 0, tuple(float(h) for h in range(30))))
    b.reveal(0)  # 24 known hours -> seasonal naive
    assert b.price_at("Z", 24) == 0.0 and b.price_at("Z", 30) == 6.0


def test_negative_price_rejected():
    with pytest.raises(ConfigError):
        PriceSeries("Z", 0, (1.0, -0.5))


@settings(max_examples=30)
@given(st.lists(st.floats(0, 200, allow_nan=False), min_size=96, max_size=120), st.integers(0, 47))
def test_price_never_negative(vals, offset):
    b = book_for(PriceSeries("Z", -72, tuple(vals)))
    b.reveal(0)
    assert all(b.price_at("Z", h) >= 0 for h in range(0, 24 + offset))


def test_nearest_rank():
    xs = list(range(1, 11))
    assert nearest_rank(xs, 10) == 1 and nearest_rank(xs, 90) == 9 and nearest_rank(xs, 100) == 10


def test_two_price_levels():
    ser = PriceSeries("Z", 0, tuple(float(v) for v in range(1, 49)))
    tp = TwoPriceBook(book_for(ser), 0, 48)
    assert tp.price_at("Z", 11) == nearest_rank(range(1, 49), 10)
    assert tp.price_at("Z", 12) == nearest_rank(range(1, 49), 90)
    assert tp.price_at("Z", 23 + 24) == tp.price_at("Z", 12)
    assert tp.actual("Z", 5) == 6.0
    assert tp.price_at("UK", 13) == 0.08


def test_price_file_round_trip():
    epoch = dt.date(2014, 8, 1)
    series = {"A": PriceSeries("A", -24, tuple(float(i) / 7 for i in range(72))),
              "B": PriceSeries("B", 0, (0.05,) * 24)}
    assert parse_price_file(format_price_file(series, epoch), epoch) == series


def test_price_file_gap():
    text = "zone,date,hour,price\nA,2014-08-01,0,1.0\nA,2014-08-01,2,1.0\n"
    with pytest.raises(ConfigError):
        parse_price_file(text, dt.date(2014, 8, 1))
    with pytest.raises(ConfigError):
        parse_price_file("A,2014-08-01,24,1.0\n", dt.date(2014, 8, 1))
