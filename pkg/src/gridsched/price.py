"""Day-ahead electricity prices: bookkeeping and SARIMA(1,d,1)(1,D,1)_24 forecasting."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .workload import ConfigError

PERIOD = 24
TRAIN_HOURS = 72
_COEF_BOUND = 0.99


class PriceDataError(LookupError):
    pass


@dataclass(frozen=True)
class PriceSeries:
    zone: str
    start_hour: int
    prices: tuple[float, ...]

    def __post_init__(self):
        if any(p < 0 or not math.isfinite(p) for p in self.prices):
            raise ConfigError(f"zone {self.zone}: prices must be finite and non-negative")

    @property
    def end_hour(self) -> int:
        return self.start_hour + len(self.prices)

    def actual(self, hour: int) -> float:
        i = hour - self.start_hour
        if not 0 <= i < len(self.prices):
            raise PriceDataError(f"zone {self.zone}: no price recorded for hour {hour}")
        return self.prices[i]


# ---------------------------------------------------------------------------
# SARIMA

@dataclass(frozen=True)
class SarimaModel:
    phi: float
    theta: float
    seas_phi: float
    seas_theta: float
    d: int
    D: int
    mean: float  # of the differenced series; only non-zero when d = D = 0
    sigma2: float
    y: tuple[float, ...]  # training window
    w: tuple[float, ...]  # differenced training window
    resid: tuple[float, ...]
    constant: bool = False
    period: int = PERIOD


def _diff_poly(d: int, D: int, s: int) -> np.ndarray:
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    seas = np.zeros(s + 1)
    seas[0], seas[s] = 1.0, -1.0
    for _ in range(D):
        poly = np.convolve(poly, seas)
    return poly


def _difference(y: np.ndarray, d: int, D: int, s: int) -> np.ndarray:
    poly = _diff_poly(d, D, s)
    k = len(poly) - 1
    return np.array([poly @ y[t - np.arange(k + 1)] for t in range(k, len(y))])


def _lag_polys(phi, theta, sphi, stheta, s):
    ar = np.zeros(s + 2)
    ma = np.zeros(s + 2)
    ar[0] = ma[0] = 1.0
    ar[1], ar[s], ar[s + 1] = -phi, -sphi, phi * sphi
    ma[1], ma[s], ma[s + 1] = theta, stheta, theta * stheta
    return ar, ma


def _css_residuals(params, w, s):
    ar, ma = _lag_polys(*params, s)
    start = s + 1
    u = np.zeros(len(w))
    for t in range(start, len(w)):
        u[t] = ar @ w[t - np.arange(s + 2)]
    e = np.zeros(len(w))
    e[start:] = lfilter([1.0], ma, u[start:])
    return e


def fit_sarima(history: Sequence[float], d: int = 0, D: int = 1, period: int = PERIOD) -> SarimaModel:
    """Fit SARIMA(1,d,1)(1,D,1)_period by conditional least squares.

    Coefficients are box-bounded to (-0.99, 0.99), which keeps the AR parts
    stationary and the MA parts invertible. Optimization starts at zero and
    is deterministic.
    """
    y = np.asarray(history, dtype=float)
    if len(y) < 3 * period:
        raise ValueError(f"need at least {3 * period} hourly prices, got {len(y)}")
    w = _difference(y, d, D, period)
    if len(w) < period:
        raise ValueError("differencing leaves fewer than one seasonal period")
    if np.ptp(y) == 0:
        return SarimaModel(0.0, 0.0, 0.0, 0.0, d, D, 0.0, 0.0, tuple(y), tuple(w),
                           tuple(np.zeros(len(w))), constant=True, period=period)
    mean = float(w.mean()) if d == 0 and D == 0 else 0.0
    wc = w - mean
    start = period + 1

    def sse(x):
        e = _css_residuals(x, wc, period)
        return float(e[start:] @ e[start:])

    res = minimize(sse, np.zeros(4), method="L-BFGS-B",
                   bounds=[(-_COEF_BOUND, _COEF_BOUND)] * 4)
    x = res.x if res.fun <= sse(np.zeros(4)) else np.zeros(4)
    e = _css_residuals(x, wc, period)
    n_eff = max(1, len(w) - start)
    return SarimaModel(float(x[0]), float(x[1]), float(x[2]), float(x[3]), d, D, mean,
                       float(e[start:] @ e[start:]) / n_eff, tuple(y), tuple(w), tuple(e),
                       period=period)


def forecast(model: SarimaModel, horizon: int) -> list[float]:
    """Recursive multi-step forecast, clamped at zero."""
    if horizon <= 0:
        return []
    y = list(model.y)
    if model.constant:
        return [max(0.0, y[-1])] * horizon
    s = model.period
    ar, ma = _lag_polys(model.phi, model.theta, model.seas_phi, model.seas_theta, s)
    w = [v - model.mean for v in model.w]
    e = list(model.resid)
    dp = _diff_poly(model.d, model.D, s)
    out = []
    for _ in range(horizon):
        n = len(w)
        # future shocks are zero; AR and MA terms use the recorded past
        wn = -sum(ar[k] * w[n - k] for k in (1, s, s + 1)) + sum(ma[k] * e[n - k] for k in (1, s, s + 1))
        w.append(wn)
        e.append(0.0)
        m = len(y)
        yn = wn + model.mean - sum(dp[k] * y[m - k] for k in range(1, len(dp)))
        y.append(yn)
        out.append(max(0.0, yn))
    return out


# ---------------------------------------------------------------------------
# price lookups during simulation

def hour_of(t_seconds: float) -> int:
    return int(math.floor(t_seconds / 3600.0))


class PriceBook:
    """Hourly price lookup with day-ahead reveal semantics.

    At simulated time ``now``, prices are known up to the next midnight.
    Later hours are forecast from the trailing 72 known hours; forecasts
    are cached per (zone, reveal boundary).
    """

    def __init__(self, series: Mapping[str, PriceSeries], fixed: Mapping[str, float] | None = None,
                 d: int = 0, D: int = 1):
        self.series = dict(series)
        self.fixed = dict(fixed or {})
        self.d, self.D = d, D
        self.known_until = 0
        self._cache: dict[tuple[str, int], list[float]] = {}

    def reveal(self, now_seconds: float):
        self.known_until = (hour_of(now_seconds) // PERIOD + 1) * PERIOD

    def _forecast(self, zone: str, steps: int) -> list[float]:
        key = (zone, self.known_until)
        fc = self._cache.get(key)
        if fc is None or len(fc) < steps:
            ser = self.series[zone]
            known = min(self.known_until, ser.end_hour)
            lo = max(ser.start_hour, known - TRAIN_HOURS)
            train = [ser.actual(h) for h in range(lo, known)]
            horizon = max(steps, 2 * len(fc) if fc else PERIOD)
            if len(train) >= TRAIN_HOURS:
                fc = forecast(fit_sarima(train, self.d, self.D), horizon)
            elif len(train) >= PERIOD:
                last = train[-PERIOD:]
                fc = [last[i % PERIOD] for i in range(horizon)]
            elif train:
                fc = [train[-1]] * horizon
            else:
                raise PriceDataError(f"zone {zone}: no known prices before hour {self.known_until}")
            self._cache[key] = fc
        return fc

    def price_at(self, zone: str, hour: int) -> float:
        if zone in self.fixed:
            return self.fixed[zone]
        ser = self.series.get(zone)
        if ser is None:
            raise PriceDataError(f"unknown price zone {zone!r}")
        if hour < ser.start_hour:
            raise PriceDataError(f"zone {zone}: hour {hour} precedes series start {ser.start_hour}")
        known = min(self.known_until, ser.end_hour)
        if hour < known:
            return ser.actual(hour)
        steps = hour - known + 1
        return self._forecast(zone, steps)[steps - 1]

    def actual(self, zone: str, hour: int) -> float:
        if zone in self.fixed:
            return self.fixed[zone]
        if zone not in self.series:
            raise PriceDataError(f"unknown price zone {zone!r}")
        return self.series[zone].actual(hour)


def nearest_rank(values: Iterable[float], pct: float) -> float:
    xs = sorted(values)
    if not xs:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(pct / 100.0 * len(xs)))
    return xs[rank - 1]


class TwoPriceBook:
    """Two-level tariff per zone: 90th percentile 12:00-24:00, 10th percentile otherwise.

    Percentiles are taken over the recorded prices in ``[start_hour, end_hour)``.
    Realized costs still use true prices via :meth:`actual`.
    """

    def __init__(self, book: PriceBook, start_hour: int, end_hour: int,
                 on_peak_pct: float = 90, off_peak_pct: float = 10):
        self.book = book
        self.levels: dict[str, tuple[float, float]] = {}
        for zone, ser in book.series.items():
            hours = range(max(start_hour, ser.start_hour), min(end_hour, ser.end_hour))
            vals = [ser.actual(h) for h in hours] or list(ser.prices)
            self.levels[zone] = (nearest_rank(vals, off_peak_pct), nearest_rank(vals, on_peak_pct))

    def reveal(self, now_seconds: float):
        self.book.reveal(now_seconds)

    def price_at(self, zone: str, hour: int) -> float:
        if zone in self.book.fixed:
            return self.book.fixed[zone]
        off, on = self.levels[zone]
        return on if hour % PERIOD >= 12 else off

    def actual(self, zone: str, hour: int) -> float:
        return self.book.actual(zone, hour)


# ---------------------------------------------------------------------------
# files

def parse_price_file(text: str, epoch: dt.date) -> dict[str, PriceSeries]:
    """Read ``zone,date,hour,price`` rows (ISO dates, hour 0-23).

    Hours are indexed relative to midnight of ``epoch``; dates before the
    epoch give negative hour indices. Each zone must be gap-free.
    """
    rows: dict[str, dict[int, float]] = {}
    for lineno, rec in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not rec or rec[0].strip().startswith("#") or rec[0].strip() == "zone":
            continue
        try:
            zone, date, hour, price = (x.strip() for x in rec[:4])
            h = (dt.date.fromisoformat(date) - epoch).days * PERIOD + int(hour)
            if not 0 <= int(hour) < PERIOD:
                raise ValueError(f"hour {hour} out of range")
            rows.setdefault(zone, {})[h] = float(price)
        except ValueError as exc:
            raise ConfigError(f"price file line {lineno}: {exc}") from None
    out = {}
    for zone, by_hour in rows.items():
        lo, hi = min(by_hour), max(by_hour)
        missing = [h for h in range(lo, hi + 1) if h not in by_hour]
        if missing:
            raise ConfigError(f"zone {zone}: missing prices for hour index {missing[0]}")
        out[zone] = PriceSeries(zone, lo, tuple(by_hour[h] for h in range(lo, hi + 1)))
    return out


def load_price_file(path: str | Path, epoch: dt.date) -> dict[str, PriceSeries]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_price_file(text, epoch)


def format_price_file(series: Mapping[str, PriceSeries], epoch: dt.date) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["zone", "date", "hour", "price"])
    for zone in sorted(series):
        ser = series[zone]
        for i, p in enumerate(ser.prices):
            h = ser.start_hour + i
            day = epoch + dt.timedelta(days=h // PERIOD)
            w.writerow([zone, day.isoformat(), h % PERIOD, repr(p)])
    return buf.getvalue()
