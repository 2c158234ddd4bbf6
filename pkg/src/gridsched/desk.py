"""A small synthetic three-system grid for desk-scale experiments.

Speeds and price levels both span a factor of two. Faster cores draw more
power, so the fastest system is the most expensive per unit of work and the
slow one is the cheapest. Half of the jobs originate at the small slow
system, which is overloaded when jobs run where they were submitted.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np

from .experiment import ExperimentConfig
from .grid import GridConfig, SystemConfig, format_grid_config
from .price import PERIOD, PriceSeries, format_price_file
from .workload import GeneratorConfig, Workload, generate_synthetic

EPOCH = dt.date(2014, 6, 1)
HISTORY_DAYS = 3
PRICE_DAYS = 30


def desk_grid(max_q: int | None = 2, w_t: float = 25.0) -> GridConfig:
    walltime = 72 * 3600
    return GridConfig(
        systems=(
            SystemConfig("fast", 256, walltime, power_per_core=30.0, perf_per_core=20.0, price_zone="ZF"),
            SystemConfig("mid", 192, walltime, power_per_core=22.0, perf_per_core=15.0, price_zone="ZM"),
            SystemConfig("slow", 128, walltime, power_per_core=15.0, perf_per_core=10.0, price_zone="ZS"),
        ),
        max_q=max_q, w_t=w_t, cycle_period=300,
    )


def synthetic_prices(zone: str, mean: float, seed: int, days: int = PRICE_DAYS,
                     history_days: int = HISTORY_DAYS, phase_h: float = 0.0) -> PriceSeries:
    """Daily-seasonal hourly prices: afternoon peak, AR(1) noise, mild daily drift."""
    rng = np.random.default_rng(seed)
    n = (days + history_days) * PERIOD
    h = np.arange(n)
    daily = 0.35 * np.sin(2 * np.pi * (h - 9 - phase_h) / PERIOD)
    drift = np.repeat(rng.normal(0, 0.04, size=n // PERIOD + 1), PERIOD)[:n]
    noise = np.zeros(n)
    eps = rng.normal(0, 0.05, size=n)
    for t in range(1, n):
        noise[t] = 0.6 * noise[t - 1] + eps[t]
    p = mean * (1 + daily + drift + noise)
    return PriceSeries(zone, -history_days * PERIOD, tuple(float(round(x, 6)) for x in np.maximum(p, 0.0)))


def desk_prices(seed: int = 0) -> dict[str, PriceSeries]:
    return {
        "ZF": synthetic_prices("ZF", 0.10, seed + 11, phase_h=0.0),
        "ZM": synthetic_prices("ZM", 0.075, seed + 12, phase_h=1.0),
        "ZS": synthetic_prices("ZS", 0.05, seed + 13, phase_h=2.0),
    }


def desk_workload(seed: int = 0, n_jobs: int = 500) -> Workload:
    return generate_synthetic(GeneratorConfig(
        n_jobs=n_jobs,
        mean_interarrival_s=300.0,
        runtime_log_mean=8.5,
        runtime_log_sigma=1.0,
        cores_two_power_max=5,
        estimate_modes=(3600, 2 * 3600, 4 * 3600, 8 * 3600, 16 * 3600, 24 * 3600),
        origins=("fast", "mid", "slow"),
        origin_weights=(0.25, 0.25, 0.5),
    ), seed)


def desk_config(seed: int = 0, n_jobs: int = 500, **overrides) -> ExperimentConfig:
    grid_kw = {k: overrides.pop(k) for k in ("max_q",) if k in overrides}
    return ExperimentConfig(grid=desk_grid(**grid_kw), prices=desk_prices(seed),
                            workload=desk_workload(seed, n_jobs), seed=seed, **overrides)


def write_desk_files(out_dir: str | Path, seed: int = 0, n_jobs: int = 500) -> Path:
    """Write grid.ini, prices.csv and experiment.ini; returns the experiment path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = desk_grid()
    (out / "grid.ini").write_text(format_grid_config(grid))
    (out / "prices.csv").write_text(format_price_file(desk_prices(seed), EPOCH))
    exp = out / "experiment.ini"
    exp.write_text(
        "[experiment]\n"
        "grid = grid.ini\n"
        "prices = prices.csv\n"
        f"epoch = {EPOCH.isoformat()}\n"
        "strategy = MCMF\n"
        "w_t = 25\n"
        "max_q = 2\n"
        "f_g = 1.0\n"
        f"seed = {seed}\n"
        "fairness = true\n"
        "output_dir = out\n\n"
        "[workload]\n"
        f"n_jobs = {n_jobs}\n"
        "mean_interarrival_s = 300\n"
        "runtime_log_mean = 8.5\n"
        "runtime_log_sigma = 1.0\n"
        "cores_two_power_max = 5\n"
        "estimate_modes = 3600 7200 14400 28800 57600 86400\n"
        "origins = fast mid slow\n"
        "origin_weights = 0.25 0.25 0.5\n"
        f"seed = {seed}\n"
    )
    return exp
