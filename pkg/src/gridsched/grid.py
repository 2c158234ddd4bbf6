"""Grid topology, per-system hardware bindings and cross-system scaling."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .workload import ConfigError, Job

# named job power-model bands, as fractions of HPL power per core
POWER_BANDS = {
    "hpl": (1.0, 1.0),
    "average": (0.6, 1.4),
    "lower": (0.6, 1.0),
    "higher": (1.0, 1.4),
}


@dataclass(frozen=True)
class SystemConfig:
    name: str
    total_cores: int
    max_walltime: int
    power_per_core: float  # watts, HPL power / total cores
    perf_per_core: float  # Gflops
    price_zone: str | None = None
    fixed_price: float | None = None  # currency per kWh
    power_model_multiplier: float = 1.0
    link_bandwidth: Mapping[str, float] = field(default_factory=dict)  # bytes/s
    link_latency: Mapping[str, float] = field(default_factory=dict)  # s

    def __post_init__(self):
        if self.total_cores < 1 or self.max_walltime <= 0:
            raise ConfigError(f"{self.name}: cores and max walltime must be positive")
        if self.power_per_core <= 0 or self.perf_per_core <= 0:
            raise ConfigError(f"{self.name}: power and performance per core must be positive")
        if not 0.6 <= self.power_model_multiplier <= 1.4:
            raise ConfigError(f"{self.name}: power_model_multiplier outside [0.6, 1.4]")
        if (self.price_zone is None) == (self.fixed_price is None):
            raise ConfigError(f"{self.name}: exactly one of price_zone / fixed_price required")


@dataclass(frozen=True)
class GridConfig:
    systems: tuple[SystemConfig, ...]
    max_q: int | None = 2  # None = unlimited
    w_t: float = 25.0
    cycle_period: int = 300

    def __post_init__(self):
        names = [s.name for s in self.systems]
        if len(set(names)) != len(names):
            raise ConfigError("system names must be unique")
        if self.max_q is not None and self.max_q < 1:
            raise ConfigError("max_q must be >= 1 or unlimited")
        if not 0 <= self.w_t <= 100:
            raise ConfigError("w_t must lie in [0, 100]")
        if self.cycle_period <= 0:
            raise ConfigError("cycle_period must be positive")

    def system(self, name: str) -> SystemConfig:
        for s in self.systems:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.systems]


def compatible(job: Job, sys: SystemConfig, scaled_ert: int | None = None) -> bool:
    """Whether ``sys`` can run ``job``; both comparisons are inclusive.

    ``scaled_ert`` is the job's estimate on ``sys``; defaults to ``job.ert``.
    """
    ert = job.ert if scaled_ert is None else scaled_ert
    return job.cores <= sys.total_cores and ert <= sys.max_walltime


def scale_runtime(t_src: int, src: SystemConfig, dst: SystemConfig) -> int:
    """Rescale a duration from ``src`` to ``dst`` by the performance-per-core ratio (ceil, >= 1 s)."""
    if src.perf_per_core == dst.perf_per_core:
        return max(1, int(t_src))
    # round before ceil so exact products (3600*9/21.1 etc) do not pick up fp noise
    return max(1, math.ceil(round(t_src * src.perf_per_core / dst.perf_per_core, 9)))


def job_power(job: Job, sys: SystemConfig, multiplier: float | None = None) -> float:
    """Power draw of ``job`` on ``sys`` in watts."""
    m = sys.power_model_multiplier if multiplier is None else multiplier
    return job.cores * sys.power_per_core * m


def transfer_time(job: Job, src: SystemConfig, dst: SystemConfig) -> float:
    """Seconds to move the job's data from ``src`` to ``dst``; 0 on the same system."""
    if src.name == dst.name or job.data_size <= 0:
        return 0.0
    bw = src.link_bandwidth.get(dst.name, math.inf)
    lat = src.link_latency.get(dst.name, 0.0)
    return lat + (job.data_size / bw if bw != math.inf else 0.0)


def sample_power_multipliers(jobs: Iterable[Job], band: str | tuple[float, float],
                             seed: int) -> dict[int, float]:
    """Per-job power multiplier drawn uniformly from ``band``."""
    lo, hi = POWER_BANDS[band] if isinstance(band, str) else band
    if not 0.6 <= lo <= hi <= 1.4:
        raise ConfigError(f"power band {band!r} outside [0.6, 1.4]")
    jobs = list(jobs)
    rng = np.random.default_rng(seed)
    draws = rng.uniform(lo, hi, size=len(jobs))
    return {j.id: float(d) for j, d in zip(jobs, draws)}


def _parse_max_q(raw: str) -> int | None:
    raw = raw.strip().lower()
    if raw in ("inf", "infinity", "unlimited", "none"):
        return None
    return int(raw)


def parse_grid_config(text: str) -> GridConfig:
    """Read a grid description.

    Format (INI)::

        [grid]
        max_q = 2            ; or inf
        w_t = 25
        cycle_period = 300

        [system.Gordon]
        cores = 16160
        max_walltime = 172800
        power_per_core = 22.17
        perf_per_core = 21.10
        price_zone = CAISO   ; or fixed_price = 0.08
        power_model_multiplier = 1.0

        [link.Gordon.Darter]
        bandwidth = 1.0e8
        latency = 0.02
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read_string(text)
    g = cp["grid"] if cp.has_section("grid") else {}
    links: dict[str, dict[str, dict[str, float]]] = {}
    for sec in cp.sections():
        if sec.startswith("link."):
            try:
                _, a, b = sec.split(".")
            except ValueError:
                raise ConfigError(f"bad link section [{sec}]") from None
            entry = links.setdefault(a, {"bw": {}, "lat": {}})
            entry["bw"][b] = float(cp[sec].get("bandwidth", "inf"))
            entry["lat"][b] = float(cp[sec].get("latency", "0"))
    systems = []
    for sec in cp.sections():
        if not sec.startswith("system."):
            continue
        name = sec[len("system."):]
        s = cp[sec]
        try:
            systems.append(SystemConfig(
                name=name,
                total_cores=int(s["cores"]),
                max_walltime=int(float(s["max_walltime"])),
                power_per_core=float(s["power_per_core"]),
                perf_per_core=float(s["perf_per_core"]),
                price_zone=s.get("price_zone"),
                fixed_price=float(s["fixed_price"]) if "fixed_price" in s else None,
                power_model_multiplier=float(s.get("power_model_multiplier", "1.0")),
                link_bandwidth=links.get(name, {}).get("bw", {}),
                link_latency=links.get(name, {}).get("lat", {}),
            ))
        except KeyError as exc:
            raise ConfigError(f"[{sec}] missing key {exc}") from None
    if not systems:
        raise ConfigError("grid config defines no systems")
    return GridConfig(
        systems=tuple(systems),
        max_q=_parse_max_q(g.get("max_q", "2")),
        w_t=float(g.get("w_t", "25")),
        cycle_period=int(g.get("cycle_period", "300")),
    )


def load_grid_config(path: str | Path) -> GridConfig:
    try:
        return parse_grid_config(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def format_grid_config(grid: GridConfig) -> str:
    lines = ["[grid]",
             f"max_q = {'inf' if grid.max_q is None else grid.max_q}",
             f"w_t = {grid.w_t}",
             f"cycle_period = {grid.cycle_period}", ""]
    for s in grid.systems:
        lines += [f"[system.{s.name}]",
                  f"cores = {s.total_cores}",
                  f"max_walltime = {s.max_walltime}",
                  f"power_per_core = {s.power_per_core!r}",
                  f"perf_per_core = {s.perf_per_core!r}"]
        if s.price_zone is not None:
            lines.append(f"price_zone = {s.price_zone}")
        else:
            lines.append(f"fixed_price = {s.fixed_price!r}")
        lines += [f"power_model_multiplier = {s.power_model_multiplier!r}", ""]
    for s in grid.systems:
        for dst in sorted(set(s.link_bandwidth) | set(s.link_latency)):
            lines += [f"[link.{s.name}.{dst}]",
                      f"bandwidth = {s.link_bandwidth.get(dst, math.inf)!r}",
                      f"latency = {s.link_latency.get(dst, 0.0)!r}", ""]
    return "\n".join(lines)
