"""Renewable generation profiles and the EV battery.

The wind/PV generators replace measured series that are not published; both
draw from a seeded rng so a scenario is reproducible end to end. The EV
follows the fixed rule: charge on renewable surplus, discharge into mid/on
peak deficits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .tariff import TariffSchedule

INTERVALS_PER_DAY = 144
HOURS_PER_INTERVAL = 24.0 / INTERVALS_PER_DAY  # 10-minute steps


class AssetError(ValueError):
    pass


@dataclass
class GenerationProfile:
    """Per-cluster wind and PV series in kW, one sample per 10-minute interval."""

    wind_kw: list  # wind_kw[cluster][interval]
    pv_kw: list

    def __post_init__(self):
        if len(self.wind_kw) != len(self.pv_kw):
            raise AssetError("wind and pv need the same number of clusters")
        lengths = {len(s) for s in self.wind_kw} | {len(s) for s in self.pv_kw}
        if len(lengths) > 1:
            raise AssetError("all generation series must have equal length")
        for series in list(self.wind_kw) + list(self.pv_kw):
            if any(v < 0 for v in series):
                raise AssetError("generation samples must be non-negative")

    def total(self, cluster: int, interval: int) -> float:
        return self.wind_kw[cluster][interval] + self.pv_kw[cluster][interval]


def synth_pv(capacity_kw: float, day_of_year: int, rng: np.random.Generator,
             sunrise: float = 6.0, sunset: float = 18.0,
             cloud_mean: float = 0.75, cloud_sigma: float = 0.15,
             cloud_rho: float = 0.9, seasonal_swing: float = 1.5) -> list[float]:
    """One day of PV output: half-sine over daylight times an AR(1) cloud factor.

    day_of_year widens/narrows the daylight window by up to seasonal_swing
    hours around the solstices.
    """
    if capacity_kw < 0:
        raise AssetError("pv capacity must be non-negative")
    shift = seasonal_swing * np.cos(2.0 * np.pi * (day_of_year - 172) / 365.0)
    rise, set_ = sunrise - shift / 2.0, sunset + shift / 2.0
    daylight = set_ - rise
    cloud = cloud_mean
    out = []
    for k in range(INTERVALS_PER_DAY):
        t = (k + 0.5) * HOURS_PER_INTERVAL
        cloud = cloud_rho * cloud + (1.0 - cloud_rho) * cloud_mean \
            + cloud_sigma * float(rng.standard_normal())
        cloud = min(max(cloud, 0.0), 1.0)
        if rise < t < set_ and daylight > 0:
            out.append(float(capacity_kw * np.sin(np.pi * (t - rise) / daylight) * cloud))
        else:
            out.append(0.0)
    return out


def wind_power_curve(speed: float, capacity_kw: float, cut_in: float = 3.0,
                     rated: float = 12.0, cut_out: float = 25.0) -> float:
    """Piecewise turbine curve: cubic ramp between cut-in and rated speed."""
    if speed < cut_in or speed > cut_out:
        return 0.0
    if speed >= rated:
        return capacity_kw
    return capacity_kw * (speed**3 - cut_in**3) / (rated**3 - cut_in**3)


def synth_wind(capacity_kw: float, shape: float, scale_: float,
               rng: np.random.Generator, cut_in: float = 3.0, rated: float = 12.0,
               cut_out: float = 25.0) -> list[float]:
    """One day of wind output from Weibull speed draws through the power curve."""
    if shape <= 0 or scale_ <= 0:
        raise AssetError("weibull shape and scale must be positive")
    speeds = scale_ * rng.weibull(shape, size=INTERVALS_PER_DAY)
    return [wind_power_curve(float(v), capacity_kw, cut_in, rated, cut_out)
            for v in speeds]


def load_generation_csv(path, n_clusters: int) -> GenerationProfile:
    """Read `interval, cluster_id, wind_kw, pv_kw` rows into a profile."""
    rows: dict[tuple[int, int], tuple[float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"interval", "cluster_id", "wind_kw", "pv_kw"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise AssetError(f"{path}: generation CSV needs columns {sorted(required)}")
        for row in reader:
            key = (int(row["cluster_id"]), int(row["interval"]))
            rows[key] = (float(row["wind_kw"]), float(row["pv_kw"]))
    if not rows:
        raise AssetError(f"{path}: no generation rows")
    n_intervals = max(i for _, i in rows) + 1
    wind = [[0.0] * n_intervals for _ in range(n_clusters)]
    pv = [[0.0] * n_intervals for _ in range(n_clusters)]
    for (c, i), (w, p) in rows.items():
        if not 0 <= c < n_clusters:
            raise AssetError(f"{path}: cluster_id {c} outside 0..{n_clusters - 1}")
        wind[c][i] = w
        pv[c][i] = p
    return GenerationProfile(wind_kw=wind, pv_kw=pv)


# ---------------------------------------------------------------------------
# EV battery


@dataclass
class ElectricVehicle:
    """Battery with one-way efficiency and an availability window in hours."""

    capacity_kwh: float = 40.0
    soc: float = 0.5
    max_charge_kw: float = 7.0
    max_discharge_kw: float = 7.0
    efficiency: float = 0.95
    available_from: float = 18.0   # window wraps midnight when from > until
    available_until: float = 8.0
    soc_min: float = 0.2
    soc_max: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise AssetError("efficiency must be in (0, 1]")
        if not self.soc_min <= self.soc <= self.soc_max:
            raise AssetError(f"soc {self.soc} outside [{self.soc_min}, {self.soc_max}]")

    def available_at(self, hour: float) -> bool:
        h = hour % 24.0
        lo, hi = self.available_from, self.available_until
        return lo <= h < hi if lo < hi else (h >= lo or h < hi)

    def charge_headroom_kw(self, dt_h: float) -> float:
        """Largest charging power that keeps soc <= soc_max over dt_h."""
        room_kwh = (self.soc_max - self.soc) * self.capacity_kwh
        return max(0.0, room_kwh / (dt_h * self.efficiency))

    def discharge_headroom_kw(self, dt_h: float) -> float:
        """Largest terminal discharging power that keeps soc >= soc_min."""
        room_kwh = (self.soc - self.soc_min) * self.capacity_kwh
        return max(0.0, room_kwh * self.efficiency / dt_h)


def ev_decide(res_surplus_kw: float, deficit_kw: float, hour: float,
              ev: ElectricVehicle, tariff: TariffSchedule,
              surplus_threshold_kw: float = 0.5) -> float:
    """Signed EV power for this interval: positive charges, negative discharges.

    Charges from renewable surplus above the threshold, discharges into a
    deficit only during mid- or on-peak hours, and stays idle when parked
    away or at an soc bound.
    """
    if not ev.available_at(hour):
        return 0.0
    if res_surplus_kw > surplus_threshold_kw and ev.soc < ev.soc_max:
        return min(ev.max_charge_kw, res_surplus_kw)
    if deficit_kw > 0.0 and ev.soc > ev.soc_min and tariff.tou_band(hour) in ("mid", "on"):
        return -min(ev.max_discharge_kw, deficit_kw)
    return 0.0


def ev_apply(ev: ElectricVehicle, power_kw: float, dt_h: float) -> float:
    """Advance the battery by one interval at signed terminal power.

    Raises when the move would leave [soc_min, soc_max]; callers cap the
    decided power with the headroom helpers first.
    """
    if power_kw > ev.max_charge_kw or -power_kw > ev.max_discharge_kw:
        raise AssetError(f"power {power_kw} kW exceeds EV limits")
    if power_kw >= 0:
        delta_kwh = power_kw * dt_h * ev.efficiency
    else:
        delta_kwh = power_kw * dt_h / ev.efficiency
    soc = ev.soc + delta_kwh / ev.capacity_kwh
    if soc < ev.soc_min - 1e-12 or soc > ev.soc_max + 1e-12:
        raise AssetError(f"soc {soc:.6f} would leave [{ev.soc_min}, {ev.soc_max}]")
    ev.soc = min(max(soc, ev.soc_min), ev.soc_max)
    return ev.soc
