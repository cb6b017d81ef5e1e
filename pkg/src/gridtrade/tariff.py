"""Electricity pricing: ToU bands, progressive tiers, environment charges, SMP.

All rates are USD per kWh. A TariffSchedule is immutable after construction
and every lookup is a pure function, so one schedule can be shared freely
across simulation instances and threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TariffError(ValueError):
    pass


# Canonical ToU bands, half-open on the left: rate applies for start < t <= end.
# The off-peak band wraps midnight (23:00 through 09:00 inclusive).
TOU_BANDS_DEFAULT = (
    (23.0, 9.0, 0.06),   # off-peak
    (9.0, 10.0, 0.12),   # mid-peak
    (12.0, 13.0, 0.12),
    (17.0, 23.0, 0.12),
    (10.0, 12.0, 0.18),  # on-peak
    (13.0, 17.0, 0.18),
)

# Alternative preset quoted in running text; same band structure.
TOU_BANDS_PROSE = tuple(
    (s, e, {0.06: 0.05, 0.12: 0.10, 0.18: 0.18}[r]) for s, e, r in TOU_BANDS_DEFAULT
)

# Monthly consumption tiers: (upper bound kWh or None, rate).
PROGRESSIVE_TIERS_DEFAULT = ((300.0, 0.008), (450.0, 0.018), (None, 0.027))

# Renewable-portfolio, emission-trading and coal-reduction charges. The real
# components are not public; these defaults are synthetic placeholders.
CCEC_DEFAULT = (0.005, 0.003, 0.002)


def _band_contains(start: float, end: float, t: float) -> bool:
    if start < end:
        return start < t <= end
    # wrapping band, e.g. 23:00 -> 09:00
    return t > start or t <= end


@dataclass(frozen=True)
class TariffSchedule:
    """ToU bands + progressive tiers + per-kWh environment charges + SMP series."""

    tou_bands: tuple = TOU_BANDS_DEFAULT
    progressive_tiers: tuple = PROGRESSIVE_TIERS_DEFAULT
    ccec_components: tuple = CCEC_DEFAULT
    smp_hours: tuple = field(default=())
    smp_rates: tuple = field(default=())

    def __post_init__(self):
        self._validate_bands()
        self._validate_tiers()
        if any(r < 0 for r in self.ccec_components) or len(self.ccec_components) != 3:
            raise TariffError("ccec_components must be three non-negative rates")
        if len(self.smp_hours) != len(self.smp_rates):
            raise TariffError("smp series hours/rates length mismatch")
        if any(self.smp_hours[i] >= self.smp_hours[i + 1]
               for i in range(len(self.smp_hours) - 1)):
            raise TariffError("smp series hours must be strictly increasing")

    def _validate_bands(self):
        # exhaustive and non-overlapping over every minute of the day
        for minute in range(24 * 60):
            t = (minute + 0.5) / 60.0
            hits = sum(_band_contains(s, e, t) for s, e, _ in self.tou_bands)
            if hits != 1:
                raise TariffError(f"ToU bands cover t={t:.4f}h {hits} times (want exactly 1)")
        if any(r < 0 for _, _, r in self.tou_bands):
            raise TariffError("ToU rates must be non-negative")

    def _validate_tiers(self):
        bounds = [b for b, _ in self.progressive_tiers[:-1]]
        if self.progressive_tiers[-1][0] is not None:
            raise TariffError("last progressive tier must be unbounded")
        if any(b is None for b in bounds) or bounds != sorted(set(bounds)):
            raise TariffError("progressive tier bounds must be strictly increasing")
        if any(r < 0 for _, r in self.progressive_tiers):
            raise TariffError("progressive rates must be non-negative")

    # -- lookups ------------------------------------------------------------

    def tou_rate(self, t: float) -> float:
        """Rate for time-of-day t in hours, t in [0, 24)."""
        t = t % 24.0
        if t == 0.0:
            t = 24.0
        for start, end, rate in self.tou_bands:
            if _band_contains(start, end, t):
                return rate
        raise TariffError(f"no ToU band matched t={t}")  # unreachable by invariant

    def tou_band(self, t: float) -> str:
        """Band label at t: 'off', 'mid' or 'on' by rank of the band's rate."""
        rate = self.tou_rate(t)
        ranked = sorted({r for _, _, r in self.tou_bands})
        return ("off", "mid", "on")[ranked.index(rate)] if len(ranked) == 3 else (
            "off" if rate == ranked[0] else "on")

    def progressive_rate(self, cum_month_kwh: float) -> float:
        """Tier rate for the month-to-date consumption total."""
        if cum_month_kwh < 0:
            raise TariffError(f"negative month-to-date consumption {cum_month_kwh}")
        for bound, rate in self.progressive_tiers:
            if bound is None or cum_month_kwh <= bound:
                return rate
        raise TariffError("unreachable: last tier is unbounded")

    def ccec_rate(self) -> float:
        return sum(self.ccec_components)

    def effective_dr_rate(self, t: float, cum_month_kwh: float) -> float:
        """Composite demand-response rate: ToU + progressive tier + CCEC."""
        return self.tou_rate(t) + self.progressive_rate(cum_month_kwh) + self.ccec_rate()

    def smp_at(self, t_hours: float) -> float:
        """Piecewise-linear SMP at absolute hour t; flat outside the sample range."""
        if not self.smp_hours:
            raise TariffError("smp series is empty")
        return float(np.interp(t_hours, self.smp_hours, self.smp_rates))


def synthetic_smp_series(days: int = 1, mean: float = 0.09, amplitude: float = 0.02,
                         peak_hour: float = 19.0, samples_per_day: int = 24) -> tuple:
    """Diurnal sinusoid: mean +/- amplitude, peaking at peak_hour each day."""
    hours, rates = [], []
    for k in range(days * samples_per_day + 1):
        h = k * (24.0 / samples_per_day)
        rate = mean + amplitude * np.cos(2.0 * np.pi * ((h % 24.0) - peak_hour) / 24.0)
        hours.append(h)
        rates.append(float(rate))
    return tuple(hours), tuple(rates)


def load_smp_csv(path) -> tuple:
    """Read an SMP series from CSV with header `hour_of_year, smp_usd_per_kwh`."""
    import csv

    hours, rates = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["hour_of_year", "smp_usd_per_kwh"]:
            raise TariffError(f"{path}: expected header 'hour_of_year, smp_usd_per_kwh'")
        for row in reader:
            if not row:
                continue
            hours.append(float(row[0]))
            rates.append(float(row[1]))
    if not hours:
        raise TariffError(f"{path}: no SMP samples")
    return tuple(hours), tuple(rates)


def default_tariff(days: int = 31, preset: str = "canonical") -> TariffSchedule:
    """Schedule with the standard bands/tiers and a synthetic diurnal SMP."""
    bands = {"canonical": TOU_BANDS_DEFAULT, "prose": TOU_BANDS_PROSE}.get(preset)
    if bands is None:
        raise TariffError(f"unknown tariff preset {preset!r}")
    hours, rates = synthetic_smp_series(days=days)
    return TariffSchedule(tou_bands=bands, smp_hours=hours, smp_rates=rates)
