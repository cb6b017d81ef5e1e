"""Scenario synthesis: the exogenous world one trading day at a time.

A Scenario owns everything the market does not decide: appliance-driven
demand, scheduled load placement, renewable generation, the rule-based EV
trajectory, SMP samples and the per-cluster allowable-consumption cap. A
(seed, day) pair fully determines a day, so learner and baseline worlds can
share identical draws and repeat runs reproduce byte-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import assets, demand
from .assets import INTERVALS_PER_DAY, ElectricVehicle, ev_apply, ev_decide
from .market import HOURS_PER_INTERVAL
from .scheduler import schedule_flexible
from .tariff import TariffSchedule, default_tariff, load_smp_csv, synthetic_smp_series


@dataclass
class ScenarioConfig:
    """Knobs for the synthetic world; defaults give the 10-cluster desk setup."""

    k: int = 10
    nanogrids_per_cluster: int = 3
    horizon: int = INTERVALS_PER_DAY
    seed: int = 0
    days_per_month: int = 30

    # tariff
    tariff_preset: str = "canonical"
    ccec: tuple = (0.005, 0.003, 0.002)
    smp_csv: str | None = None
    smp_mean: float = 0.068
    smp_amplitude: float = 0.005
    smp_peak_hour: float = 13.0

    # demand
    appliance_catalog: str | None = None
    stay_prob: float = 0.7
    usage_prob: dict = field(default_factory=dict)
    duration_range: tuple = (1, 6)
    d_max: int = 6

    # generation: per-cluster capacity grows with the cluster index
    generation_csv: str | None = None
    wind_capacity_kw: list | None = None
    pv_capacity_kw: list | None = None
    pv_capacity_step_kw: float = 2.5
    wind_capacity_step_kw: float = 0.5
    weibull_shape: float = 2.0
    weibull_scale: float = 7.0

    # EV, one per cluster
    ev_capacity_kwh: float = 40.0
    ev_power_kw: float = 7.0
    ev_efficiency: float = 0.95
    ev_soc_init: float = 0.55
    ev_soc_min: float = 0.2
    ev_soc_max: float = 0.9
    ev_available_from: float = 15.0
    ev_available_until: float = 9.0
    ev_surplus_threshold_kw: float = 0.5

    # allowable consumption cap PW^max per cluster
    pw_max_kw: list | None = None           # explicit override
    pw_max_quantile: float = 75.0           # else: percentile of unscheduled demand
    pw_max_cap_coef: float = 1.0            # plus this times the cluster's RES capacity
    pw_max_floor_kw: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.pw_max_kw is not None and len(self.pw_max_kw) != self.k:
            raise ValueError("pw_max_kw must list one cap per cluster")


@dataclass
class DayData:
    """Exogenous trajectories for one day, all lists indexed [cluster][interval]."""

    day: int
    demand_kw: list          # scheduled appliance load per cluster
    unscheduled_kw: list     # same requests served at request time
    wind_kw: list
    pv_kw: list
    res_kw: list             # wind + pv
    ev_power_kw: list        # signed: + charging (adds to load), - discharging
    pw_max_kw: list          # per cluster
    smp: list                # per interval
    tou: list
    hour: list


class Scenario:
    """Deterministic day factory for one scenario configuration."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.appliances = demand.load_appliance_catalog(config.appliance_catalog)
        self.tariff = self._build_tariff()
        self.wind_capacity, self.pv_capacity = self._capacities()
        self._generation_csv = None
        if config.generation_csv:
            self._generation_csv = assets.load_generation_csv(config.generation_csv, config.k)
        self._day_cache: dict[int, DayData] = {}

    def _build_tariff(self) -> TariffSchedule:
        cfg = self.config
        base = default_tariff(preset=cfg.tariff_preset)
        if cfg.smp_csv:
            hours, rates = load_smp_csv(cfg.smp_csv)
        else:
            hours, rates = synthetic_smp_series(
                days=1, mean=cfg.smp_mean, amplitude=cfg.smp_amplitude,
                peak_hour=cfg.smp_peak_hour)
        return replace(base, ccec_components=tuple(cfg.ccec),
                       smp_hours=hours, smp_rates=rates)

    def _capacities(self) -> tuple[list, list]:
        # capacity grows with the 0-based cluster index, so the first cluster
        # is a pure consumer and the last one is resource-rich
        cfg = self.config
        wind = cfg.wind_capacity_kw or [cfg.wind_capacity_step_kw * c
                                        for c in range(cfg.k)]
        pv = cfg.pv_capacity_kw or [cfg.pv_capacity_step_kw * c
                                    for c in range(cfg.k)]
        if len(wind) != cfg.k or len(pv) != cfg.k:
            raise ValueError("capacity lists must match the cluster count")
        return list(wind), list(pv)

    def ev_for_cluster(self, cluster: int) -> ElectricVehicle:
        cfg = self.config
        return ElectricVehicle(
            capacity_kwh=cfg.ev_capacity_kwh, soc=cfg.ev_soc_init,
            max_charge_kw=cfg.ev_power_kw, max_discharge_kw=cfg.ev_power_kw,
            efficiency=cfg.ev_efficiency, available_from=cfg.ev_available_from,
            available_until=cfg.ev_available_until,
            soc_min=cfg.ev_soc_min, soc_max=cfg.ev_soc_max)

    # -- day synthesis -------------------------------------------------------

    def day(self, day_index: int) -> DayData:
        """Build (or fetch) one day; days are cached since episodes revisit them."""
        cached = self._day_cache.get(day_index)
        if cached is not None:
            return cached
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, day_index])
        horizon = cfg.horizon

        demand_kw, unscheduled_kw = [], []
        for cluster in range(cfg.k):
            scheduled, unscheduled = self._cluster_demand(rng, horizon)
            demand_kw.append(scheduled)
            unscheduled_kw.append(unscheduled)

        wind_kw, pv_kw = self._generation(rng, day_index, horizon)
        res_kw = [[wind_kw[c][n] + pv_kw[c][n] for n in range(horizon)]
                  for c in range(cfg.k)]
        hours = [(n % INTERVALS_PER_DAY) * HOURS_PER_INTERVAL for n in range(horizon)]
        smp = [self.tariff.smp_at(h) for h in hours]
        tou = [self.tariff.tou_rate(h) for h in hours]
        pw_max = self._pw_max(unscheduled_kw)
        ev_power = self._ev_trajectory(demand_kw, res_kw, hours)

        data = DayData(day=day_index, demand_kw=demand_kw, unscheduled_kw=unscheduled_kw,
                       wind_kw=wind_kw, pv_kw=pv_kw, res_kw=res_kw,
                       ev_power_kw=ev_power, pw_max_kw=pw_max,
                       smp=smp, tou=tou, hour=hours)
        self._day_cache[day_index] = data
        return data

    def _cluster_demand(self, rng, horizon: int) -> tuple[list, list]:
        cfg = self.config
        chain = demand.OccupantChain(stay_prob=cfg.stay_prob, usage_prob=cfg.usage_prob)
        baseline = [0.0] * horizon
        flexible: list[demand.LoadRequest] = []
        unscheduled = [0.0] * horizon
        for _ in range(cfg.nanogrids_per_cluster):
            room = int(rng.integers(1, 5))
            busy_until: dict[str, int] = {}   # a running appliance is not re-requested
            for n in range(horizon):
                room = demand.step_occupant(room, chain, rng)
                for req in demand.draw_load_requests(
                        room, chain, self.appliances, n, rng, cfg.duration_range):
                    name = req.appliance.name
                    if n < busy_until.get(name, 0):
                        continue
                    busy_until[name] = n + req.duration
                    for k in range(n, min(n + req.duration, horizon)):
                        unscheduled[k] += req.appliance.power_kw
                    if req.appliance.schedulable:
                        flexible.append(req)
                    else:
                        for k in range(n, min(n + req.duration, horizon)):
                            baseline[k] += req.appliance.power_kw
        plan = schedule_flexible(flexible, baseline, cfg.d_max)
        return plan.profile, unscheduled

    def _generation(self, rng, day_index: int, horizon: int) -> tuple[list, list]:
        cfg = self.config
        if self._generation_csv is not None:
            profile = self._generation_csv
            n = len(profile.wind_kw[0])
            wind = [[profile.wind_kw[c][k % n] for k in range(horizon)]
                    for c in range(cfg.k)]
            pv = [[profile.pv_kw[c][k % n] for k in range(horizon)]
                  for c in range(cfg.k)]
            return wind, pv
        wind_out, pv_out = [], []
        for cluster in range(cfg.k):
            wind = assets.synth_wind(self.wind_capacity[cluster], cfg.weibull_shape,
                                     cfg.weibull_scale, rng)
            pv = assets.synth_pv(self.pv_capacity[cluster], day_index % 365, rng)
            wind_out.append([wind[k % INTERVALS_PER_DAY] for k in range(horizon)])
            pv_out.append([pv[k % INTERVALS_PER_DAY] for k in range(horizon)])
        return wind_out, pv_out

    def _pw_max(self, unscheduled_kw: list) -> list:
        cfg = self.config
        if cfg.pw_max_kw is not None:
            return list(cfg.pw_max_kw)
        out = []
        for c in range(cfg.k):
            base = float(np.percentile(unscheduled_kw[c], cfg.pw_max_quantile))
            cap = self.wind_capacity[c] + self.pv_capacity[c]
            out.append(max(base + cfg.pw_max_cap_coef * cap, cfg.pw_max_floor_kw))
        return out

    def _ev_trajectory(self, demand_kw: list, res_kw: list, hours: list) -> list:
        """Rule-based EV power per cluster; identical across trading worlds."""
        cfg = self.config
        out = []
        for c in range(cfg.k):
            ev = self.ev_for_cluster(c)
            series = []
            for n, hour in enumerate(hours):
                load, res = demand_kw[c][n], res_kw[c][n]
                surplus = res - load if res > load else 0.0
                deficit = load - res if load > res else 0.0
                power = ev_decide(surplus, deficit, hour, ev, self.tariff,
                                  cfg.ev_surplus_threshold_kw)
                if power > 0.0:
                    power = min(power, ev.charge_headroom_kw(HOURS_PER_INTERVAL))
                elif power < 0.0:
                    power = -min(-power, ev.discharge_headroom_kw(HOURS_PER_INTERVAL))
                if power != 0.0:
                    ev_apply(ev, power, HOURS_PER_INTERVAL)
                series.append(power)
            out.append(series)
        return out
