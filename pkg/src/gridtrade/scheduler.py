"""Local power management: peak-shaving of deferrable loads and source dispatch.

Two independent decisions per cluster: when each schedulable request runs
(greedy placement that minimizes the running peak within the request's
deferral window) and which sources serve the resulting demand (strict
priority: renewables, then EV discharge, then P2P purchases, then grid).
"""

from __future__ import annotations

from dataclasses import dataclass

from .demand import LoadRequest


@dataclass
class SwitchPlan:
    """Start interval per request plus the resulting total load profile."""

    requests: list[LoadRequest]
    starts: list[int]
    profile: list[float]  # kW per interval, baseline plus placed requests

    def delay(self, idx: int) -> int:
        return self.starts[idx] - self.requests[idx].interval


@dataclass
class SourceMix:
    """How one interval's demand was served, all in kW."""

    res_kw: float = 0.0
    ev_kw: float = 0.0
    p2p_kw: float = 0.0
    grid_kw: float = 0.0
    surplus_kw: float = 0.0  # renewable power left after serving local load

    @property
    def served_kw(self) -> float:
        return self.res_kw + self.ev_kw + self.p2p_kw + self.grid_kw


def _place(profile: list[float], start: int, power: float, duration: int) -> None:
    for k in range(start, min(start + duration, len(profile))):
        profile[k] += power


def _peak_if_placed(profile: list[float], start: int, power: float, duration: int,
                    current_peak: float) -> float:
    peak = current_peak
    for k in range(start, min(start + duration, len(profile))):
        v = profile[k] + power
        if v > peak:
            peak = v
    return peak


def schedule_flexible(requests: list[LoadRequest], baseline_profile: list[float],
                      d_max: int) -> SwitchPlan:
    """Assign each request a start inside [request, request + d_max].

    Requests are handled in arrival order. Schedulable ones go to the start
    that minimizes the running peak (earliest such start on ties);
    non-schedulable ones are served immediately at their request interval.
    """
    if d_max < 0:
        raise ValueError("d_max must be >= 0")
    profile = list(baseline_profile)
    horizon = len(profile)
    starts = []
    peak = max(profile, default=0.0)
    for req in requests:
        if not 0 <= req.interval < horizon:
            raise ValueError(f"request interval {req.interval} outside profile")
        power = req.appliance.power_kw
        if not req.appliance.schedulable:
            best = req.interval
        else:
            best, best_peak = req.interval, None
            last = min(req.interval + d_max, horizon - 1)
            for start in range(req.interval, last + 1):
                cand = _peak_if_placed(profile, start, power, req.duration, peak)
                if best_peak is None or cand < best_peak:
                    best, best_peak = start, cand
        _place(profile, best, power, req.duration)
        peak = max(peak, max(profile[best:min(best + req.duration, horizon)], default=peak))
        starts.append(best)
    return SwitchPlan(requests=list(requests), starts=starts, profile=profile)


def dispatch_sources(demand_kw: float, res_kw: float, ev_discharge_kw: float,
                     p2p_bought_kw: float) -> SourceMix:
    """Fill demand by strict priority; the grid is the infinite slack source."""
    for name, v in (("demand", demand_kw), ("res", res_kw),
                    ("ev", ev_discharge_kw), ("p2p", p2p_bought_kw)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")
    res_used = min(demand_kw, res_kw)
    rem = demand_kw - res_used
    ev_used = min(rem, ev_discharge_kw)
    rem -= ev_used
    p2p_used = min(rem, p2p_bought_kw)
    grid = rem - p2p_used
    return SourceMix(res_kw=res_used, ev_kw=ev_used, p2p_kw=p2p_used, grid_kw=grid,
                     surplus_kw=res_kw - res_used)
