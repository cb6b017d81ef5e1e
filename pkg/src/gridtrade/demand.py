"""Occupant-driven household load generation.

One occupant per nanogrid walks between 4 rooms following a Markov chain and
switches appliances in the occupied room on with a per-interval probability.
The transition matrix and usage probabilities stand in for survey data that
is not public; both are configurable and the defaults are synthetic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

ROOMS = (1, 2, 3, 4)

# Per-interval activation probability by appliance category (synthetic).
USAGE_PROB_DEFAULT = {"hvac": 0.15, "entertainment": 0.10, "kitchen": 0.05, "other": 0.03}

APPLIANCE_CATEGORY = {
    "air_conditioner": "hvac",
    "electric_fan": "hvac",
    "heater": "hvac",
    "tv": "entertainment",
    "audio": "entertainment",
    "computer": "entertainment",
    "microwave_oven": "kitchen",
    "rice_cooker": "kitchen",
    "washing_machine": "other",
    "vacuum_cleaner": "other",
    "iron": "other",
    "hair_dryer": "other",
}

DURATION_RANGE_DEFAULT = (1, 6)  # intervals, drawn uniformly per request


@dataclass(frozen=True)
class Appliance:
    name: str
    power_kw: float
    rooms: tuple[int, ...]
    schedulable: bool

    def __post_init__(self):
        if self.power_kw <= 0:
            raise ValueError(f"{self.name}: power must be positive")
        if not self.rooms or any(r not in ROOMS for r in self.rooms):
            raise ValueError(f"{self.name}: rooms must be within {ROOMS}")


@dataclass(frozen=True)
class LoadRequest:
    appliance: Appliance
    interval: int
    duration: int  # intervals

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("request duration must be >= 1 interval")


def load_appliance_catalog(path=None) -> list[Appliance]:
    """Read the appliance catalog CSV (name, power_kw, room, schedulable).

    The room column holds a single index or a ';'-separated list. Without a
    path the bundled twelve-appliance household inventory is returned.
    """
    if path is None:
        ref = resources.files("gridtrade.data") / "appliances.csv"
        with ref.open("r", newline="") as fh:
            return _parse_catalog(fh)
    with open(path, newline="") as fh:
        return _parse_catalog(fh)


def _parse_catalog(fh) -> list[Appliance]:
    reader = csv.DictReader(fh)
    required = {"name", "power_kw", "room", "schedulable"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ValueError(f"appliance catalog needs columns {sorted(required)}")
    out = []
    for row in reader:
        rooms = tuple(int(r) for r in row["room"].split(";"))
        out.append(Appliance(
            name=row["name"].strip(),
            power_kw=float(row["power_kw"]),
            rooms=rooms,
            schedulable=row["schedulable"].strip().lower() in ("true", "1", "yes"),
        ))
    return out


def default_usage_probs(appliances: list[Appliance]) -> dict[str, float]:
    """Per-appliance activation probabilities from the category defaults."""
    return {
        a.name: USAGE_PROB_DEFAULT[APPLIANCE_CATEGORY.get(a.name, "other")]
        for a in appliances
    }


class OccupantChain:
    """Room-occupancy Markov chain plus appliance usage probabilities."""

    def __init__(self, transition: np.ndarray | None = None,
                 usage_prob: dict[str, float] | None = None,
                 stay_prob: float = 0.7):
        if transition is None:
            move = (1.0 - stay_prob) / (len(ROOMS) - 1)
            transition = np.full((4, 4), move)
            np.fill_diagonal(transition, stay_prob)
        transition = np.asarray(transition, dtype=np.float64)
        if transition.shape != (4, 4):
            raise ValueError("transition matrix must be 4x4")
        if np.any(transition < 0):
            raise ValueError("transition probabilities must be non-negative")
        if np.any(np.abs(transition.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("each transition row must sum to 1")
        self.transition = transition
        self.usage_prob = dict(usage_prob or {})
        if any(not 0.0 <= p <= 1.0 for p in self.usage_prob.values()):
            raise ValueError("usage probabilities must lie in [0, 1]")
        # cumulative rows let one uniform draw pick the next room
        self._cum = np.cumsum(transition, axis=1)

    def usage_prob_for(self, appliance: Appliance) -> float:
        if appliance.name in self.usage_prob:
            return self.usage_prob[appliance.name]
        return USAGE_PROB_DEFAULT[APPLIANCE_CATEGORY.get(appliance.name, "other")]


def step_occupant(room: int, chain: OccupantChain, rng: np.random.Generator) -> int:
    """Sample the next room. Deterministic under a fixed rng state."""
    u = rng.random()
    row = chain._cum[room - 1]
    return int(np.searchsorted(row, u, side="right")) + 1 if u < row[-1] else len(row)


def draw_load_requests(room: int, chain: OccupantChain, appliances: list[Appliance],
                       interval: int, rng: np.random.Generator,
                       duration_range: tuple[int, int] = DURATION_RANGE_DEFAULT,
                       ) -> list[LoadRequest]:
    """Requests the occupant raises this interval, gated by their room."""
    if room not in ROOMS:
        raise ValueError(f"room must be in {ROOMS}")
    lo, hi = duration_range
    out = []
    for a in appliances:
        if room not in a.rooms:
            continue
        if rng.random() < chain.usage_prob_for(a):
            duration = int(rng.integers(lo, hi + 1))
            out.append(LoadRequest(appliance=a, interval=interval, duration=duration))
    return out


def cluster_demand(nanogrid_loads_kw, interval: int | None = None) -> float:
    """Aggregate nanogrid loads (appliances + EV charging) to cluster demand."""
    demand = 0.0
    for load in nanogrid_loads_kw:
        if load < 0:
            raise ValueError(f"negative load {load} kW at interval {interval}")
        demand += load
    return demand
