"""The trading MDP: global state, action-to-power mapping, lockstep baseline.

Every step advances two worlds on identical exogenous draws: the learner
world executes the agents' trade labels, the shadow world executes the
rule-based policy. Each cluster's reward is +1 exactly when its learner-world
interval cost beats its shadow-world cost, else -1.
"""

from __future__ import annotations

import numpy as np

from .market import (HOURS_PER_INTERVAL, CONSUMER, IDLE, PRODUCER, ChannelTrades,
                     ClusterCostLedger, MessageBus, ClusterSnapshot, TradeOrder,
                     run_trading_round, settle_and_cost)
from .scenario import DayData, Scenario
from .scheduler import dispatch_sources

# Trade labels straight from the action-switching definitions: the 3-label
# space trades renewables only, the 5-label space adds the utility channel.
BUY_UT, BUY_RES, IDLE_ACTION, SELL_RES, SELL_UT = 2, 1, 0, -1, -2

RES_SPACE = (BUY_RES, SELL_RES, IDLE_ACTION)
UT_RES_SPACE = (BUY_UT, BUY_RES, SELL_UT, SELL_RES, IDLE_ACTION)

ACTION_SPACES = {"res": RES_SPACE, "ut_res": UT_RES_SPACE}


def traded_power(label: int, pw_cluster_kw: float, pw_res_kw: float,
                 pw_max_kw: float) -> float:
    """Offered trade quantity in kW for one label under the consumption cap."""
    if label in (BUY_UT, BUY_RES):
        v = (pw_cluster_kw - pw_res_kw) - pw_max_kw
        return v if v > 0.0 else 0.0
    if label in (SELL_UT, SELL_RES):
        v = pw_max_kw - (pw_cluster_kw + pw_res_kw)
        return v if v > 0.0 else 0.0
    if label == IDLE_ACTION:
        return 0.0
    raise ValueError(f"unknown trade label {label}")


def baseline_policy(surplus_kw: float, deficit_kw: float) -> int:
    """Rule-based label: sell any surplus, buy any deficit, else idle."""
    if surplus_kw > 0.0:
        return SELL_RES
    if deficit_kw > 0.0:
        return BUY_RES
    return IDLE_ACTION


class _World:
    """Cost ledgers for one side of the lockstep comparison."""

    __slots__ = ("ledgers",)

    def __init__(self, k: int):
        self.ledgers = [ClusterCostLedger() for _ in range(k)]

    def reset_month(self):
        for led in self.ledgers:
            led.reset_month()


class TradingEnv:
    """Deterministic episode = one simulated day of 10-minute intervals."""

    def __init__(self, scenario: Scenario, record_trace: bool = False):
        self.scenario = scenario
        self.k = scenario.config.k
        self.horizon = scenario.config.horizon
        self.record_trace = record_trace
        self.learner = _World(self.k)
        self.shadow = _World(self.k)
        self.trace_rows: list[tuple] = []
        self.round_trace_rows: list[tuple] = []   # learner-world bus messages
        self.last_rounds: tuple = ()   # (learner, shadow) rounds of the last step
        self._day: DayData | None = None
        self._n = 0

    @property
    def state_dim(self) -> int:
        return 2 * self.k + 2

    def reset(self, day: int = 0) -> np.ndarray:
        """Load a day's exogenous trajectory and return the interval-0 state.

        Monthly progressive-tier totals persist across episodes and clear at
        each month boundary (day index multiple of days_per_month).
        """
        if day % self.scenario.config.days_per_month == 0:
            self.learner.reset_month()
            self.shadow.reset_month()
        self._day = self.scenario.day(day)
        self._n = 0
        return self._state()

    # -- per-interval quantities ---------------------------------------------

    def _cluster_position(self, c: int, n: int):
        day = self._day
        ev = day.ev_power_kw[c][n]
        charge = ev if ev > 0.0 else 0.0
        discharge = -ev if ev < 0.0 else 0.0
        pw_cluster = day.demand_kw[c][n] + charge
        res = day.res_kw[c][n]
        return pw_cluster, res, discharge

    def baseline_labels(self) -> list[int]:
        """The rule-based labels for the current interval."""
        labels = []
        for c in range(self.k):
            pw_cluster, res, _ = self._cluster_position(c, self._n)
            surplus = res - pw_cluster if res > pw_cluster else 0.0
            deficit = pw_cluster - res if pw_cluster > res else 0.0
            labels.append(baseline_policy(surplus, deficit))
        return labels

    def _state(self) -> np.ndarray:
        n = min(self._n, self.horizon - 1)
        day = self._day
        out = np.empty(2 * self.k + 2)
        month = 0.0
        for c in range(self.k):
            pw_cluster, res, _ = self._cluster_position(c, n)
            out[c] = pw_cluster
            out[self.k + c] = res
            month += self.learner.ledgers[c].month_kwh
        hour = day.hour[n]
        out[2 * self.k] = self.scenario.tariff.effective_dr_rate(hour, month / self.k)
        out[2 * self.k + 1] = day.smp[n]
        return out

    def _run_world(self, world: _World, labels: list[int], n: int) -> list[float]:
        """One interval for one world: orders, trading round, dispatch, cost."""
        day = self._day
        hour = day.hour[n]
        smp = day.smp[n]
        bus = MessageBus(record_trace=self.record_trace and world is self.learner)
        positions = []
        ut_buys = [0.0] * self.k
        ut_sells = [0.0] * self.k

        for c in range(self.k):
            pw_cluster, res, discharge = self._cluster_position(c, n)
            qty_kw = traded_power(labels[c], pw_cluster, res, day.pw_max_kw[c])
            qty_kwh = qty_kw * HOURS_PER_INTERVAL
            sellable = res + discharge - pw_cluster
            sellable_kwh = sellable * HOURS_PER_INTERVAL if sellable > 0.0 else 0.0
            label = labels[c]
            order = None
            if label == BUY_RES and qty_kwh > 0.0:
                order = TradeOrder(c, CONSUMER, qty_kwh, smp)
            elif label == SELL_RES and qty_kwh > 0.0:
                order = TradeOrder(c, PRODUCER, qty_kwh, smp)
            elif label == BUY_UT:
                ut_buys[c] = qty_kwh
            elif label == SELL_UT:
                ut_sells[c] = min(qty_kwh, sellable_kwh)
            if order is None:
                order = TradeOrder(c, IDLE, 0.0, smp)
            positions.append((pw_cluster, res, discharge))
            bus.post_snapshot(ClusterSnapshot(c, pw_cluster, res, order, sellable_kwh), n)

        round_ = run_trading_round(list(range(self.k)), n, smp, bus)
        self.last_rounds = self.last_rounds + (round_,)
        if bus.record_trace:
            self.round_trace_rows.extend(bus.trace_rows)

        costs = []
        for c in range(self.k):
            pw_cluster, res, discharge = positions[c]
            bought_kwh = round_.received_kwh.get(c, 0.0) + ut_buys[c]
            mix = dispatch_sources(pw_cluster, res, discharge,
                                   bought_kwh / HOURS_PER_INTERVAL)
            trades = ChannelTrades(
                res_buy_kwh=round_.received_kwh.get(c, 0.0),
                res_sell_kwh=round_.delivered_kwh.get(c, 0.0),
                ut_buy_kwh=ut_buys[c],
                ut_sell_kwh=ut_sells[c])
            cost = settle_and_cost(world.ledgers[c], hour, mix, trades,
                                   self.scenario.tariff, smp)
            costs.append(cost)
            if self.record_trace and world is self.learner:
                self._trace_pending.append(
                    [n, c, day.demand_kw[c][n], res, day.ev_power_kw[c][n], mix.grid_kw,
                     trades.res_buy_kwh + trades.ut_buy_kwh,
                     trades.res_sell_kwh + trades.ut_sell_kwh, cost])
        return costs

    def step(self, labels: list[int]):
        """Advance one interval; returns (state, rewards, done, info)."""
        if self._day is None:
            raise RuntimeError("call reset() before step()")
        if self._n >= self.horizon:
            raise RuntimeError("episode is done; call reset()")
        if len(labels) != self.k:
            raise ValueError(f"need one action per cluster ({self.k}), got {len(labels)}")
        n = self._n
        self._trace_pending: list[list] = []
        self.last_rounds = ()
        learner_costs = self._run_world(self.learner, list(labels), n)
        shadow_costs = self._run_world(self.shadow, self.baseline_labels(), n)
        rewards = [1 if shadow_costs[c] > learner_costs[c] else -1
                   for c in range(self.k)]
        if self.record_trace:
            for row, c in zip(self._trace_pending, range(self.k)):
                self.trace_rows.append(tuple(row + [shadow_costs[c], rewards[c]]))
        self._n += 1
        done = self._n >= self.horizon
        info = {"cost": learner_costs, "baseline_cost": shadow_costs, "interval": n}
        return self._state(), rewards, done, info
