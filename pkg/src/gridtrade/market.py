"""Per-interval P2P trading: six-stage protocol, pro-rata clearing, settlement.

Each interval every cluster posts a snapshot on an in-process message bus,
then one TradingRound walks the fixed stage sequence (information collection,
registration, routing, scheduling, transmission, settlement). Clearing is
proportional on the long side: when offers exceed bids producers are scaled
pro-rata, otherwise consumers are. All P2P energy settles at the interval's
SMP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

HOURS_PER_INTERVAL = 1.0 / 6.0

STAGES = ("info_collection", "registration", "routing", "scheduling",
          "transmission", "settlement")

PRODUCER, CONSUMER, IDLE = "producer", "consumer", "idle"


class ProtocolError(RuntimeError):
    """A trading stage could not run; names the stage and offending cluster."""

    def __init__(self, stage: str, cluster_id, detail: str):
        super().__init__(f"stage {stage!r}, cluster {cluster_id}: {detail}")
        self.stage = stage
        self.cluster_id = cluster_id


@dataclass(slots=True)
class TradeOrder:
    cluster_id: int
    role: str
    quantity_kwh: float
    price: float  # reference price, SMP at the round's interval

    def __post_init__(self):
        if self.quantity_kwh < 0:
            raise ValueError("order quantity must be non-negative")
        if (self.quantity_kwh > 0) != (self.role != IDLE):
            raise ValueError("positive quantity iff role is producer/consumer")


@dataclass(slots=True)
class ClusterSnapshot:
    """What a cluster publishes before a round.

    order is the explicit trading position when an agent chose one; without
    it the registration stage derives the role from supply vs demand.
    sellable_kwh caps sell orders at energy the cluster physically has.
    """

    cluster_id: int
    demand_kw: float
    supply_kw: float
    order: TradeOrder | None = None
    sellable_kwh: float | None = None


@dataclass(slots=True)
class Trade:
    producer_id: int
    consumer_id: int
    kwh: float


@dataclass(slots=True)
class TradingRound:
    interval: int
    smp: float
    stage_trace: list = field(default_factory=list)
    orders: list = field(default_factory=list)
    trades: list = field(default_factory=list)
    delivered_kwh: dict = field(default_factory=dict)   # producer -> kWh
    received_kwh: dict = field(default_factory=dict)    # consumer -> kWh
    cash_usd: dict = field(default_factory=dict)        # cluster -> signed $


class MessageBus:
    """Single-threaded staged mailbox with an optional trace recorder."""

    def __init__(self, record_trace: bool = False):
        self._mail: dict[str, list] = {}
        self.record_trace = record_trace
        self.trace_rows: list[tuple] = []  # (interval, stage, cluster, type, kwh, usd)

    def publish(self, stage: str, message, *, interval: int = -1,
                cluster_id=None, kwh: float = 0.0, usd: float = 0.0) -> None:
        self._mail.setdefault(stage, []).append(message)
        if self.record_trace:
            self.trace_rows.append(
                (interval, stage, cluster_id, type(message).__name__, kwh, usd))

    def consume(self, stage: str) -> list:
        return self._mail.pop(stage, [])

    def post_snapshot(self, snapshot: ClusterSnapshot, interval: int) -> None:
        self.publish("info_collection", snapshot, interval=interval,
                     cluster_id=snapshot.cluster_id, kwh=0.0, usd=0.0)


def classify_roles(clusters: list[tuple[float, float]],
                   reference_price: float = 0.0) -> list[TradeOrder]:
    """(supply kW, demand kW) per cluster -> one order per cluster.

    A surplus makes a producer, a deficit a consumer, balance stays idle;
    quantities are the imbalance over one 10-minute interval.
    """
    orders = []
    for cid, (supply, demand) in enumerate(clusters):
        if supply < 0 or demand < 0:
            raise ValueError(f"cluster {cid}: supply/demand must be non-negative")
        gap = supply - demand
        if gap > 0:
            orders.append(TradeOrder(cid, PRODUCER, gap * HOURS_PER_INTERVAL, reference_price))
        elif gap < 0:
            orders.append(TradeOrder(cid, CONSUMER, -gap * HOURS_PER_INTERVAL, reference_price))
        else:
            orders.append(TradeOrder(cid, IDLE, 0.0, reference_price))
    return orders


def allocate_proportional(producers: list[TradeOrder], consumers: list[TradeOrder]
                          ) -> tuple[dict, dict, list[Trade]]:
    """Pro-rata clearing of the short side's counterpart.

    Traded total T = min(sum offers, sum bids). With surplus supply every
    consumer is served in full and producer i delivers T * q_i / S; with
    short supply producers dispatch fully and consumer j gets T * q_j / D.
    Pairwise trades attribute the totals greedily in cluster-id order.
    """
    supply = sum(o.quantity_kwh for o in producers)
    demand = sum(o.quantity_kwh for o in consumers)
    traded = min(supply, demand)
    if traded <= 0.0 or not producers or not consumers:
        return {o.cluster_id: 0.0 for o in producers}, \
               {o.cluster_id: 0.0 for o in consumers}, []

    if supply >= demand:
        delivered = {o.cluster_id: traded * o.quantity_kwh / supply for o in producers}
        received = {o.cluster_id: o.quantity_kwh for o in consumers}
    else:
        delivered = {o.cluster_id: o.quantity_kwh for o in producers}
        received = {o.cluster_id: traded * o.quantity_kwh / demand for o in consumers}

    trades = _pair_trades(
        sorted(delivered.items()), sorted(received.items()))
    return delivered, received, trades


def _pair_trades(deliveries: list[tuple[int, float]],
                 receipts: list[tuple[int, float]]) -> list[Trade]:
    trades = []
    i = j = 0
    rem_d = deliveries[0][1] if deliveries else 0.0
    rem_r = receipts[0][1] if receipts else 0.0
    eps = 1e-12
    while i < len(deliveries) and j < len(receipts):
        amount = min(rem_d, rem_r)
        if amount > eps:
            trades.append(Trade(deliveries[i][0], receipts[j][0], amount))
        rem_d -= amount
        rem_r -= amount
        if rem_d <= eps:
            i += 1
            rem_d = deliveries[i][1] if i < len(deliveries) else 0.0
        if rem_r <= eps:
            j += 1
            rem_r = receipts[j][1] if j < len(receipts) else 0.0
    return trades


def run_trading_round(cluster_ids: list[int], interval: int, smp: float,
                      bus: MessageBus) -> TradingRound:
    """Execute the six stages over the snapshots already posted on the bus."""
    round_ = TradingRound(interval=interval, smp=smp)

    # 1. information collection: gather posted snapshots
    round_.stage_trace.append("info_collection")
    snapshots = {s.cluster_id: s for s in bus.consume("info_collection")}

    # 2. registration: every expected cluster must have reported
    round_.stage_trace.append("registration")
    for cid in cluster_ids:
        if cid not in snapshots:
            raise ProtocolError("registration", cid, "no snapshot posted for this interval")
    for cid in cluster_ids:
        snap = snapshots[cid]
        order = snap.order
        if order is None:
            order = classify_roles([(snap.supply_kw, snap.demand_kw)], smp)[0]
            order.cluster_id = cid
        if order.role == PRODUCER and snap.sellable_kwh is not None \
                and order.quantity_kwh > snap.sellable_kwh:
            qty = max(0.0, snap.sellable_kwh)
            order = TradeOrder(cid, PRODUCER if qty > 0 else IDLE, qty, order.price)
        round_.orders.append(order)
        bus.publish("registration", order, interval=interval, cluster_id=cid,
                    kwh=order.quantity_kwh)

    # 3. routing: producers' packets are announced to consumers
    round_.stage_trace.append("routing")
    producers = [o for o in bus.consume("registration") if o.role == PRODUCER]
    consumers = [o for o in round_.orders if o.role == CONSUMER]
    for o in producers:
        bus.publish("routing", o, interval=interval, cluster_id=o.cluster_id,
                    kwh=o.quantity_kwh)

    # 4. scheduling: the trading plan (pro-rata allocation)
    round_.stage_trace.append("scheduling")
    delivered, received, trades = allocate_proportional(
        [o for o in bus.consume("routing")], consumers)
    round_.delivered_kwh = delivered
    round_.received_kwh = received
    round_.trades = trades
    for t in trades:
        bus.publish("scheduling", t, interval=interval, cluster_id=t.producer_id,
                    kwh=t.kwh)

    # 5. transmission: move the scheduled packets
    round_.stage_trace.append("transmission")
    for t in bus.consume("scheduling"):
        bus.publish("transmission", t, interval=interval, cluster_id=t.consumer_id,
                    kwh=t.kwh)
    bus.consume("transmission")

    # 6. settlement: cash at SMP, zero-sum across the round
    round_.stage_trace.append("settlement")
    for cid in cluster_ids:
        cash = smp * delivered.get(cid, 0.0) - smp * received.get(cid, 0.0)
        round_.cash_usd[cid] = cash
        bus.publish("settlement", round_, interval=interval, cluster_id=cid, usd=cash)
    bus.consume("settlement")
    return round_


# ---------------------------------------------------------------------------
# cost accounting (per cluster)


@dataclass(slots=True)
class ChannelTrades:
    """Energy a cluster moved this interval, split by trading channel."""

    res_buy_kwh: float = 0.0
    res_sell_kwh: float = 0.0
    ut_buy_kwh: float = 0.0
    ut_sell_kwh: float = 0.0


@dataclass
class ClusterCostLedger:
    """Running cost components and the month-to-date consumption total."""

    month_kwh: float = 0.0
    grid_load_usd: float = 0.0
    res_load_usd: float = 0.0
    grid_p2p_usd: float = 0.0
    res_p2p_usd: float = 0.0

    def reset_month(self) -> None:
        self.month_kwh = 0.0

    @property
    def total_usd(self) -> float:
        return (self.grid_load_usd + self.res_load_usd
                + self.grid_p2p_usd + self.res_p2p_usd)


def settle_and_cost(ledger: ClusterCostLedger, hour: float, mix, trades: ChannelTrades,
                    tariff, smp: float, dt_h: float = HOURS_PER_INTERVAL,
                    literal_action_multiplier: bool = False) -> float:
    """One cluster's interval electricity cost.

    Grid-served load is billed at the composite DR rate, renewable-served
    load at SMP, utility-channel trades at DR and P2P trades at SMP; sales
    enter with a negative sign. The action labels named +/-2 on the utility
    channel are identifiers, not multipliers, unless the literal flag is set.
    """
    dr = tariff.effective_dr_rate(hour, ledger.month_kwh)
    ut_factor = 2.0 if literal_action_multiplier else 1.0

    grid_load = mix.grid_kw * dt_h * dr
    res_load = mix.res_kw * dt_h * smp
    grid_p2p = (trades.ut_buy_kwh - trades.ut_sell_kwh) * ut_factor * dr
    res_p2p = (trades.res_buy_kwh - trades.res_sell_kwh) * smp

    ledger.grid_load_usd += grid_load
    ledger.res_load_usd += res_load
    ledger.grid_p2p_usd += grid_p2p
    ledger.res_p2p_usd += res_p2p
    ledger.month_kwh += mix.served_kw * dt_h
    return grid_load + res_load + grid_p2p + res_p2p
