from fractions import Fraction
from itertools import product

import pytest

from gridtrade.market import (HOURS_PER_INTERVAL, STAGES, ChannelTrades,
                              ClusterCostLedger, ClusterSnapshot, MessageBus,
                              ProtocolError, TradeOrder, allocate_proportional,
                              classify_roles, run_trading_round, settle_and_cost)
from gridtrade.scheduler import SourceMix
from gridtrade.tariff import TariffSchedule

FLAT_TARIFF = TariffSchedule(
    tou_bands=((0.0, 24.0, 0.10),),
    progressive_tiers=((None, 0.0),),
    ccec_components=(0.0, 0.0, 0.0),
    smp_hours=(0.0,), smp_rates=(0.08,))


def test_classify_roles():
    orders = classify_roles([(5.0, 3.0), (3.0, 5.0), (4.0, 4.0)])
    assert orders[0].role == "producer"
    assert orders[0].quantity_kwh == pytest.approx(2.0 * HOURS_PER_INTERVAL, abs=1e-15)
    assert orders[1].role == "consumer"
    assert orders[1].quantity_kwh == pytest.approx(2.0 * HOURS_PER_INTERVAL, abs=1e-15)
    assert orders[2].role == "idle" and orders[2].quantity_kwh == 0.0
    with pytest.raises(ValueError):
        classify_roles([(-1.0, 0.0)])


def test_trade_order_role_quantity_consistency():
    with pytest.raises(ValueError):
        TradeOrder(0, "idle", 2.0, 0.1)
    with pytest.raises(ValueError):
        TradeOrder(0, "producer", 0.0, 0.1)
    with pytest.raises(ValueError):
        TradeOrder(0, "producer", -1.0, 0.1)


def producers(*qty):
    return [TradeOrder(i, "producer", q, 0.1) for i, q in enumerate(qty)]


def consumers(*qty):
    return [TradeOrder(100 + i, "consumer", q, 0.1) for i, q in enumerate(qty)]


def test_allocation_supply_rich():
    delivered, received, trades = allocate_proportional(producers(6.0, 4.0),
                                                        consumers(3.0, 2.0))
    assert delivered[0] == pytest.approx(3.0, abs=1e-12)
    assert delivered[1] == pytest.approx(2.0, abs=1e-12)
    assert received[100] == 3.0 and received[101] == 2.0


def test_allocation_supply_short():
    delivered, received, trades = allocate_proportional(producers(4.0),
                                                        consumers(6.0, 2.0))
    assert delivered[0] == 4.0
    assert received[100] == pytest.approx(3.0, abs=1e-12)
    assert received[101] == pytest.approx(1.0, abs=1e-12)


def test_allocation_empty_sides():
    delivered, received, trades = allocate_proportional([], consumers(5.0))
    assert trades == [] and received == {100: 0.0}
    delivered, received, trades = allocate_proportional(producers(5.0), [])
    assert trades == [] and delivered == {0: 0.0}


def test_allocation_proportionality_invariant():
    orders_p = producers(7.3, 2.9, 11.8)
    orders_c = consumers(1.7, 3.1)
    delivered, _, _ = allocate_proportional(orders_p, orders_c)
    shares = [delivered[o.cluster_id] / o.quantity_kwh for o in orders_p]
    assert max(shares) - min(shares) < 1e-12


def waterfill_oracle(supply_qty, demand_qty):
    """Independent allocation: raise a common fill fraction on the long side."""
    s = sum(supply_qty)
    d = sum(demand_qty)
    if s == 0 or d == 0:
        return [Fraction(0)] * len(supply_qty), [Fraction(0)] * len(demand_qty)
    if s >= d:
        fill = Fraction(d, s)
        return [q * fill for q in supply_qty], [Fraction(q) for q in demand_qty]
    fill = Fraction(s, d)
    return [Fraction(q) for q in supply_qty], [q * fill for q in demand_qty]


def test_allocation_agrees_with_waterfill_oracle():
    """Exact match on ~1e4 integer instances (quantities in deci-kWh units)."""
    quantities = (1, 7, 23, 50)
    checked = 0
    for np_, nc in product((1, 2, 3), repeat=2):
        for sq in product(quantities, repeat=np_):
            for dq in product(quantities, repeat=nc):
                delivered, received, trades = allocate_proportional(
                    [TradeOrder(i, "producer", float(q), 0.1) for i, q in enumerate(sq)],
                    [TradeOrder(50 + j, "consumer", float(q), 0.1) for j, q in enumerate(dq)])
                exp_s, exp_d = waterfill_oracle(sq, dq)
                for i in range(np_):
                    assert delivered[i] == float(exp_s[i])
                for j in range(nc):
                    assert received[50 + j] == float(exp_d[j])
                assert abs(sum(t.kwh for t in trades) - float(min(sum(sq), sum(dq)))) < 1e-9
                checked += 1
    assert checked == 84 * 84


def post_all(bus, snaps, interval=0):
    for s in snaps:
        bus.post_snapshot(s, interval)


def test_round_happy_path_stage_trace():
    bus = MessageBus()
    post_all(bus, [ClusterSnapshot(0, 2.0, 5.0), ClusterSnapshot(1, 5.0, 2.0)])
    round_ = run_trading_round([0, 1], 0, 0.08, bus)
    assert tuple(round_.stage_trace) == STAGES
    assert len(round_.trades) == 1
    trade = round_.trades[0]
    assert trade.producer_id == 0 and trade.consumer_id == 1
    assert trade.kwh == pytest.approx(3.0 * HOURS_PER_INTERVAL, abs=1e-12)


def test_round_all_idle_still_traverses_stages():
    bus = MessageBus()
    post_all(bus, [ClusterSnapshot(c, 3.0, 3.0) for c in range(4)])
    round_ = run_trading_round(list(range(4)), 0, 0.08, bus)
    assert tuple(round_.stage_trace) == STAGES
    assert round_.trades == []
    assert all(v == 0.0 for v in round_.cash_usd.values())


def test_round_missing_snapshot_aborts_at_registration():
    bus = MessageBus()
    post_all(bus, [ClusterSnapshot(c, 3.0, 3.0) for c in (0, 1, 2)])
    with pytest.raises(ProtocolError) as err:
        run_trading_round([0, 1, 2, 3], 0, 0.08, bus)
    assert err.value.stage == "registration"
    assert err.value.cluster_id == 3


def test_round_sell_clamped_to_available_energy():
    bus = MessageBus()
    big_offer = TradeOrder(0, "producer", 10.0, 0.08)
    post_all(bus, [ClusterSnapshot(0, 2.0, 3.0, order=big_offer, sellable_kwh=0.5),
                   ClusterSnapshot(1, 5.0, 1.0, order=TradeOrder(1, "consumer", 2.0, 0.08))])
    round_ = run_trading_round([0, 1], 0, 0.08, bus)
    assert round_.orders[0].quantity_kwh == 0.5
    assert round_.delivered_kwh[0] == pytest.approx(0.5, abs=1e-12)


def test_round_energy_and_cash_conservation():
    bus = MessageBus()
    post_all(bus, [ClusterSnapshot(0, 1.0, 9.0), ClusterSnapshot(1, 2.0, 6.0),
                   ClusterSnapshot(2, 8.0, 1.0), ClusterSnapshot(3, 7.0, 2.0)])
    round_ = run_trading_round([0, 1, 2, 3], 0, 0.08, bus)
    assert abs(sum(round_.delivered_kwh.values()) - sum(round_.received_kwh.values())) < 1e-9
    assert abs(sum(round_.cash_usd.values())) < 1e-9


def test_bus_trace_rows():
    bus = MessageBus(record_trace=True)
    post_all(bus, [ClusterSnapshot(0, 2.0, 5.0), ClusterSnapshot(1, 5.0, 2.0)], interval=7)
    run_trading_round([0, 1], 7, 0.08, bus)
    stages_seen = {row[1] for row in bus.trace_rows}
    assert "info_collection" in stages_seen and "settlement" in stages_seen
    assert all(row[0] == 7 for row in bus.trace_rows)


# -- settlement ----------------------------------------------------------------


def test_settle_example_costs():
    ledger = ClusterCostLedger()
    mix = SourceMix(res_kw=1.0, grid_kw=2.0)
    trades = ChannelTrades(res_buy_kwh=1.0)
    cost = settle_and_cost(ledger, 12.0, mix, trades, FLAT_TARIFF, smp=0.08, dt_h=1.0)
    assert cost == pytest.approx(2 * 0.10 + 1 * 0.08 + 1 * 0.08, abs=1e-12)


def test_settle_sell_is_revenue():
    ledger = ClusterCostLedger()
    cost = settle_and_cost(ledger, 12.0, SourceMix(), ChannelTrades(res_sell_kwh=1.0),
                           FLAT_TARIFF, smp=0.08, dt_h=1.0)
    assert cost == pytest.approx(-0.08, abs=1e-15)


def test_settle_nothing_is_free():
    ledger = ClusterCostLedger()
    assert settle_and_cost(ledger, 5.0, SourceMix(), ChannelTrades(),
                           FLAT_TARIFF, smp=0.08) == 0.0


def test_settle_accumulates_monthly_energy():
    ledger = ClusterCostLedger()
    mix = SourceMix(grid_kw=6.0)
    settle_and_cost(ledger, 2.0, mix, ChannelTrades(), FLAT_TARIFF, smp=0.08)
    settle_and_cost(ledger, 2.5, mix, ChannelTrades(), FLAT_TARIFF, smp=0.08)
    assert ledger.month_kwh == pytest.approx(2.0, abs=1e-12)
    ledger.reset_month()
    assert ledger.month_kwh == 0.0
    assert ledger.total_usd > 0.0


def test_settle_literal_action_multiplier():
    ledger = ClusterCostLedger()
    trades = ChannelTrades(ut_buy_kwh=1.0)
    cost = settle_and_cost(ledger, 12.0, SourceMix(), trades, FLAT_TARIFF,
                           smp=0.08, literal_action_multiplier=True)
    assert cost == pytest.approx(2.0 * 0.10, abs=1e-15)


def test_settle_progressive_tier_from_ledger():
    tariff = TariffSchedule(tou_bands=((0.0, 24.0, 0.10),),
                            smp_hours=(0.0,), smp_rates=(0.08,))
    ledger = ClusterCostLedger(month_kwh=500.0)
    mix = SourceMix(grid_kw=1.0)
    cost = settle_and_cost(ledger, 12.0, mix, ChannelTrades(), tariff, smp=0.08, dt_h=1.0)
    assert cost == pytest.approx(0.10 + 0.027 + sum(tariff.ccec_components), abs=1e-12)
