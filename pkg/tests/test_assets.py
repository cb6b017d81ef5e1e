import numpy as np
import pytest

from gridtrade.assets import (AssetError, ElectricVehicle, GenerationProfile,
                              ev_apply, ev_decide, load_generation_csv, synth_pv,
                              synth_wind, wind_power_curve)
from gridtrade.tariff import default_tariff


def test_pv_dark_hours_zero():
    rng = np.random.default_rng(0)
    series = synth_pv(5.0, 100, rng)
    assert series[0] == 0.0 and series[-1] == 0.0      # midnight-adjacent
    assert all(v == 0.0 for v in series[:30])          # before sunrise


def test_pv_peak_near_capacity_with_clear_sky():
    rng = np.random.default_rng(0)
    series = synth_pv(5.0, 100, rng, cloud_mean=1.0, cloud_sigma=0.0, seasonal_swing=0.0)
    assert max(series) == pytest.approx(5.0, rel=1e-3)
    assert np.argmax(series) in (71, 72)               # interval straddling noon


def test_pv_zero_capacity():
    rng = np.random.default_rng(0)
    assert synth_pv(0.0, 50, rng) == [0.0] * 144


def test_pv_nonnegative_all_seeds():
    for seed in range(5):
        series = synth_pv(4.0, seed * 30, np.random.default_rng(seed))
        assert all(v >= 0.0 for v in series)


def test_wind_power_curve_segments():
    assert wind_power_curve(2.0, 10.0) == 0.0
    assert wind_power_curve(12.0, 10.0) == 10.0
    assert wind_power_curve(20.0, 10.0) == 10.0
    assert wind_power_curve(30.0, 10.0) == 0.0
    v = 7.0
    expected = 10.0 * (v**3 - 27.0) / (12.0**3 - 27.0)
    assert wind_power_curve(v, 10.0) == pytest.approx(expected, abs=1e-12)


def test_wind_series_bounds():
    series = synth_wind(6.0, 2.0, 7.0, np.random.default_rng(3))
    assert len(series) == 144
    assert all(0.0 <= v <= 6.0 for v in series)
    with pytest.raises(AssetError):
        synth_wind(6.0, -1.0, 7.0, np.random.default_rng(0))


def test_generation_profile_validation():
    with pytest.raises(AssetError):
        GenerationProfile(wind_kw=[[1.0]], pv_kw=[[1.0, 2.0]])
    with pytest.raises(AssetError):
        GenerationProfile(wind_kw=[[-1.0]], pv_kw=[[0.0]])
    profile = GenerationProfile(wind_kw=[[1.0, 2.0]], pv_kw=[[0.5, 0.0]])
    assert profile.total(0, 0) == 1.5


def test_generation_csv_roundtrip(tmp_path):
    p = tmp_path / "gen.csv"
    p.write_text("interval,cluster_id,wind_kw,pv_kw\n0,0,1.5,0.5\n1,0,2.0,0.0\n"
                 "0,1,0.0,3.0\n1,1,0.0,1.0\n")
    profile = load_generation_csv(p, 2)
    assert profile.wind_kw[0] == [1.5, 2.0]
    assert profile.pv_kw[1] == [3.0, 1.0]
    with pytest.raises(AssetError):
        load_generation_csv(p, 1)   # cluster id out of range


# -- EV ----------------------------------------------------------------------


def make_ev(**kw):
    return ElectricVehicle(**kw)


def test_ev_decide_charges_on_surplus():
    ev = make_ev(soc=0.5)
    tariff = default_tariff()
    assert ev_decide(3.0, 0.0, 20.0, ev, tariff) == 3.0
    ev_big = make_ev(soc=0.5, max_charge_kw=7.0)
    assert ev_decide(10.0, 0.0, 20.0, ev_big, tariff) == 7.0


def test_ev_decide_discharges_into_peak_deficit():
    ev = make_ev(soc=0.5)
    tariff = default_tariff()
    assert ev_decide(0.0, 2.0, 20.0, ev, tariff) == -2.0    # mid-peak
    assert ev_decide(0.0, 2.0, 11.0, ev, tariff) == 0.0     # parked away by day
    ev_home = make_ev(soc=0.5, available_from=0.0, available_until=24.0)
    assert ev_decide(0.0, 2.0, 11.0, ev_home, tariff) == -2.0  # on-peak
    assert ev_decide(0.0, 2.0, 3.0, ev_home, tariff) == 0.0    # off-peak: hold


def test_ev_decide_respects_soc_bounds():
    tariff = default_tariff()
    full = make_ev(soc=0.9)
    assert ev_decide(5.0, 0.0, 20.0, full, tariff) == 0.0
    empty = make_ev(soc=0.2)
    assert ev_decide(0.0, 5.0, 20.0, empty, tariff) == 0.0


def test_ev_apply_charge_arithmetic():
    ev = make_ev(capacity_kwh=40.0, soc=0.5, efficiency=0.95)
    soc = ev_apply(ev, 6.0, 1.0 / 6.0)
    assert soc == pytest.approx(0.5 + 6.0 * (1.0 / 6.0) * 0.95 / 40.0, abs=1e-15)


def test_ev_apply_zero_power_noop():
    ev = make_ev(soc=0.4)
    assert ev_apply(ev, 0.0, 1.0) == 0.4


def test_ev_apply_rejects_bound_violation():
    ev = make_ev(soc=0.21)
    with pytest.raises(AssetError):
        ev_apply(ev, -7.0, 1.0)
    ev2 = make_ev(soc=0.5)
    with pytest.raises(AssetError):
        ev_apply(ev2, 9.0, 0.1)   # above the charge limit


def test_round_trip_efficiency():
    eta = 0.95
    ev = make_ev(capacity_kwh=40.0, soc=0.5, efficiency=eta)
    ev_apply(ev, 4.0, 1.0)                 # put 4 kWh in at the terminals
    stored_gain = 4.0 * eta
    deliverable = stored_gain * eta        # E * eta^2 back out
    ev_apply(ev, -deliverable, 1.0)
    assert ev.soc == pytest.approx(0.5, abs=1e-12)


def test_ev_availability_window_wraps():
    ev = make_ev(available_from=18.0, available_until=8.0)
    assert ev.available_at(23.0) and ev.available_at(2.0)
    assert not ev.available_at(12.0)
    day_ev = make_ev(available_from=8.0, available_until=18.0)
    assert day_ev.available_at(12.0) and not day_ev.available_at(20.0)


def test_soc_stays_in_bounds_over_month():
    """Rule-driven EV over 30 synthetic days never leaves its soc window."""
    tariff = default_tariff()
    ev = make_ev(soc=0.55, available_from=15.0, available_until=9.0)
    rng = np.random.default_rng(11)
    for day in range(30):
        pv = synth_pv(6.0, day, rng)
        for n in range(144):
            hour = (n + 0.5) / 6.0
            demand = 2.0 + float(rng.random())
            surplus = max(0.0, pv[n] - demand)
            deficit = max(0.0, demand - pv[n])
            power = ev_decide(surplus, deficit, hour, ev, tariff)
            if power > 0:
                power = min(power, ev.charge_headroom_kw(1 / 6))
            elif power < 0:
                power = -min(-power, ev.discharge_headroom_kw(1 / 6))
            if power:
                ev_apply(ev, power, 1 / 6)
            assert ev.soc_min - 1e-12 <= ev.soc <= ev.soc_max + 1e-12
