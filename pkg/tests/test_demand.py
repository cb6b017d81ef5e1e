import numpy as np
import pytest

from gridtrade.demand import (Appliance, LoadRequest, OccupantChain, cluster_demand,
                              default_usage_probs, draw_load_requests,
                              load_appliance_catalog, step_occupant)


@pytest.fixture(scope="module")
def catalog():
    return load_appliance_catalog()


def test_bundled_catalog_inventory(catalog):
    assert len(catalog) == 12
    by_name = {a.name: a for a in catalog}
    tv = by_name["tv"]
    assert tv.power_kw == 0.13 and tv.rooms == (2,) and not tv.schedulable
    assert by_name["air_conditioner"].rooms == (1, 2, 3, 4)
    assert by_name["air_conditioner"].power_kw == 1.21
    assert by_name["heater"].power_kw == 1.16
    assert by_name["washing_machine"].schedulable
    schedulable = {a.name for a in catalog if a.schedulable}
    assert schedulable == {"audio", "washing_machine", "vacuum_cleaner", "iron",
                           "microwave_oven", "rice_cooker", "hair_dryer"}


def test_catalog_rejects_missing_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("name,power_kw\nfoo,1.0\n")
    with pytest.raises(ValueError):
        load_appliance_catalog(p)


def test_appliance_validation():
    with pytest.raises(ValueError):
        Appliance("x", -1.0, (1,), False)
    with pytest.raises(ValueError):
        Appliance("x", 1.0, (5,), False)
    with pytest.raises(ValueError):
        LoadRequest(Appliance("x", 1.0, (1,), True), 3, 0)


def test_chain_validation():
    with pytest.raises(ValueError):
        OccupantChain(transition=np.full((4, 4), 0.3))
    with pytest.raises(ValueError):
        OccupantChain(transition=-np.eye(4) + 0.5)
    with pytest.raises(ValueError):
        OccupantChain(usage_prob={"tv": 1.5})


def test_step_occupant_absorbing():
    chain = OccupantChain(transition=np.eye(4))
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert step_occupant(2, chain, rng) == 2


def test_step_occupant_degenerate_row():
    transition = np.zeros((4, 4))
    transition[:, 0] = 1.0
    chain = OccupantChain(transition=transition)
    rng = np.random.default_rng(7)
    assert all(step_occupant(r, chain, rng) == 1 for r in (1, 2, 3, 4))


def test_step_occupant_seeded_replay():
    chain = OccupantChain()
    walk = []
    for trial in range(2):
        rng = np.random.default_rng(42)
        room = 1
        path = []
        for _ in range(1000):
            room = step_occupant(room, chain, rng)
            path.append(room)
        walk.append(path)
    assert walk[0] == walk[1]


def test_lumped_two_state_stationary_frequency():
    """Room 1 vs rooms {2,3,4} lumps to a 2-state chain; empirical visit
    frequency over 1e5 steps must match the analytic stationary vector."""
    chain = OccupantChain(stay_prob=0.7)
    # lumped transition: stay in room 1 with 0.7, enter room 1 from others with 0.1
    lumped = np.array([[0.7, 0.3], [0.1, 0.9]])
    eigvals, eigvecs = np.linalg.eig(lumped.T)
    statio = np.real(eigvecs[:, np.argmax(np.real(eigvals))])
    statio = statio / statio.sum()

    rng = np.random.default_rng(2024)
    room, hits = 1, 0
    n = 100_000
    for _ in range(n):
        room = step_occupant(room, chain, rng)
        hits += room == 1
    assert abs(hits / n - statio[0]) < 0.02
    assert abs((1 - hits / n) - statio[1]) < 0.02


def test_draw_requests_room_gating(catalog):
    chain = OccupantChain(usage_prob={a.name: 0.0 for a in catalog})
    rng = np.random.default_rng(0)
    assert draw_load_requests(2, chain, catalog, 5, rng) == []

    tv_only = OccupantChain(usage_prob={a.name: (1.0 if a.name == "tv" else 0.0)
                                        for a in catalog})
    reqs = draw_load_requests(2, OccupantChain(usage_prob=tv_only.usage_prob),
                              catalog, 5, rng)
    assert len(reqs) == 1
    assert reqs[0].appliance.name == "tv"
    assert reqs[0].appliance.power_kw == 0.13
    assert reqs[0].interval == 5

    vacuum_on = OccupantChain(usage_prob={a.name: (1.0 if a.name == "vacuum_cleaner" else 0.0)
                                          for a in catalog})
    assert draw_load_requests(1, vacuum_on, catalog, 0, rng) == []  # occupant elsewhere


def test_hvac_reachable_from_every_room(catalog):
    chain = OccupantChain(usage_prob={a.name: (1.0 if a.name == "heater" else 0.0)
                                      for a in catalog})
    rng = np.random.default_rng(1)
    for room in (1, 2, 3, 4):
        names = [r.appliance.name for r in draw_load_requests(room, chain, catalog, 0, rng)]
        assert names == ["heater"]


def test_request_stream_deterministic(catalog):
    chain = OccupantChain()
    streams = []
    for _ in range(2):
        rng = np.random.default_rng(99)
        out = []
        for n in range(500):
            for r in draw_load_requests(1 + n % 4, chain, catalog, n, rng):
                out.append((r.appliance.name, r.interval, r.duration))
        streams.append(out)
    assert streams[0] == streams[1]


def test_default_usage_probs(catalog):
    probs = default_usage_probs(catalog)
    assert probs["heater"] == 0.15
    assert probs["tv"] == 0.10
    assert probs["rice_cooker"] == 0.05
    assert probs["iron"] == 0.03


def test_cluster_demand():
    assert cluster_demand([1.21, 0.13, 0.0]) == pytest.approx(1.34, abs=1e-12)
    assert cluster_demand([]) == 0.0
    assert cluster_demand([1.21 + 1.16]) == pytest.approx(2.37, abs=1e-12)
    with pytest.raises(ValueError):
        cluster_demand([1.0, -0.2])
