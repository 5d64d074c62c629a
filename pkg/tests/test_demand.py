import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ridesim.demand import (DemandPredictor, RateProfile, RequestStatus, RideRequest, generate_synthetic, ingest_trips,
                            predict_demand, project_supply, write_trips)
from ridesim.errors import ConfigError
from ridesim.geo import build_grid

DAY = 1440


def test_ingest_example_row():
    g = build_grid(5, 5, 1.0)
    rep = ingest_trips(io.StringIO("0,2020-01-01T00:00:00,1,0,0,4,0\n"), g)
    (r,) = rep.requests
    assert r.passenger_count == 1 and r.origin == g.zone_id(0, 0) and r.destination == g.zone_id(4, 0)
    assert r.request_time == 0.0


def test_ingest_zero_passengers_rejected_and_continues():
    g = build_grid(5, 5, 1.0)
    rep = ingest_trips(io.StringIO("a,0,0,0,0,1,1\nb,1,2,0,0,1,1\n"), g)
    assert [r.id for r in rep.requests] == ["b"]
    assert len(rep.rejects) == 1 and "passenger_count < 1" in rep.rejects[0][2]


def test_ingest_sorts_by_time():
    g = build_grid(5, 5, 1.0)
    text = "id,request_time,passengers,origin_row,origin_col,dest_row,dest_col\n" \
           "x,5,1,0,0,1,1\ny,1,1,0,0,1,1\nz,3,1,0,0,1,1\n"
    assert [r.request_time for r in ingest_trips(io.StringIO(text), g).requests] == [1.0, 3.0, 5.0]


def test_ingest_snaps_out_of_grid():
    g = build_grid(3, 3, 1.0)
    rep = ingest_trips(io.StringIO("a,0,1,-2,1,9,9\n"), g)
    assert rep.snapped == ["a"]
    assert rep.requests[0].origin == g.zone_id(0, 1) and rep.requests[0].destination == g.zone_id(2, 2)


def test_ingest_missing_header_column():
    g = build_grid(3, 3, 1.0)
    with pytest.raises(ConfigError):
        ingest_trips(io.StringIO("id,request_time,passengers\n"), g)


def test_trip_file_round_trip(tmp_path):
    g = build_grid(4, 4, 1.0)
    reqs = generate_synthetic(g, RateProfile(np.full(16, 0.05)), 120, seed=3)
    p = tmp_path / "trips.csv"
    write_trips(p, reqs, g)
    back = ingest_trips(str(p), g).requests
    assert [(r.id, r.request_time, r.origin, r.destination, r.passenger_count) for r in back] == \
           [(r.id, r.request_time, r.origin, r.destination, r.passenger_count) for r in reqs]


def test_status_only_moves_forward():
    r = RideRequest("a", 0.0, 0, 1)
    r.advance(RequestStatus.MATCHED)
    r.advance(RequestStatus.ONBOARD)
    with pytest.raises(ValueError):
        r.reject("late")
    with pytest.raises(ValueError):
        RideRequest("b", 0.0, 0, 1, passenger_count=0)
    assert RideRequest("c", 0.0, 2, 2).degenerate


def test_synthetic_zero_rates_empty():
    g = build_grid(3, 3, 1.0)
    assert generate_synthetic(g, RateProfile(np.zeros(9)), 500, seed=1) == []


def test_synthetic_negative_rate():
    with pytest.raises(ConfigError):
        RateProfile(np.array([1.0, -0.1]))


def test_synthetic_deterministic():
    g = build_grid(3, 3, 1.0)
    prof = RateProfile(np.full(9, 0.3))
    a = generate_synthetic(g, prof, 300, seed=9)
    b = generate_synthetic(g, prof, 300, seed=9)
    assert [(r.request_time, r.origin, r.destination) for r in a] == [(r.request_time, r.origin, r.destination) for r in b]


def test_synthetic_poisson_mean():
    g = build_grid(1, 3, 1.0)
    n = len(generate_synthetic(g, RateProfile(np.array([2.0, 0.0, 0.0])), 1000, seed=4))
    # Poisson(2000): standard error sqrt(2000)
    assert abs(n - 2000) <= 3 * np.sqrt(2000)


def test_synthetic_destinations_differ_from_origin():
    g = build_grid(3, 3, 1.0)
    reqs = generate_synthetic(g, RateProfile(np.full(9, 0.5)), 200, seed=2)
    assert reqs and all(r.origin != r.destination for r in reqs)
    assert all(reqs[i].request_time <= reqs[i + 1].request_time for i in range(len(reqs) - 1))


def at(minute, zone, k=[0]):
    k[0] += 1
    return RideRequest(f"h{k[0]}", minute, zone, (zone + 1) % 4)


def test_predict_mean_of_two_days():
    # 4 then 6 requests in zone 0 during 08:00-08:30 on two prior days
    hist = [at(480 + i, 0) for i in range(4)] + [at(DAY + 480 + i, 0) for i in range(6)]
    f = predict_demand(hist, 2 * DAY + 480, 30, 4, bin_minutes=30)
    assert f.values[:30, 0].sum() == pytest.approx(5.0)
    assert f.values[:30, 0] == pytest.approx(np.full(30, 5.0 / 30))
    assert not f.values[:, 1:].any()


def test_predict_cold_start():
    f = predict_demand([], 10.0, 30, 4)
    assert f.cold_start and not f.values.any() and f.values.shape == (31, 4)


def test_predict_constant_rate():
    hist = [at(float(m), 2) for m in range(2 * DAY)]
    f = predict_demand(hist, 2 * DAY + 100, 30, 4)
    assert f.values[:, 2] == pytest.approx(np.ones(31))


def test_predict_converges_on_stationary_demand():
    g = build_grid(3, 3, 1.0)
    rate = np.linspace(0.05, 0.45, 9)
    hist = generate_synthetic(g, RateProfile(rate), 20 * DAY, seed=11)
    # one 30-minute bin holds only 600 minutes of history, so compare the whole-day forecast
    pred = DemandPredictor(9, 30)
    for r in hist:
        pred.observe(r)
    day = np.array([pred.forecast(20 * DAY + b * 30, 30).values[:30].mean(axis=0) for b in range(48)])
    assert np.all(np.abs(day.mean(axis=0) - rate) <= 0.1 * rate)


class Car:
    def __init__(self, zone, minutes=0.0, exits_at=None):
        self.zone, self.minutes = zone, minutes
        if exits_at is not None:
            self.exits_at = exits_at

    def availability(self, speed):
        return self.zone, self.minutes


def test_supply_idle_vehicle():
    s = project_supply([Car(2)], 0.0, 2, 4, 20.0)
    assert list(s.values[:, 2]) == [1, 1, 1]


def test_supply_busy_vehicle():
    s = project_supply([Car(1, 2.5)], 0.0, 5, 4, 20.0)
    assert list(s.values[:, 1]) == [0, 0, 0, 1, 1, 1]


def test_supply_empty_fleet():
    assert not project_supply([], 0.0, 5, 4, 20.0).values.any()


def test_supply_skips_broken_vehicle():
    class Broken:
        def availability(self, speed):
            raise RuntimeError("corrupt route")
    s = project_supply([Broken(), Car(0)], 0.0, 3, 2, 20.0)
    assert list(s.values[:, 0]) == [1, 1, 1, 1]


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 8), st.floats(0, 40), st.one_of(st.none(), st.floats(0, 40))),
                max_size=20), st.integers(0, 40))
def test_supply_conserves_vehicles(cars, horizon):
    fleet = [Car(z, m, e) for z, m, e in cars]
    s = project_supply(fleet, 0.0, horizon, 9, 20.0)
    assert s.values.shape == (horizon + 1, 9)
    assert (s.values >= 0).all()
    for k in range(horizon + 1):
        expected = sum(1 for c in fleet if np.ceil(c.minutes - 1e-9) <= k
                       and (getattr(c, "exits_at", None) is None or k < np.ceil(c.exits_at - 1e-9)))
        assert s.values[k].sum() == expected
        assert s.values[k].sum() <= len(fleet)
