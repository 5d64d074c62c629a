import numpy as np
import pytest
from hypothesis import given, strategies as st

from ridesim.demand import DemandForecast, SupplyForecast
from ridesim.dispatch import (N_ACTIONS, STAY, AgentConfig, QFunction, RewardBreakdown, action_index,
                              action_offset, action_to_zone, build_model, compute_reward, encode_state,
                              schedule, select_action)
from ridesim.dispatch.network import CONV_CROP
from ridesim.errors import ConfigError, DomainError
from ridesim.geo import build_grid


def forecasts(grid, horizon=30):
    d = DemandForecast(np.zeros((horizon + 1, grid.n_zones)), 0.0)
    s = SupplyForecast(np.zeros((horizon + 1, grid.n_zones)), 0.0)
    return d, s


def test_encode_all_zero():
    g = build_grid(6, 7, 1.0)
    st_ = encode_state(*forecasts(g), 3, g)
    assert st_.planes.shape == (4, 6, 7)
    assert not st_.planes.any()


def test_encode_single_demand_zone():
    g = build_grid(6, 7, 1.0)
    d, s = forecasts(g)
    d.values[5, 10] = 1.0
    p = encode_state(d, s, 0, g).planes
    assert p[0].reshape(-1)[10] == 1.0
    assert np.count_nonzero(p[0]) == 1


def test_encode_idle_vehicle_supply():
    from ridesim.demand import project_supply

    class Idle:
        def availability(self, speed):
            return 4, 0.0

    g = build_grid(3, 3, 1.0)
    d, _ = forecasts(g)
    s = project_supply([Idle()], 0.0, 30, g.n_zones, 20.0)
    p = encode_state(d, s, 4, g).planes
    assert p[1].reshape(-1)[4] >= 1


def test_encode_short_horizon():
    g = build_grid(3, 3, 1.0)
    with pytest.raises(DomainError):
        encode_state(*forecasts(g, 20), 0, g)


def test_action_grid():
    assert N_ACTIONS == 225
    assert action_index(0, 0) == STAY
    assert action_offset(action_index(3, -2)) == (3, -2)
    with pytest.raises(DomainError):
        action_index(8, 0)


def test_action_to_zone_examples():
    g = build_grid(43, 44, 0.8)
    assert action_to_zone(g, g.zone_id(5, 5), STAY) == g.zone_id(5, 5)
    assert action_to_zone(g, g.zone_id(0, 0), action_index(-7, -7)) == g.zone_id(0, 0)
    # row +3, column -2
    assert action_to_zone(g, g.zone_id(10, 10), action_index(-2, 3)) == g.zone_id(13, 8)


@given(st.integers(0, 42), st.integers(0, 43), st.integers(0, N_ACTIONS - 1))
def test_action_targets_within_reach(r, c, a):
    g = build_grid(43, 44, 0.8)
    t = action_to_zone(g, g.zone_id(r, c), a)
    tr, tc = g.coords(t)
    assert 0 <= tr < 43 and 0 <= tc < 44
    assert abs(tr - r) <= 7 and abs(tc - c) <= 7


def test_forward_zero_state_zero_output():
    for profile, crop in (("compact", 19), ("conv", CONV_CROP)):
        m = build_model(profile, 0, crop)
        q = m.forward(np.zeros((2, 4, m.crop, m.crop)))
        assert q.shape == (2, N_ACTIONS)
        assert not q.any()


def test_forward_deterministic():
    m = build_model("compact", 3, 19)
    m.params["w2"] = np.random.default_rng(0).normal(size=m.params["w2"].shape)
    x = np.random.default_rng(1).uniform(0, 3, size=(1, 4, 19, 19))
    assert np.array_equal(m.forward(x), m.forward(x))


def test_select_action_examples():
    rng = np.random.default_rng(0)
    q = np.zeros(N_ACTIONS)
    q[7] = 1.0
    assert select_action(q, 0.0, rng) == 7
    q[3] = q[9] = 2.0
    assert select_action(q, 0.0, rng) == 3
    with pytest.raises(ConfigError):
        select_action(q, 1.5, rng)


def test_select_action_uniform_at_full_exploration():
    rng = np.random.default_rng(2024)
    q = np.arange(N_ACTIONS, dtype=float)
    n = 100_000
    counts = np.bincount([select_action(q, 1.0, rng) for _ in range(n)], minlength=N_ACTIONS)
    expected = n / N_ACTIONS
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 224 degrees of freedom: mean 224, sd about 21; 5 sd above the mean
    assert chi2 < 224 + 5 * np.sqrt(2 * 224)


def test_schedule_examples():
    assert schedule(0, 1.0, 0.1, 1000) == 1.0
    assert abs(schedule(500, 1.0, 0.1, 1000) - 0.55) < 1e-12
    assert schedule(20000, 0.1, 0.001, 10000) == 0.001
    with pytest.raises(ConfigError):
        schedule(0, 1, 0, 0)


def test_reward_example():
    b = RewardBreakdown(served=2, dispatch_minutes=3, extra_delay=1, activations=1)
    assert compute_reward(b, (10, 1, 5, 12, 8), profit=13.75) == 169.0


def test_reward_zero_and_profit_from_fuel():
    assert compute_reward(RewardBreakdown()) == 0.0
    b = RewardBreakdown(earnings=10.0, distance=20.0, mileage=10.0, gas_price=1.5)
    assert b.profit == 7.0
    assert compute_reward(b) == 12 * 7.0


def tabular(lr=0.1):
    return QFunction(AgentConfig(profile="tabular", n_states=4, lr_start=lr, lr_end=lr, discount=0.9))


def batch(s, a, r, s2, done=0.0):
    return np.array([s]), np.array([a]), np.array([r], float), np.array([s2]), np.array([done], float)


def test_tabular_update_example():
    q = tabular()
    q.q_update(batch(0, 5, 1.0, 1))
    assert abs(q.model.params["table"][0, 5] - 0.1) < 1e-12


def test_tabular_fixed_point():
    q = tabular()
    q.model.params["table"][1, :] = 0.0
    q.model.params["table"][1, 2] = 4.0
    q.sync_target()
    q.model.params["table"][0, 0] = 0.9 * 4.0
    before = q.model.params["table"].copy()
    loss = q.q_update(batch(0, 0, 0.0, 1))
    assert loss == 0.0
    assert np.array_equal(q.model.params["table"], before)


def test_target_untouched_until_sync():
    q = tabular()
    q.q_update(batch(0, 5, 1.0, 1))
    assert q.target.params["table"][0, 5] == 0.0
    q.sync_target()
    assert np.array_equal(q.target.params["table"], q.model.params["table"])


def test_remember_scales_reward_and_stores_discount():
    q = QFunction(AgentConfig(profile="tabular", n_states=2, reward_scale=0.5))
    q.remember(0, 1, 4.0, 1)
    q.remember(0, 1, 4.0, 1, discount=0.25)
    assert list(q.buffer.r[:2]) == [2.0, 2.0]
    assert list(q.buffer.gamma[:2]) == [0.9, 0.25]


def test_replay_capacity_fifo():
    q = QFunction(AgentConfig(profile="tabular", n_states=2, replay_capacity=3))
    for i in range(5):
        q.remember(0, i, float(i), 1)
    assert len(q.buffer) == 3
    assert sorted(q.buffer.a[q.buffer.order()]) == [2, 3, 4]


@pytest.mark.parametrize("profile,crop", [("compact", 9), ("conv", CONV_CROP)])
def test_gradient_matches_finite_differences(profile, crop):
    rng = np.random.default_rng(7)
    m = build_model(profile, 1, crop, hidden=6)
    for k, v in m.params.items():
        m.params[k] = rng.normal(0, 0.3, size=v.shape)
    x = rng.uniform(0, 2, size=(2, 4, m.crop, m.crop))
    dq = rng.normal(size=(2, N_ACTIONS))

    def f():
        return float((m.forward(x) * dq).sum())

    f()
    grads = m.backward(dq)
    for k, g in grads.items():
        flat = m.params[k].reshape(-1)
        for i in rng.choice(flat.size, size=min(5, flat.size), replace=False):
            old = flat[i]
            flat[i] = old + 1e-6
            up = f()
            flat[i] = old - 1e-6
            down = f()
            flat[i] = old
            num = (up - down) / 2e-6
            assert abs(num - g.reshape(-1)[i]) <= 1e-5 * max(1.0, abs(num)), (k, i)


def test_checkpoint_round_trip(tmp_path):
    g = build_grid(5, 5, 0.3)
    q = QFunction(AgentConfig(crop=9, hidden=8, seed=4))
    rng = np.random.default_rng(0)
    for k, v in q.model.params.items():
        q.model.params[k] = rng.normal(size=v.shape)
    q.decisions, q.updates = 123, 45
    path = tmp_path / "p.npz"
    q.save(path, g)
    r = QFunction.load(path, g)
    x = rng.uniform(0, 2, size=(3, 4, 9, 9))
    assert np.array_equal(q.q_values(x), r.q_values(x))
    assert np.array_equal(q.q_values(x, target=True), r.q_values(x, target=True))
    assert (r.decisions, r.updates) == (123, 45)
    assert r.epsilon == q.epsilon and r.learning_rate == q.learning_rate


def test_checkpoint_bad_version(tmp_path):
    import json
    q = QFunction(AgentConfig(crop=9, hidden=4))
    path = tmp_path / "p.npz"
    q.save(path)
    with np.load(path) as z:
        arrays = {k: z[k] for k in z.files}
    h = json.loads(bytes(arrays["header"]).decode())
    h["version"] = -1
    arrays["header"] = np.frombuffer(json.dumps(h).encode(), dtype=np.uint8)
    np.savez(path, **arrays)
    with pytest.raises(ConfigError):
        QFunction.load(path)
