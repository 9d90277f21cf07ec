import math

import numpy as np
import pytest

from uavmec.config import SimConfig
from uavmec.env import (Action, UavMecEnv, action_count, channel_gain,
                        computing_energy, default_start_fpap, flying_energy,
                        fpap_position, hovering_energy, psi_normalizer, state_dim,
                        uplink_rate, utility, worst_case_slot_energy)


def paper_cfg(**kw):
    cfg = SimConfig(**kw)
    return cfg


def desk_cfg(**kw):
    defaults = dict(N=3, M=9, B=60e3)
    defaults.update(kw)
    return SimConfig(**defaults)


class ForcedMu:
    """Delegating rng wrapper that pins the served-task draw."""

    def __init__(self, base, mu):
        self._base = base
        self.mu = mu

    def integers(self, low, high):
        return self.mu

    def __getattr__(self, name):
        return getattr(self._base, name)


# -- geometry ---------------------------------------------------------------

def test_fpap_grid_corner_and_center():
    cfg = paper_cfg(M=25)
    assert fpap_position(0, cfg) == pytest.approx((100.0, 100.0))
    assert fpap_position(12, cfg) == pytest.approx((500.0, 500.0))


def test_fpap_single_point_centered():
    cfg = paper_cfg(M=1)
    assert fpap_position(0, cfg) == pytest.approx((500.0, 500.0))


def test_fpap_index_out_of_range():
    cfg = paper_cfg(M=25)
    with pytest.raises(IndexError):
        fpap_position(25, cfg)
    with pytest.raises(IndexError):
        fpap_position(-1, cfg)


def test_default_start_is_grid_center():
    assert default_start_fpap(paper_cfg(M=25)) == 12
    assert default_start_fpap(paper_cfg(M=9)) == 4
    assert default_start_fpap(paper_cfg(M=25, start_fpap=3)) == 3


def test_action_flat_round_trip():
    for n in range(4):
        for m in range(7):
            a = Action(n, m)
            flat = a.to_flat(7)
            assert flat == n * 7 + m
            assert Action.from_flat(flat, 7) == a


# -- channel and rate --------------------------------------------------------

def test_channel_gain_overhead():
    cfg = paper_cfg()
    assert channel_gain((300.0, 400.0), (300.0, 400.0), cfg) == pytest.approx(2e-7, rel=1e-12)


def test_channel_gain_three_four_five():
    cfg = paper_cfg(H=30.0)
    assert channel_gain((0.0, 0.0), (40.0, 0.0), cfg) == pytest.approx(2e-7, rel=1e-12)


def test_channel_gain_monotone_decay():
    cfg = paper_cfg()
    gains = [channel_gain((0.0, 0.0), (d, 0.0), cfg) for d in (0, 10, 100, 1000, 1e6)]
    assert all(a > b for a, b in zip(gains, gains[1:]))
    assert gains[-1] < 1e-11


def test_uplink_rate_hand_value():
    cfg = paper_cfg()
    rate = uplink_rate((500.0, 500.0), (500.0, 500.0), cfg)
    assert rate == pytest.approx(20931569.290671516, rel=1e-12)


def test_uplink_rate_zero_power():
    cfg = paper_cfg(P_t=1.0)
    cfg.P_t = 0.0  # bypass validation; pure function contract
    assert uplink_rate((0.0, 0.0), (0.0, 0.0), cfg) == 0.0


def test_uplink_rate_scales_with_bandwidth():
    cfg1 = paper_cfg(bandwidth=1e6)
    cfg2 = paper_cfg(bandwidth=2e6)
    r1 = uplink_rate((100.0, 100.0), (300.0, 300.0), cfg1)
    r2 = uplink_rate((100.0, 100.0), (300.0, 300.0), cfg2)
    assert r2 == pytest.approx(2 * r1, rel=1e-12)


def test_rate_strictly_decreases_with_distance():
    cfg = paper_cfg()
    rates = [uplink_rate((0.0, 0.0), (d, 0.0), cfg) for d in np.linspace(0, 1400, 30)]
    assert all(a > b for a, b in zip(rates, rates[1:]))


# -- energy ledger pieces ----------------------------------------------------

def test_flying_energy_same_point_is_zero():
    cfg = paper_cfg(M=25)
    assert flying_energy(7, 7, cfg) == (0.0, 0.0)


def test_flying_energy_neighbor_hop():
    cfg = paper_cfg(M=25)
    e_f, t_fly = flying_energy(0, 1, cfg)  # 200 m apart
    assert t_fly == pytest.approx(10.0)
    assert e_f == pytest.approx(1100.0)


def test_flying_energy_diagonal_hop():
    cfg = paper_cfg(M=25)
    e_f, _ = flying_energy(0, 6, cfg)  # 200*sqrt(2)
    assert e_f == pytest.approx(1100.0 * math.sqrt(2), rel=1e-12)


def test_hovering_energy_zero_tasks():
    cfg = paper_cfg()
    assert hovering_energy(0, 2e7, cfg) == (0.0, 0.0)


def test_hovering_energy_hand_value():
    cfg = paper_cfg()
    rate = 20931569.290671516
    e_h, t_h = hovering_energy(5, rate, cfg)
    assert t_h == pytest.approx(23.887363295920334, rel=1e-12)
    assert e_h == pytest.approx(1910.9890636736268, rel=1e-12)


def test_hovering_energy_linear_in_mu():
    cfg = paper_cfg()
    e1, _ = hovering_energy(3, 1.7e7, cfg)
    e2, _ = hovering_energy(6, 1.7e7, cfg)
    assert e2 == pytest.approx(2 * e1, rel=1e-12)


def test_hovering_energy_rejects_nonpositive_rate():
    cfg = paper_cfg()
    with pytest.raises(ValueError):
        hovering_energy(1, 0.0, cfg)


def test_computing_energy_values():
    cfg = paper_cfg()
    assert computing_energy(0, cfg) == (0.0, 0.0)
    e1, t1 = computing_energy(1, cfg)
    assert e1 == pytest.approx(400.0, rel=1e-12)
    assert t1 == pytest.approx(50.0)
    e10, _ = computing_energy(10, cfg)
    assert e10 == pytest.approx(4000.0, rel=1e-12)


def test_utility_values():
    cfg = paper_cfg()
    assert utility(0, cfg) == 0.0
    assert utility(10, cfg) == pytest.approx(1 - math.exp(-5), abs=1e-12)
    assert utility(5, cfg) == pytest.approx(0.8111243971624382, abs=1e-12)


def test_utility_bounded():
    # up to 4x the model's per-slot task range; beyond that float rounds to 1.0
    cfg = paper_cfg()
    for mu in range(0, 41):
        assert 0.0 <= utility(mu, cfg) < 1.0


# -- psi normalizer ----------------------------------------------------------

def test_psi_compute_term_only_when_powers_zero():
    cfg = paper_cfg()
    cfg.P_f = 0.0
    cfg.P_h = 0.0
    assert worst_case_slot_energy(cfg) == pytest.approx(4000.0, rel=1e-12)


def test_psi_matches_three_term_oracle():
    cfg = paper_cfg(M=25)
    # Independent evaluation of the bound's three terms.
    d_diag = math.hypot(800.0, 800.0)
    w_fly = cfg.P_f * d_diag / cfg.V
    d_far = math.hypot(1000.0 - 100.0, 1000.0 - 100.0)
    g_min = cfg.rho0 / math.sqrt(cfg.H ** 2 + d_far ** 2)
    r_min = cfg.bandwidth * math.log2(1 + cfg.P_t * g_min / cfg.sigma2)
    w_hover = cfg.P_h * cfg.mu_max * cfg.N_b / r_min
    w_comp = cfg.gamma_c * cfg.C * cfg.f_c ** 2 * cfg.mu_max * cfg.N_b
    assert psi_normalizer(cfg) == pytest.approx(1.0 / (w_fly + w_hover + w_comp), rel=1e-12)


def test_psi_bounds_every_observed_slot():
    cfg = desk_cfg(seed=21)
    env = UavMecEnv(cfg, np.random.default_rng(21))
    rng = np.random.default_rng(5)
    for _ in range(30):
        env.reset()
        while not env.terminal:
            out = env.step(int(rng.integers(0, action_count(cfg))))
            assert env.psi * out.total_energy <= 1.0000000000000002


# -- reset/step/encode -------------------------------------------------------

def test_reset_state_and_determinism():
    cfg = desk_cfg(seed=3)
    env = UavMecEnv(cfg, np.random.default_rng(3))
    s1 = env.reset()
    assert env.battery == cfg.B
    assert all(tu.cum_tasks == 0 for tu in env.tus)
    assert env.uav_fpap == default_start_fpap(cfg)
    env2 = UavMecEnv(cfg, np.random.default_rng(3))
    s2 = env2.reset()
    np.testing.assert_array_equal(s1, s2)


def test_encoded_state_layout():
    cfg = desk_cfg()
    env = UavMecEnv(cfg, np.random.default_rng(0))
    s = env.reset()
    assert s.shape == (state_dim(cfg),) == (3 * cfg.N + 3,)
    # fresh reset: battery entry 1, all QoS entries 0
    assert s[2 * cfg.N + 2] == 1.0
    assert np.all(s[-cfg.N:] == 0.0)
    # place a user at the origin corner and one at the center
    env.tus[0].x = 0.0
    env.tus[0].y = 0.0
    env.tus[1].x = cfg.area_width / 2
    env.tus[1].y = cfg.area_height / 2
    s = env.encode_state()
    assert s[0] == 0.0 and s[1] == 0.0
    assert s[2] == 0.5 and s[3] == 0.5


def test_encoded_state_without_qos_entries():
    cfg = desk_cfg(include_qos_in_state=False)
    env = UavMecEnv(cfg, np.random.default_rng(0))
    s = env.reset()
    assert s.shape == (2 * cfg.N + 3,)


def test_step_zero_cost_slot():
    cfg = desk_cfg()
    env = UavMecEnv(cfg, np.random.default_rng(8))
    env.reset()
    env.rng = ForcedMu(env.rng, 0)
    stay = env.uav_fpap  # action that stays put
    out = env.step(Action(0, stay))
    assert out.reward == 0.0
    assert out.total_energy == 0.0
    assert out.slot_duration == 0.0
    assert env.battery == cfg.B


def test_step_composed_ledger_hand_value():
    cfg = paper_cfg(N=2, M=25)
    env = UavMecEnv(cfg, np.random.default_rng(1))
    env.reset()
    env.uav_fpap = 12
    env.tus[0].x, env.tus[0].y = fpap_position(13, cfg)  # right of center, d_horiz 0
    env.rng = ForcedMu(env.rng, 10)
    out = env.step(Action(0, 13))  # 200 m hop
    assert out.e_f == pytest.approx(1100.0)
    assert out.e_h == pytest.approx(3821.9781273472536, rel=1e-9)
    assert out.e_c == pytest.approx(4000.0, rel=1e-12)
    assert out.total_energy == pytest.approx(8921.978127347254, rel=1e-9)
    assert out.reward == pytest.approx(
        (1 - math.exp(-5)) - env.psi * out.total_energy, abs=1e-12)
    assert out.mu_served == 10
    assert env.tus[0].cum_tasks == 10


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_step_terminal_on_battery_exhaustion():
    cfg = paper_cfg(N=2, M=25, B=100.0)
    env = UavMecEnv(cfg, np.random.default_rng(2))
    env.reset()
    env.rng = ForcedMu(env.rng, 10)
    out = env.step(Action(0, 13))
    assert out.terminal
    assert out.battery < 0.0  # may go negative on the final slot
    with pytest.raises(RuntimeError):
        env.step(Action(0, 13))


def test_ledger_conservation_random_episodes():
    cfg = desk_cfg(seed=17)
    env = UavMecEnv(cfg, np.random.default_rng(17))
    rng = np.random.default_rng(99)
    for _ in range(50):
        env.reset()
        battery = cfg.B
        while not env.terminal:
            out = env.step(int(rng.integers(0, action_count(cfg))))
            assert out.total_energy == out.e_f + out.e_h + out.e_c
            assert out.battery == battery - out.total_energy
            battery = out.battery
            assert -1.0 < out.reward < 1.0


def test_qos_unmet_tracking():
    cfg = desk_cfg(Z=5)
    env = UavMecEnv(cfg, np.random.default_rng(0))
    env.reset()
    assert env.qos_unmet() == [0, 1, 2]
    env.tus[0].cum_tasks = 5
    env.tus[2].cum_tasks = 7
    assert env.qos_unmet() == [1]
    env.tus[1].cum_tasks = 5
    assert env.qos_unmet() == []


def test_feasibility_warning_for_oversized_threshold():
    cfg = desk_cfg(Z=500)
    with pytest.warns(RuntimeWarning):
        UavMecEnv(cfg, np.random.default_rng(0))


def test_mu_draws_cover_full_range():
    cfg = desk_cfg(seed=31)
    env = UavMecEnv(cfg, np.random.default_rng(31))
    seen = set()
    for _ in range(40):
        env.reset()
        while not env.terminal:
            out = env.step(0)
            seen.add(out.mu_served)
    assert seen == set(range(cfg.mu_max + 1))
