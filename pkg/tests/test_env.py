import json
import math

import numpy as np
import pytest

from tscac import approx
from tscac.core import read_sessions
from tscac.env import (
    DEFAULT_BASE_RATES,
    LatentUser,
    Simulator,
    SimulatorConfig,
    generate_log,
    simulate_sessions,
)
from tscac.errors import ConfigError
from tscac.seeding import derive_rng


def small_config(**overrides):
    base = dict(n_topics=4, n_videos=8, leave_prob=0.15, max_session_len=25, seed=11)
    base.update(overrides)
    return SimulatorConfig(**base)


class TestConfig:
    def test_default_rates_follow_observed_interaction_sparsity(self):
        # click / like / comment at 37.7%, 1.61%, 0.24%
        assert DEFAULT_BASE_RATES == (0.377, 0.0161, 0.0024)
        cfg = SimulatorConfig()
        assert cfg.interaction_base_rates == DEFAULT_BASE_RATES

    def test_state_dim_derived_and_validated(self):
        cfg = small_config()
        assert cfg.state_dim == (2 + cfg.history_len) * 4 + 1
        with pytest.raises(ConfigError):
            small_config(state_dim=5)

    def test_field_validation(self):
        with pytest.raises(ConfigError):
            small_config(leave_prob=0.0)
        with pytest.raises(ConfigError):
            small_config(interaction_base_rates=(0.5, 1.2))
        with pytest.raises(ConfigError):
            small_config(interaction_align=(0.1,))
        with pytest.raises(ConfigError):
            SimulatorConfig.from_dict({"bogus_field": 1})

    def test_response_spec(self):
        spec = small_config().make_response_spec()
        assert spec.names == ("watch_time", "click", "like", "comment")
        assert spec.sparsity[0] == "dense"
        assert all(s == "sparse" for s in spec.sparsity[1:])


class TestReset:
    def test_same_seed_same_user_and_state(self):
        sim = Simulator(small_config())
        u1, s1 = sim.reset(derive_rng(5, "session", 0))
        u2, s2 = sim.reset(derive_rng(5, "session", 0))
        assert np.array_equal(u1.pref, u2.pref)
        assert np.array_equal(u1.interaction_affinity, u2.interaction_affinity)
        assert np.array_equal(s1, s2)

    def test_state_dim_contract(self):
        cfg = small_config()
        sim = Simulator(cfg)
        _, state = sim.reset(np.random.default_rng(0))
        assert state.shape == (cfg.state_dim,)

    def test_pref_norm_bound(self):
        cfg = small_config(user_pref_scale=0.7)
        sim = Simulator(cfg)
        for k in range(50):
            user, _ = sim.reset(np.random.default_rng(k))
            assert np.linalg.norm(user.pref) <= 0.7 * math.sqrt(cfg.n_topics) + 1e-12
            assert np.all(np.abs(user.pref) <= 0.7)

    def test_alignment_sets_affinity_cosine(self):
        cfg = small_config(interaction_align=(0.8, -0.5, 0.0))
        sim = Simulator(cfg)
        user, _ = sim.reset(np.random.default_rng(3))
        p_hat = user.pref / np.linalg.norm(user.pref)
        for k, align in enumerate(cfg.interaction_align):
            a = user.interaction_affinity[k]
            assert float(a @ p_hat) / np.linalg.norm(a) == pytest.approx(align, abs=1e-9)


class TestStep:
    def test_watch_time_nonnegative(self):
        cfg = small_config(watchtime_noise=1.5)
        sim = Simulator(cfg)
        rng = np.random.default_rng(0)
        user, state = sim.reset(rng)
        for k in range(10_000):
            reward, _, _ = sim.step(user, state, k % cfg.n_videos, rng)
            assert reward[0] >= 0.0

    def test_base_rate_binomial(self):
        # affinity scale 0 pins each sparse rate exactly at its base rate
        cfg = small_config(
            interaction_base_rates=(0.3, 0.02),
            interaction_names=("a", "b"),
            interaction_affinity_scale=0.0,
        )
        sim = Simulator(cfg)
        rng = np.random.default_rng(1)
        user, state = sim.reset(rng)
        n = 100_000
        hits = np.zeros(2)
        for k in range(n):
            reward, _, _ = sim.step(user, state, k % cfg.n_videos, rng)
            hits += reward[1:]
        for k, rate in enumerate(cfg.interaction_base_rates):
            se = math.sqrt(rate * (1 - rate) / n)
            assert abs(hits[k] / n - rate) <= 3 * se

    def test_invalid_action(self):
        sim = Simulator(small_config())
        rng = np.random.default_rng(0)
        user, state = sim.reset(rng)
        with pytest.raises(IndexError):
            sim.step(user, state, 8, rng)

    def test_step_deterministic_given_rng_state(self):
        sim = Simulator(small_config())
        user, state = sim.reset(np.random.default_rng(2))
        r1, s1, t1 = sim.step(user, state, 3, np.random.default_rng(9))
        r2, s2, t2 = sim.step(user, state, 3, np.random.default_rng(9))
        assert np.array_equal(r1, r2) and np.array_equal(s1, s2) and t1 == t2

    def test_history_window_shifts(self):
        cfg = small_config(history_len=2)
        sim = Simulator(cfg)
        rng = np.random.default_rng(4)
        user, state = sim.reset(rng)
        _, s1, _ = sim.step(user, state, 5, rng)
        _, s2, _ = sim.step(user, s1, 2, rng)
        lo, nt = cfg.n_topics, cfg.n_topics
        assert np.array_equal(s1[lo : lo + nt], sim.videos[5])
        assert np.array_equal(s2[lo : lo + nt], sim.videos[2])
        assert np.array_equal(s2[lo + nt : lo + 2 * nt], sim.videos[5])


class TestSessions:
    def test_session_length_matches_geometric_law(self):
        cfg = small_config(leave_prob=0.2, max_session_len=30)
        sessions = simulate_sessions(cfg, None, 10_000, seed=5)
        mean_len = np.mean([len(s) for s in sessions])
        p, cap = 0.2, 30
        analytic = (1 - (1 - p) ** cap) / p
        assert abs(mean_len - analytic) / analytic <= 0.05

    def test_sparsity_ordering_preserved(self):
        cfg = SimulatorConfig(seed=2)  # click 0.377 >> like 0.0161 >> comment 0.0024
        sessions = simulate_sessions(cfg, None, 3000, seed=9)
        rewards = np.concatenate([[t.reward for t in s.transitions] for s in sessions])
        rates = rewards[:, 1:].mean(axis=0)
        assert rates[0] > 5 * rates[1] > 0
        assert rates[1] > 2 * rates[2] > 0

    def test_max_session_len_cap(self):
        cfg = small_config(leave_prob=0.01, max_session_len=6)
        sessions = simulate_sessions(cfg, None, 200, seed=3)
        assert max(len(s) for s in sessions) <= 6


class TestGenerateLog:
    def test_empty_log(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        generate_log(small_config(), None, 0, seed=1, path=path)
        assert path.read_bytes() == b""

    def test_byte_identical_per_seed(self, tmp_path):
        cfg = small_config()
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        generate_log(cfg, None, 25, seed=42, path=p1)
        generate_log(cfg, None, 25, seed=42, path=p2)
        assert p1.read_bytes() == p2.read_bytes()
        generate_log(cfg, None, 25, seed=43, path=p2)
        assert p1.read_bytes() != p2.read_bytes()

    def test_round_trip_and_behavior_prob(self, tmp_path):
        cfg = small_config()
        path = tmp_path / "log.jsonl"
        generate_log(cfg, None, 10, seed=0, path=path)
        sessions = read_sessions(path)
        assert len(sessions) == 10
        for s in sessions:
            for t in s.transitions:
                assert t.behavior_prob == pytest.approx(1.0 / cfg.n_videos)

    def test_uniform_behavior_frequencies(self):
        cfg = small_config(n_videos=10, leave_prob=0.1, max_session_len=20)
        sessions = simulate_sessions(cfg, None, 6000, seed=8)
        actions = np.concatenate([[t.action for t in s.transitions] for s in sessions])
        n = len(actions)
        assert n > 50_000
        p = 1.0 / cfg.n_videos
        se = math.sqrt(n * p * (1 - p))
        counts = np.bincount(actions, minlength=cfg.n_videos)
        assert np.all(np.abs(counts - n * p) <= 3 * se)

    def test_policy_behavior_prob_recorded(self, tmp_path):
        cfg = small_config()
        policy = approx.make_policy(
            approx.MlpSpec(input_dim=cfg.state_dim, output_dim=cfg.n_videos,
                           hidden=(8,), init_seed=3, init_scale=0.4)
        )
        path = tmp_path / "pol.jsonl"
        generate_log(cfg, policy, 5, seed=2, path=path)
        for s in read_sessions(path):
            for t in s.transitions:
                probs = approx.policy_probs(policy, t.state)
                assert t.behavior_prob == pytest.approx(probs[t.action], rel=1e-12)
