import numpy as np
import pytest

from helpers import tabular_policy
from tscac import approx
from tscac.core import ResponseSpec, Session, Transition
from tscac.env import SimulatorConfig, simulate_sessions
from tscac.errors import DegenerateEvaluationError, InsufficientDataError
from tscac.evaluation import (
    EvalConfig,
    compare_report,
    dcg,
    monte_carlo_values,
    ncis,
    report_to_csv,
    report_to_text,
)


def one_state_session(items, n_actions=4):
    """Session of terminal-free steps at distinct one-hot states.

    ``items`` is a list of (action, reward_vector, behavior_prob).
    """
    eye = np.eye(len(items))
    transitions = []
    for t, (action, reward, behavior) in enumerate(items):
        transitions.append(
            Transition(
                state=eye[t], action=action, reward=np.asarray(reward, dtype=float),
                next_state=eye[min(t + 1, len(items) - 1)],
                terminal=t == len(items) - 1, behavior_prob=behavior,
            )
        )
    return Session(transitions=tuple(transitions), user_id="u", seed=0)


def onehot_policy(per_state_probs):
    """Linear policy on one-hot states realizing the given rows of probabilities."""
    table = np.asarray(per_state_probs, dtype=np.float64)
    n_states, n_actions = table.shape
    spec = approx.MlpSpec(input_dim=n_states, output_dim=n_actions, hidden=(), init_seed=0)
    params = np.concatenate([np.log(table).reshape(-1), np.zeros(n_actions)])
    return approx.SoftmaxPolicy(spec=spec, params=params)


class TestNcis:
    def test_behavior_policy_gives_empirical_mean_exactly(self):
        cfg = SimulatorConfig(n_topics=3, n_videos=5, seed=1)
        policy = approx.make_policy(
            approx.MlpSpec(input_dim=cfg.state_dim, output_dim=5, hidden=(6,), init_seed=2,
                           init_scale=0.5)
        )
        sessions = simulate_sessions(cfg, policy, 40, seed=7)
        rewards = np.array([t.reward[0] for s in sessions for t in s.transitions])
        score = ncis(policy, sessions, 0, cap_c=5.0)
        assert score == rewards.mean()  # ratios are exactly 1, so exact equality

    def test_two_transition_hand_example(self):
        # rewards (1,2), ratios (2,0.5), c=1 -> (1*1 + 0.5*2)/1.5 = 4/3
        probs = np.array([[0.8, 0.2], [0.2, 0.8]])
        policy = onehot_policy(probs)
        session = one_state_session(
            [(0, [1.0], 0.4), (0, [2.0], 0.4)]  # ratios 0.8/0.4=2, 0.2/0.4=0.5
        )
        score = ncis(policy, [session], 0, cap_c=1.0)
        assert score == pytest.approx(4.0 / 3.0, abs=1e-9)

    def test_single_transition_cap_cancels(self):
        policy = onehot_policy([[0.9, 0.1]])
        session = one_state_session([(0, [3.5], 0.01)])
        assert ncis(policy, [session], 0, cap_c=1e12) == pytest.approx(3.5, rel=1e-12)

    def test_tiny_cap_degrades_to_empirical_mean_exactly(self):
        policy = onehot_policy([[0.7, 0.3], [0.4, 0.6], [0.5, 0.5]])
        session = one_state_session([(0, [1.3], 0.5), (1, [0.2], 0.5), (0, [2.4], 0.5)])
        rewards = np.array([1.3, 0.2, 2.4])
        score = ncis(policy, [session], 0, cap_c=2.0**-40)  # power of 2: exact scaling
        assert score == rewards.mean()

    def test_weight_rescaling_invariance(self):
        # dividing every behavior_prob by 7 scales ratios by 7; scaling c by 7 too
        # leaves the normalized score unchanged
        policy = onehot_policy([[0.6, 0.4], [0.3, 0.7]])
        items = [(0, [1.0], 0.35), (1, [4.0], 0.7)]
        base = ncis(policy, [one_state_session(items)], 0, cap_c=1.2)
        scaled_items = [(a, r, b / 7.0) for a, r, b in items]
        scaled = ncis(policy, [one_state_session(scaled_items)], 0, cap_c=7 * 1.2)
        assert scaled == pytest.approx(base, rel=1e-12)

    def test_empty_and_cap_guards(self):
        policy = onehot_policy([[0.5, 0.5]])
        with pytest.raises(InsufficientDataError):
            ncis(policy, [], 0, cap_c=1.0)
        with pytest.raises(ValueError):
            ncis(policy, [one_state_session([(0, [1.0], 0.5)])], 0, cap_c=0.0)


class TestDcg:
    def test_single_item(self):
        policy = onehot_policy([[0.5, 0.5]])
        session = one_state_session([(0, [7.0], 0.5)])
        assert dcg(policy, [session], 0) == pytest.approx(7.0)

    def test_two_items_hand_example(self):
        # policy scores rank the reward-4 item first: 4 + 2/log2(3)
        policy = onehot_policy([[0.9, 0.1], [0.4, 0.6]])
        session = one_state_session([(0, [4.0], 0.5), (0, [2.0], 0.5)])
        assert dcg(policy, [session], 0) == pytest.approx(5.26186, abs=1e-4)

    def test_uniform_policy_keeps_logged_order(self):
        policy = onehot_policy([[0.5, 0.5]] * 3)
        session = one_state_session([(0, [3.0], 0.5), (1, [2.0], 0.5), (0, [1.0], 0.5)])
        expected = 3.0 + 2.0 / np.log2(3) + 1.0 / np.log2(4)
        assert dcg(policy, [session], 0) == pytest.approx(expected, rel=1e-12)

    def test_ranking_invariance_under_monotone_rescoring(self):
        scores = np.array([0.2, 0.8, 0.5, 0.05])
        table_a = np.column_stack([scores, 1 - scores])
        sharp = scores**3
        table_b = np.column_stack([sharp, 1 - sharp])  # same ordering, new values
        session = one_state_session(
            [(0, [1.0], 0.5), (0, [5.0], 0.5), (0, [2.0], 0.5), (0, [0.5], 0.5)]
        )
        a = dcg(onehot_policy(table_a), [session], 0)
        b = dcg(onehot_policy(table_b), [session], 0)
        assert a == pytest.approx(b, rel=1e-12)

    def test_empty_sessions(self):
        with pytest.raises(InsufficientDataError):
            dcg(onehot_policy([[0.5, 0.5]]), [], 0)


class TestMonteCarloValues:
    spec = ResponseSpec(names=("w", "i"), discounts=(0.9, 0.9), sparsity=("dense", "sparse"))

    def test_zero_rewards(self):
        session = one_state_session([(0, [0.0, 0.0], 0.5)] * 3)
        assert np.array_equal(monte_carlo_values([session], self.spec), np.zeros(2))

    def test_single_step_undiscounted(self):
        session = one_state_session([(0, [5.0, 1.0], 0.5)])
        assert monte_carlo_values([session], self.spec) == pytest.approx([5.0, 1.0])

    def test_mean_idempotent_on_duplicates(self):
        session = one_state_session([(0, [2.0, 0.0], 0.5), (1, [1.0, 1.0], 0.5)])
        one = monte_carlo_values([session], self.spec)
        two = monte_carlo_values([session, session], self.spec)
        assert np.array_equal(one, two)

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            monte_carlo_values([], self.spec)


class TestCompareReport:
    def test_baseline_zero_gap(self):
        rows = compare_report(
            {"bc": {"w": 2.0}, "other": {"w": 2.0}}, baseline="bc"
        )
        assert all(r["pct_gap"] == 0.0 for r in rows)

    def test_reference_percentage(self):
        rows = compare_report(
            {"bc": {"watch_time": 12.85}, "two_stage": {"watch_time": 13.14}},
            baseline="bc",
        )
        gap = next(r for r in rows if r["algorithm"] == "two_stage")["pct_gap"]
        assert round(gap, 2) == 2.26

    def test_lower_is_better_marks_best(self):
        rows = compare_report(
            {"bc": {"hate": 2.0}, "alt": {"hate": 1.5}},
            baseline="bc", lower_is_better=("hate",),
        )
        best = {r["algorithm"]: r["best"] for r in rows}
        assert best["alt"] and not best["bc"]
        text = report_to_text(rows, lower_is_better=("hate",))
        assert "hate↓" in text and "*" in text

    def test_zero_baseline_flagged_absolute(self):
        rows = compare_report({"bc": {"w": 0.0}, "alt": {"w": 0.3}}, baseline="bc")
        alt = next(r for r in rows if r["algorithm"] == "alt")
        assert alt["pct_gap"] is None
        assert alt["gap_flag"] == "absolute"
        assert alt["abs_gap"] == pytest.approx(0.3)

    def test_missing_baseline(self):
        with pytest.raises(KeyError):
            compare_report({"a": {"w": 1.0}}, baseline="bc")

    def test_csv_round_trip(self, tmp_path):
        rows = compare_report({"bc": {"w": 1.0}, "alt": {"w": 1.1}}, baseline="bc")
        path = tmp_path / "report.csv"
        report_to_csv(rows, path)
        text = path.read_text()
        assert "algorithm" in text.splitlines()[0]
        assert len(text.splitlines()) == 1 + len(rows)


class TestEvalConfig:
    def test_cap_validation(self):
        with pytest.raises(ValueError):
            EvalConfig(cap_c=0.0)
        assert EvalConfig().cap_c == 5.0
