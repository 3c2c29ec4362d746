import numpy as np
import pytest

from oracles import central_diff_grad, rel_err
from tscac import _kernels, approx
from tscac.approx import (
    MlpSpec,
    SoftmaxPolicy,
    ValueFunction,
    grad_log_prob,
    load_policy,
    load_value,
    make_policy,
    make_value,
    policy_probs,
    save_checkpoint,
    sgd_step,
    value_and_grad,
)
from tscac.errors import NumericError, ShapeError


def random_policy(seed, input_dim=5, n_actions=4, hidden=(8, 8)):
    return make_policy(
        MlpSpec(input_dim=input_dim, output_dim=n_actions, hidden=hidden, init_seed=seed,
                init_scale=0.5)
    )


class TestPolicyProbs:
    def test_zero_params_uniform(self):
        spec = MlpSpec(input_dim=3, output_dim=5, hidden=(4,), init_seed=0)
        policy = SoftmaxPolicy(spec=spec, params=np.zeros(spec.n_params))
        probs = policy_probs(policy, np.array([0.3, -1.0, 2.0]))
        assert np.allclose(probs, 0.2, atol=1e-12)

    def test_normalization_over_random_states(self):
        policy = random_policy(3)
        rng = np.random.default_rng(0)
        states = rng.normal(size=(100, 5))
        probs = approx.policy_probs_batch(policy, states)
        assert np.all(probs > 0)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_hand_softmax_identity_head(self):
        # single linear layer, one-hot input selects logits [ln 2, 0]
        spec = MlpSpec(input_dim=2, output_dim=2, hidden=(), init_seed=0)
        params = np.zeros(spec.n_params)
        params[0] = np.log(2.0)  # W[0,0]
        policy = SoftmaxPolicy(spec=spec, params=params)
        probs = policy_probs(policy, np.array([1.0, 0.0]))
        assert probs == pytest.approx([2 / 3, 1 / 3], abs=1e-12)

    def test_shape_and_numeric_errors(self):
        policy = random_policy(1)
        with pytest.raises(ShapeError):
            policy_probs(policy, np.zeros(7))
        with pytest.raises(NumericError):
            policy_probs(policy, np.array([np.nan, 0, 0, 0, 0]))


class TestGradLogProb:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        for k in range(20):
            policy = random_policy(k, hidden=(6,) if k % 2 else (5, 4))
            state = rng.normal(size=5)
            action = int(rng.integers(4))
            analytic = grad_log_prob(policy, state, action)

            def f(params):
                probs = policy_probs(approx.with_params(policy, params), state)
                return float(np.log(probs[action]))

            numeric = central_diff_grad(f, policy.params, h=1e-5)
            assert rel_err(analytic, numeric) < 1e-4

    def test_score_function_expectation_zero(self):
        policy = random_policy(9)
        rng = np.random.default_rng(7)
        state = rng.normal(size=5)
        probs = policy_probs(policy, state)
        # exact expectation over the action distribution instead of sampling
        expectation = sum(
            p * grad_log_prob(policy, state, a) for a, p in enumerate(probs)
        )
        assert np.abs(expectation).max() < 1e-10

    def test_tabular_closed_form(self):
        # linear one-hot case: d log pi(a) / d logit_k = 1[k=a] - p_k
        spec = MlpSpec(input_dim=3, output_dim=4, hidden=(), init_seed=5, init_scale=0.8)
        policy = make_policy(spec)
        state = np.array([0.0, 1.0, 0.0])
        probs = policy_probs(policy, state)
        grad = grad_log_prob(policy, state, 2)
        w_grad = grad[: 3 * 4].reshape(3, 4)
        b_grad = grad[3 * 4 :]
        indicator = np.eye(4)[2]
        assert np.allclose(b_grad, indicator - probs, atol=1e-12)
        assert np.allclose(w_grad[1], indicator - probs, atol=1e-12)
        assert np.allclose(w_grad[0], 0.0) and np.allclose(w_grad[2], 0.0)

    def test_invalid_action(self):
        with pytest.raises(IndexError):
            grad_log_prob(random_policy(0), np.zeros(5), 4)


class TestValueAndGrad:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        for k in range(20):
            spec = MlpSpec(input_dim=4, output_dim=1, hidden=(7,), init_seed=k, init_scale=0.5)
            critic = make_value(spec)
            state = rng.normal(size=4)
            _, analytic = value_and_grad(critic, state)

            def f(params):
                return approx.value(approx.with_params(critic, params), state[None, :])[0]

            numeric = central_diff_grad(f, critic.params, h=1e-5)
            assert rel_err(analytic, numeric) < 1e-4

    def test_sgd_fixed_point_and_step(self):
        params = np.array([1.0, -2.0])
        assert np.array_equal(sgd_step(params, np.zeros(2), 0.1), params)
        # f(w) = w^2 from w=1, lr=0.1: w - 0.1 * 2w = 0.8
        assert sgd_step(np.array([1.0]), np.array([2.0]), 0.1)[0] == pytest.approx(0.8)

    def test_lr_and_nan_guards(self):
        with pytest.raises(ValueError):
            sgd_step(np.zeros(2), np.zeros(2), 0.0)
        with pytest.raises(NumericError):
            sgd_step(np.zeros(2), np.array([np.nan, 0.0]), 0.1)


class TestDeterminismAndCheckpoints:
    def test_bit_identical_update_sequences(self):
        def run():
            policy = random_policy(11)
            rng = np.random.default_rng(5)
            for _ in range(20):
                states = rng.normal(size=(8, 5))
                actions = rng.integers(0, 4, size=8)
                weights = rng.normal(size=8)
                policy, _ = approx.weighted_logprob_ascent(policy, states, actions, weights, 1e-2)
            return policy.params

        a, b = run(), run()
        assert np.array_equal(a, b)

    def test_checkpoint_round_trip(self, tmp_path):
        policy = random_policy(2)
        save_checkpoint(policy, tmp_path / "p.json")
        back = load_policy(tmp_path / "p.json")
        assert back.spec == policy.spec
        assert np.array_equal(back.params, policy.params)

        critic = make_value(MlpSpec(input_dim=3, output_dim=1, init_seed=1))
        save_checkpoint(critic, tmp_path / "v.json")
        back = load_value(tmp_path / "v.json")
        assert np.array_equal(back.params, critic.params)
        assert isinstance(back, ValueFunction)


class TestKernelBackends:
    def test_backend_reported(self):
        assert _kernels.BACKEND in ("c", "py")

    def test_parity_with_reference(self):
        if _kernels.BACKEND != "c":
            pytest.skip("compiled kernels not built")
        from tscac._kernels import _mlp_cy, _mlp_np

        rng = np.random.default_rng(0)
        dims = (6, 9, 5, 3)
        params = rng.normal(size=_mlp_np.n_params(dims))
        for act in (0, 1):
            for batch in (1, 17):
                x = rng.normal(size=(batch, 6))
                gy = rng.normal(size=(batch, 3))
                assert np.allclose(
                    _mlp_np.mlp_forward(params, dims, act, x),
                    _mlp_cy.mlp_forward(params, dims, act, x),
                    rtol=1e-12, atol=1e-13,
                )
                g_np, gx_np = _mlp_np.mlp_vjp(params, dims, act, x, gy, True)
                g_cy, gx_cy = _mlp_cy.mlp_vjp(params, dims, act, x, gy, True)
                assert np.allclose(g_np, g_cy, rtol=1e-11, atol=1e-12)
                assert np.allclose(gx_np, gx_cy, rtol=1e-11, atol=1e-12)
