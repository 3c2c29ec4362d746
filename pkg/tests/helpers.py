"""Shared builders for tabular (single-state, linear-head) test problems."""

import numpy as np

from tscac import approx
from tscac.core import ResponseSpec, Transition
from tscac.critics import CriticEnsemble


def tabular_policy(probs_or_n, init_seed=0):
    """Linear policy over the 1-vector state; logits are free per action.

    Pass an int for a randomly initialized policy, or a probability vector
    to pin the distribution exactly (logits = log p, bias 0).
    """
    if np.ndim(probs_or_n) == 0:
        spec = approx.MlpSpec(
            input_dim=1, output_dim=int(probs_or_n), hidden=(),
            init_seed=init_seed, init_scale=0.1,
        )
        return approx.make_policy(spec)
    probs = np.asarray(probs_or_n, dtype=np.float64)
    spec = approx.MlpSpec(input_dim=1, output_dim=probs.size, hidden=(), init_seed=init_seed)
    params = np.concatenate([np.log(probs), np.zeros(probs.size)])
    return approx.SoftmaxPolicy(spec=spec, params=params)


def zero_critic(input_dim=1):
    spec = approx.MlpSpec(input_dim=input_dim, output_dim=1, hidden=(), init_seed=0)
    return approx.ValueFunction(spec=spec, params=np.zeros(spec.n_params))


def bandit_spec(m, gamma=0.9):
    return ResponseSpec(
        names=tuple(f"r{i}" for i in range(m)),
        discounts=(gamma,) * m,
        sparsity=("dense",) * m,
    )


def bandit_ensemble(m, gamma=0.9):
    spec = bandit_spec(m, gamma)
    return CriticEnsemble(spec=spec, critics=tuple(zero_critic() for _ in range(m)))


def enumerated_bandit_batch(reward_by_action, m=None):
    """One terminal transition per action at the single state [1.0].

    behavior_prob is uniform, so offline-mode updates on this batch compute
    exact expectations (deterministically) instead of sampled ones.
    """
    reward_by_action = np.atleast_2d(np.asarray(reward_by_action, dtype=np.float64))
    n_actions, m_actual = reward_by_action.shape
    batch = []
    for a in range(n_actions):
        batch.append(
            Transition(
                state=np.array([1.0]),
                action=a,
                reward=reward_by_action[a],
                next_state=np.array([1.0]),
                terminal=True,
                behavior_prob=1.0 / n_actions,
            )
        )
    return batch


def sampled_bandit_batch(policy, reward_by_action, rng, batch_size):
    """Terminal bandit transitions with actions drawn from the policy."""
    reward_by_action = np.atleast_2d(np.asarray(reward_by_action, dtype=np.float64))
    state = np.array([1.0])
    batch = []
    for _ in range(batch_size):
        action, prob = approx.sample_action(policy, state, rng)
        batch.append(
            Transition(
                state=state, action=action, reward=reward_by_action[action],
                next_state=state, terminal=True, behavior_prob=prob,
            )
        )
    return batch
