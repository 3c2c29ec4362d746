"""Policy-improvement rules.

Stage one trains one advantage-weighted actor per auxiliary response.
Stage two improves the main policy by projecting it (in KL) onto the
closed-form target: the geometric mixture of the frozen auxiliary policies,
exponent lambda_i / sum(lambda), tilted by exp(A_main / sum(lambda)). The
per-sample weight divides by the current main policy on-policy and by the
logged behavior probability offline; the mode is always an explicit flag.

Also here: the scalarized-reward baseline (single critic), its multi-critic
variant (per-channel critics, linearly combined advantages), behavior
cloning, and the deterministic-action objective with its action gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import approx, critics as critics_mod
from .approx import ActionValueFunction, SoftmaxPolicy
from .core import Transition
from .errors import (
    DataError,
    DegenerateMultiplierError,
    NumericError,
    ShapeError,
)


@dataclass(frozen=True)
class LagrangeWeights:
    """Constraint multipliers lambda_2..lambda_m, one per auxiliary channel."""

    lambdas: tuple

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if len(self.lambdas) < 1:
            raise ShapeError("need at least one multiplier")
        if any(v < 0 for v in self.lambdas):
            raise ValueError(f"multipliers must be nonnegative, got {self.lambdas}")

    @classmethod
    def uniform(cls, value: float, n_aux: int) -> "LagrangeWeights":
        return cls(lambdas=(float(value),) * n_aux)

    @property
    def total(self) -> float:
        return float(sum(self.lambdas))

    def normalized(self) -> np.ndarray:
        """Exponents lambda_i / sum(lambda); the stage-two update needs sum > 0."""
        if self.total <= 0.0:
            raise DegenerateMultiplierError("all multipliers are zero")
        return np.asarray(self.lambdas) / self.total


@dataclass(frozen=True)
class PolicyBank:
    """Frozen auxiliary policies plus the main policy under training."""

    aux_policies: tuple
    main_policy: SoftmaxPolicy

    def __post_init__(self):
        object.__setattr__(self, "aux_policies", tuple(self.aux_policies))
        if len(self.aux_policies) < 1:
            raise ShapeError("need at least one auxiliary policy")

    def with_main(self, policy: SoftmaxPolicy) -> "PolicyBank":
        return replace(self, main_policy=policy)


def _ratios(policy: SoftmaxPolicy, states, actions, behavior, clip_c: float) -> np.ndarray:
    """First-order off-policy correction min(clip_c, pi(a|s) / behavior)."""
    if np.any(behavior <= 0.0):
        raise DataError("behavior_prob must be positive for off-policy correction")
    probs = approx.policy_probs_batch(policy, states)
    ratio = probs[np.arange(len(actions)), actions] / behavior
    return np.minimum(clip_c, ratio)


def stage_one_actor_update(
    policy: SoftmaxPolicy,
    ensemble: critics_mod.CriticEnsemble,
    i: int,
    batch,
    lr: float,
    off_policy: bool = False,
    clip_c: float = 10.0,
):
    """One ascent step on the advantage-weighted log-likelihood of channel ``i``.

    The two-stage schedule applies this to auxiliary channels; the op itself
    accepts any channel, which is also how the unconstrained single-channel
    learner is expressed. Returns (updated policy, stats).
    """
    if not 0 <= i < ensemble.spec.m:
        raise IndexError(f"channel {i} outside [0, {ensemble.spec.m})")
    if not clip_c > 0:
        raise ValueError("clip_c must be > 0")
    states, actions, rewards, next_states, terminals, behavior = critics_mod._batch_arrays(batch)
    adv = critics_mod.batch_advantages(
        ensemble.critics[i], rewards[:, i], ensemble.spec.discounts[i],
        states, next_states, terminals,
    )
    rho = _ratios(policy, states, actions, behavior, clip_c) if off_policy else 1.0
    weights = rho * adv
    new_policy, _ = approx.weighted_logprob_ascent(policy, states, actions, weights, lr)
    stats = {"mean_advantage": float(adv.mean()), "mean_weight": float(np.mean(weights))}
    return new_policy, stats


def closed_form_policy(state, bank: PolicyBank, lambdas: LagrangeWeights, advantages):
    """Optimal stage-two target distribution at one state.

    pi*(a|s) proportional to prod_i pi_i(a|s)^(lambda_i/sum) * exp(A(a)/sum),
    normalized over the discrete action set. Returns (probs, Z) with Z the
    partition value making the components sum to 1.
    """
    lam_hat = lambdas.normalized()
    state = np.asarray(state, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    if not np.all(np.isfinite(advantages)):
        raise NumericError("advantages must be finite")
    if len(bank.aux_policies) != len(lambdas.lambdas):
        raise ShapeError("one multiplier per auxiliary policy required")
    log_g = advantages / lambdas.total
    for lam, aux in zip(lam_hat, bank.aux_policies):
        log_g = log_g + lam * approx.policy_log_probs_batch(aux, state[None, :])[0]
    shift = log_g.max()
    expg = np.exp(log_g - shift)
    total = expg.sum()
    with np.errstate(over="ignore"):
        z = float(np.exp(shift) * total)
    return expg / total, z


def tscac_weight(
    transition: Transition,
    bank: PolicyBank,
    lambdas: LagrangeWeights,
    advantage_1: float,
    off_policy: bool = False,
    w_max: float | None = None,
) -> float:
    """Per-sample weight of the stage-two projection update.

    Geometric-mixture probability of the taken action over the denominator
    policy (current main policy on-policy, logged behavior policy offline),
    times exp(A_main / sum(lambda)); optionally clipped at ``w_max``.
    """
    lam_hat = lambdas.normalized()
    state = transition.state[None, :]
    log_num = advantage_1 / lambdas.total
    for lam, aux in zip(lam_hat, bank.aux_policies):
        log_num += lam * approx.policy_log_probs_batch(aux, state)[0, transition.action]
    if off_policy:
        denom = transition.behavior_prob
    else:
        denom = float(approx.policy_probs_batch(bank.main_policy, state)[0, transition.action])
    if denom <= 0.0:
        raise DataError("zero denominator probability in stage-two weight")
    with np.errstate(over="ignore"):
        w = float(np.exp(log_num - np.log(denom)))
    return min(w, w_max) if w_max is not None else w


def stage_two_actor_update(
    bank: PolicyBank,
    ensemble: critics_mod.CriticEnsemble,
    batch,
    lambdas: LagrangeWeights,
    lr: float,
    w_max: float | None = 20.0,
    off_policy: bool = False,
):
    """One projection step of the main policy toward the closed-form target.

    Ascends mean_j w_j * log pi(a_j|s_j) with w_j from :func:`tscac_weight`
    (vectorized); the main advantage comes from channel 0 of ``ensemble``.
    Returns (updated main policy, stats).
    """
    lam_hat = lambdas.normalized()
    if len(bank.aux_policies) != len(lambdas.lambdas):
        raise ShapeError("one multiplier per auxiliary policy required")
    states, actions, rewards, next_states, terminals, behavior = critics_mod._batch_arrays(batch)
    rows = np.arange(len(actions))
    adv = critics_mod.batch_advantages(
        ensemble.critics[0], rewards[:, 0], ensemble.spec.discounts[0],
        states, next_states, terminals,
    )
    log_num = adv / lambdas.total
    for lam, aux in zip(lam_hat, bank.aux_policies):
        log_num = log_num + lam * approx.policy_log_probs_batch(aux, states)[rows, actions]
    if off_policy:
        if np.any(behavior <= 0.0):
            raise DataError("behavior_prob must be positive in offline mode")
        log_denom = np.log(behavior)
    else:
        log_denom = approx.policy_log_probs_batch(bank.main_policy, states)[rows, actions]
    with np.errstate(over="ignore"):
        weights = np.exp(log_num - log_denom)
    if w_max is not None:
        clipped = weights > w_max
        weights = np.minimum(weights, w_max)
    else:
        clipped = np.zeros(len(weights), dtype=bool)
    new_policy, _ = approx.weighted_logprob_ascent(bank.main_policy, states, actions, weights, lr)
    stats = {
        "mean_weight": float(weights.mean()),
        "clipped_frac": float(clipped.mean()),
        "mean_advantage": float(adv.mean()),
    }
    return new_policy, stats


def rcpo_scalar_reward(reward, lambdas: LagrangeWeights) -> float:
    """Scalarization reward[0] + sum_i lambda_i * reward[i]."""
    reward = np.asarray(reward, dtype=np.float64)
    if reward.shape != (len(lambdas.lambdas) + 1,):
        raise ShapeError(
            f"reward length {reward.shape} does not match {len(lambdas.lambdas)} multipliers"
        )
    return float(reward[0] + np.dot(lambdas.lambdas, reward[1:]))


def _scalarize_batch(rewards: np.ndarray, lambdas: LagrangeWeights) -> np.ndarray:
    weights = np.concatenate(([1.0], np.asarray(lambdas.lambdas)))
    if rewards.shape[1] != weights.size:
        raise ShapeError("reward width does not match multiplier count")
    return rewards @ weights

def rcpo_update(
    policy: SoftmaxPolicy,
    critic: approx.ValueFunction,
    batch,
    lambdas: LagrangeWeights,
    gamma: float,
    lr_actor: float,
    lr_critic: float,
    off_policy: bool = False,
    clip_c: float = 10.0,
):
    """Single-critic baseline step on the scalarized reward.

    Actor ascends the scalarized advantage from the pre-update critic; the
    critic then takes one TD step under the shared discount. Returns
    (updated policy, updated critic, stats).
    """
    states, actions, rewards, next_states, terminals, behavior = critics_mod._batch_arrays(batch)
    scalar = _scalarize_batch(rewards, lambdas)
    adv = critics_mod.batch_advantages(critic, scalar, gamma, states, next_states, terminals)
    rho = _ratios(policy, states, actions, behavior, clip_c) if off_policy else 1.0
    new_policy, _ = approx.weighted_logprob_ascent(policy, states, actions, rho * adv, lr_actor)
    targets = critics_mod.batch_td_targets(critic, scalar, gamma, next_states, terminals)
    new_critic, loss = approx.value_regression_step(critic, states, targets, lr_critic)
    return new_policy, new_critic, {"critic_loss": loss, "mean_advantage": float(adv.mean())}


def rcpo_multi_critic_update(
    policy: SoftmaxPolicy,
    ensemble: critics_mod.CriticEnsemble,
    batch,
    lambdas: LagrangeWeights,
    lr: float,
    off_policy: bool = False,
    clip_c: float = 10.0,
):
    """Actor step on the multiplier-weighted sum of per-channel advantages.

    Channel critics keep their own discounts and are trained separately via
    :func:`tscac.critics.critic_update`. Returns (updated policy, stats).
    """
    spec = ensemble.spec
    if len(lambdas.lambdas) != spec.m - 1:
        raise ShapeError(f"need {spec.m - 1} multipliers, got {len(lambdas.lambdas)}")
    states, actions, rewards, next_states, terminals, behavior = critics_mod._batch_arrays(batch)
    combined = critics_mod.batch_advantages(
        ensemble.critics[0], rewards[:, 0], spec.discounts[0], states, next_states, terminals
    )
    for k, lam in enumerate(lambdas.lambdas, start=1):
        adv_k = critics_mod.batch_advantages(
            ensemble.critics[k], rewards[:, k], spec.discounts[k], states, next_states, terminals
        )
        combined = combined + lam * adv_k
    rho = _ratios(policy, states, actions, behavior, clip_c) if off_policy else 1.0
    new_policy, _ = approx.weighted_logprob_ascent(policy, states, actions, rho * combined, lr)
    return new_policy, {"mean_advantage": float(combined.mean())}


def behavior_cloning_update(policy: SoftmaxPolicy, batch, lr: float):
    """One step of maximum likelihood on the logged actions.

    Returns (updated policy, mean negative log-likelihood before the step).
    """
    states, actions, _, _, _, _ = critics_mod._batch_arrays(batch)
    weights = np.ones(len(actions))
    new_policy, objective = approx.weighted_logprob_ascent(policy, states, actions, weights, lr)
    return new_policy, -objective


# --- deterministic-policy variant -------------------------------------------


def kernel_h(a1, a2) -> float:
    """Per-dimension Gaussian closeness score sum_d exp(-(a1_d - a2_d)^2 / 2)."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    if a1.shape != a2.shape or a1.ndim != 1:
        raise ShapeError(f"action shapes differ: {a1.shape} vs {a2.shape}")
    return float(np.exp(-0.5 * (a1 - a2) ** 2).sum())


def q_value_and_action_grad(q: ActionValueFunction, state, action):
    """Q(s,a) and its gradient with respect to the action vector."""
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if state.shape != (q.spec.input_dim - q.action_dim,) or action.shape != (q.action_dim,):
        raise ShapeError("state/action dims do not match the action-value network")
    x = np.concatenate([state, action])[None, :]
    value = approx.forward(q, x)[0, 0]
    act = approx._ACT_CODES[q.spec.activation]
    _, gx = approx._kernels.mlp_vjp(q.params, q.spec.dims, act, x, np.ones((1, 1)), True)
    return float(value), gx[0, q.spec.input_dim - q.action_dim :]


def deterministic_objective(
    state,
    main_action,
    aux_actions,
    lambdas: LagrangeWeights,
    q: ActionValueFunction,
):
    """Closeness-regularized action value prod_i h(aux_i, a)^lambda_i * Q(s, a).

    Returns (objective, gradient w.r.t. the main action). Raw multipliers
    are the exponents; all-zero multipliers leave exactly Q(s, a).
    """
    main_action = np.asarray(main_action, dtype=np.float64)
    if len(aux_actions) != len(lambdas.lambdas):
        raise ShapeError("one multiplier per auxiliary action required")
    qv, qgrad = q_value_and_action_grad(q, state, main_action)
    log_k = 0.0
    kernel_grad = np.zeros_like(main_action)
    for lam, aux in zip(lambdas.lambdas, aux_actions):
        aux = np.asarray(aux, dtype=np.float64)
        h = kernel_h(aux, main_action)
        if h <= 0.0:
            if lam > 0.0:
                raise NumericError("closeness kernel underflowed to zero with a positive multiplier")
            continue
        log_k += lam * np.log(h)
        # d h / d a_d = exp(-(aux_d - a_d)^2 / 2) * (aux_d - a_d)
        diff = aux - main_action
        kernel_grad += lam * (np.exp(-0.5 * diff**2) * diff) / h
    scale = float(np.exp(log_k))
    objective = scale * qv
    grad = objective * kernel_grad + scale * qgrad
    return objective, grad
