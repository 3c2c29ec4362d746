"""Per-response value learning.

One critic per response channel, trained by one-step semi-gradient TD with
that channel's own discount; the TD target is held fixed during each step
and the bootstrap term is dropped on terminal transitions. The joint-critic
variant regresses a weighted sum of the reward channels under a single
shared discount, and ``critic_correlation`` is the diagnostic comparing the
two against Monte-Carlo session values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import approx
from .core import ResponseSpec, Transition
from .errors import DegenerateEvaluationError, InsufficientDataError, ShapeError


@dataclass(frozen=True)
class CriticEnsemble:
    """One value function per response channel; critic i sees only reward i."""

    spec: ResponseSpec
    critics: tuple

    def __post_init__(self):
        object.__setattr__(self, "critics", tuple(self.critics))
        if len(self.critics) != self.spec.m:
            raise ShapeError(f"need {self.spec.m} critics, got {len(self.critics)}")

    def replace_critic(self, i: int, critic: approx.ValueFunction) -> "CriticEnsemble":
        critics = list(self.critics)
        critics[i] = critic
        return replace(self, critics=tuple(critics))


def make_ensemble(spec: ResponseSpec, net: approx.MlpSpec) -> CriticEnsemble:
    """Ensemble of identically shaped critics with per-channel derived init seeds."""
    critics = tuple(
        approx.make_value(replace(net, init_seed=net.init_seed + i, output_dim=1))
        for i in range(spec.m)
    )
    return CriticEnsemble(spec=spec, critics=critics)


def td_target(reward_i: float, gamma_i: float, next_value: float, terminal: bool) -> float:
    """One-step regression target; the episode end cuts the bootstrap."""
    if not 0.0 < gamma_i < 1.0:
        raise ValueError(f"gamma {gamma_i} outside (0,1)")
    return reward_i if terminal else reward_i + gamma_i * next_value


def _batch_arrays(batch):
    if len(batch) == 0:
        raise InsufficientDataError("empty batch")
    states = np.stack([t.state for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    rewards = np.stack([t.reward for t in batch])
    terminals = np.array([t.terminal for t in batch], dtype=bool)
    actions = np.array([t.action for t in batch], dtype=np.int64)
    behavior = np.array([t.behavior_prob for t in batch])
    return states, actions, rewards, next_states, terminals, behavior


def batch_td_targets(critic, rewards_scalar, gamma, next_states, terminals) -> np.ndarray:
    """Vector of one-step targets with the next-state values held constant."""
    next_values = approx.value(critic, next_states)
    return np.where(terminals, rewards_scalar, rewards_scalar + gamma * next_values)


def critic_update(ensemble: CriticEnsemble, i: int, batch, lr: float):
    """One semi-gradient TD(0) step for channel ``i``.

    Returns (updated ensemble, mean squared TD error before the step).
    """
    if not 0 <= i < ensemble.spec.m:
        raise IndexError(f"channel {i} outside [0, {ensemble.spec.m})")
    states, _, rewards, next_states, terminals, _ = _batch_arrays(batch)
    critic = ensemble.critics[i]
    targets = batch_td_targets(
        critic, rewards[:, i], ensemble.spec.discounts[i], next_states, terminals
    )
    new_critic, loss = approx.value_regression_step(critic, states, targets, lr)
    return ensemble.replace_critic(i, new_critic), loss


def advantage(ensemble: CriticEnsemble, i: int, transition: Transition) -> float:
    """One-step TD residual r_i + gamma_i * V(s') - V(s) for channel ``i``."""
    if not 0 <= i < ensemble.spec.m:
        raise IndexError(f"channel {i} outside [0, {ensemble.spec.m})")
    critic = ensemble.critics[i]
    v_now = approx.value(critic, transition.state[None, :])[0]
    r = float(transition.reward[i])
    if transition.terminal:
        return r - v_now
    v_next = approx.value(critic, transition.next_state[None, :])[0]
    return r + ensemble.spec.discounts[i] * v_next - v_now


def batch_advantages(critic, rewards_scalar, gamma, states, next_states, terminals) -> np.ndarray:
    """Vectorized TD residuals for a batch, given per-row scalar rewards."""
    v_now = approx.value(critic, states)
    v_next = approx.value(critic, next_states)
    return np.where(
        terminals, rewards_scalar - v_now, rewards_scalar + gamma * v_next - v_now
    )


def joint_critic_update(critic: approx.ValueFunction, batch, weights, gamma: float, lr: float):
    """TD step on the scalarized reward weights . r under one shared discount.

    Returns (updated critic, mean squared TD error before the step).
    """
    states, _, rewards, next_states, terminals, _ = _batch_arrays(batch)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (rewards.shape[1],):
        raise ShapeError(f"weights shape {weights.shape}, expected ({rewards.shape[1]},)")
    scalar = rewards @ weights
    targets = batch_td_targets(critic, scalar, gamma, next_states, terminals)
    return approx.value_regression_step(critic, states, targets, lr)


def critic_correlation(values, mc_returns) -> float:
    """Pearson correlation between model values and Monte-Carlo returns."""
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(mc_returns, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ShapeError("need two equal-length vectors with at least 2 entries")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc**2).sum() * (yc**2).sum())
    if denom == 0.0:
        raise DegenerateEvaluationError("correlation undefined: zero variance")
    return float((xc * yc).sum() / denom)
