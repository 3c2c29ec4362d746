"""Small feed-forward approximators with analytic gradients.

A softmax head over discrete actions (policy), a scalar head (state value),
and a scalar head over concatenated state-action input (action value) share
one flat-parameter MLP. Gradients come from the kernel backend's
vector-Jacobian product; the optimizer is plain SGD. Forward and gradient
calls are pure; identical seeds and update sequences give bit-identical
parameters.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericError, ShapeError

_ACT_CODES = {"tanh": _kernels.ACT_TANH, "relu": _kernels.ACT_RELU}


@dataclass(frozen=True)
class MlpSpec:
    """Architecture and initialization of one network.

    Default shape: two tanh layers of width 32, parameters drawn uniformly
    from (-init_scale, init_scale). Empty ``hidden`` gives a single linear
    layer, which makes one-hot-state problems exactly tabular.
    """

    input_dim: int
    output_dim: int
    hidden: tuple = (32, 32)
    activation: str = "tanh"
    init_seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if self.activation not in _ACT_CODES:
            raise ValueError(f"activation must be one of {sorted(_ACT_CODES)}")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be > 0")

    @property
    def dims(self) -> tuple:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def n_params(self) -> int:
        return _kernels.n_params(self.dims)

    def init_params(self) -> np.ndarray:
        rng = np.random.default_rng(self.init_seed)
        return rng.uniform(-self.init_scale, self.init_scale, self.n_params)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "init_seed": self.init_seed,
            "init_scale": self.init_scale,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpSpec":
        return cls(
            input_dim=int(doc["input_dim"]),
            output_dim=int(doc["output_dim"]),
            hidden=tuple(doc["hidden"]),
            activation=str(doc["activation"]),
            init_seed=int(doc["init_seed"]),
            init_scale=float(doc["init_scale"]),
        )


@dataclass(frozen=True)
class SoftmaxPolicy:
    """Stochastic policy over ``spec.output_dim`` discrete actions."""

    spec: MlpSpec
    params: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "params", _checked_params(self.spec, self.params))

    @property
    def n_actions(self) -> int:
        return self.spec.output_dim


@dataclass(frozen=True)
class ValueFunction:
    """Scalar state-value estimator."""

    spec: MlpSpec
    params: np.ndarray

    def __post_init__(self):
        if self.spec.output_dim != 1:
            raise ShapeError("value function needs output_dim 1")
        object.__setattr__(self, "params", _checked_params(self.spec, self.params))


@dataclass(frozen=True)
class ActionValueFunction:
    """Scalar estimator over concatenated (state, action-vector) input."""

    spec: MlpSpec
    params: np.ndarray
    action_dim: int

    def __post_init__(self):
        if self.spec.output_dim != 1:
            raise ShapeError("action-value function needs output_dim 1")
        if not 1 <= self.action_dim < self.spec.input_dim:
            raise ShapeError("action_dim must be in [1, input_dim)")
        object.__setattr__(self, "params", _checked_params(self.spec, self.params))


def _checked_params(spec: MlpSpec, params) -> np.ndarray:
    params = np.ascontiguousarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise ShapeError(f"params shape {params.shape}, expected ({spec.n_params},)")
    return params


def make_policy(spec: MlpSpec) -> SoftmaxPolicy:
    return SoftmaxPolicy(spec=spec, params=spec.init_params())

def make_value(spec: MlpSpec) -> ValueFunction:
    return ValueFunction(spec=spec, params=spec.init_params())

def with_params(model, params):
    """Copy of any approximator record with replaced parameters."""
    return dataclasses.replace(model, params=np.ascontiguousarray(params, dtype=np.float64))


def _as_batch(spec: MlpSpec, states) -> np.ndarray:
    x = np.asarray(states, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"state shape {np.shape(states)} incompatible with input_dim {spec.input_dim}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite state input")
    return x


def forward(model, states) -> np.ndarray:
    """Raw network outputs, shape (batch, output_dim)."""
    x = _as_batch(model.spec, states)
    return _kernels.mlp_forward(model.params, model.spec.dims, _ACT_CODES[model.spec.activation], x)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_probs(policy: SoftmaxPolicy, state) -> np.ndarray:
    """Action distribution at one state (or per row of a state batch)."""
    probs = softmax(forward(policy, state))
    return probs[0] if np.ndim(state) == 1 else probs


def policy_probs_batch(policy: SoftmaxPolicy, states) -> np.ndarray:
    return softmax(forward(policy, states))


def policy_log_probs_batch(policy: SoftmaxPolicy, states) -> np.ndarray:
    return log_softmax(forward(policy, states))


def grad_log_prob(policy: SoftmaxPolicy, state, action: int) -> np.ndarray:
    """Analytic gradient of log pi(action|state) w.r.t. the flat parameters."""
    if not 0 <= action < policy.n_actions:
        raise IndexError(f"action {action} outside [0, {policy.n_actions})")
    x = _as_batch(policy.spec, state)
    act = _ACT_CODES[policy.spec.activation]
    logits = _kernels.mlp_forward(policy.params, policy.spec.dims, act, x)
    gy = -softmax(logits)
    gy[0, action] += 1.0  # d log softmax / d logits = onehot - probs
    grad, _ = _kernels.mlp_vjp(policy.params, policy.spec.dims, act, x, gy)
    return grad


def value(critic, states) -> np.ndarray:
    """State values as a flat vector, one per input row."""
    return forward(critic, states)[:, 0]


def value_and_grad(critic: ValueFunction, state):
    """(value, parameter gradient) at a single state."""
    x = _as_batch(critic.spec, state)
    act = _ACT_CODES[critic.spec.activation]
    out = _kernels.mlp_forward(critic.params, critic.spec.dims, act, x)
    grad, _ = _kernels.mlp_vjp(critic.params, critic.spec.dims, act, x, np.ones((1, 1)))
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite value gradient (|params|_max={np.abs(critic.params).max():g})")
    return float(out[0, 0]), grad


def sgd_step(params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if not lr > 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient (|g|_max={np.abs(grad).max():g})")
    return params - lr * grad


def sample_action(policy: SoftmaxPolicy, state, rng: np.random.Generator):
    """Draw one action by inverse CDF; returns (action, its probability)."""
    probs = policy_probs(policy, state)
    u = rng.random()
    action = int(np.searchsorted(np.cumsum(probs), u))
    action = min(action, policy.n_actions - 1)  # guard cumsum rounding at u ~ 1
    return action, float(probs[action])


# --- batched training steps used by the learning rules ----------------------


def weighted_logprob_ascent(policy: SoftmaxPolicy, states, actions, weights, lr: float):
    """One ascent step on mean_j weights[j] * log pi(actions[j] | states[j]).

    Weights are treated as constants. Returns (updated policy, objective
    value before the step).
    """
    x = _as_batch(policy.spec, states)
    actions = np.asarray(actions, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    batch = x.shape[0]
    if actions.shape != (batch,) or weights.shape != (batch,):
        raise ShapeError("states, actions and weights must have matching batch size")
    act = _ACT_CODES[policy.spec.activation]
    logits = _kernels.mlp_forward(policy.params, policy.spec.dims, act, x)
    logp = log_softmax(logits)
    objective = float(np.mean(weights * logp[np.arange(batch), actions]))
    gy = -softmax(logits)
    gy[np.arange(batch), actions] += 1.0
    gy *= (weights / batch)[:, None]
    grad, _ = _kernels.mlp_vjp(policy.params, policy.spec.dims, act, x, gy)
    new_params = sgd_step(policy.params, -grad, lr)
    return with_params(policy, new_params), objective


def value_regression_step(critic: ValueFunction, states, targets, lr: float):
    """One SGD step on mean squared error against fixed targets.

    Returns (updated critic, loss before the step).
    """
    x = _as_batch(critic.spec, states)
    targets = np.asarray(targets, dtype=np.float64)
    batch = x.shape[0]
    if targets.shape != (batch,):
        raise ShapeError("targets must match batch size")
    act = _ACT_CODES[critic.spec.activation]
    out = _kernels.mlp_forward(critic.params, critic.spec.dims, act, x)[:, 0]
    residual = out - targets
    loss = float(np.mean(residual**2))
    gy = (2.0 / batch) * residual[:, None]
    grad, _ = _kernels.mlp_vjp(critic.params, critic.spec.dims, act, x, gy)
    new_params = sgd_step(critic.params, grad, lr)
    return with_params(critic, new_params), loss


# --- checkpoints -------------------------------------------------------------


def save_checkpoint(model, path) -> None:
    """Write {spec, params} JSON; restores bit-identically."""
    doc = {"spec": model.spec.to_dict(), "params": model.params.tolist()}
    if isinstance(model, ActionValueFunction):
        doc["action_dim"] = model.action_dim
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _load_doc(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_policy(path) -> SoftmaxPolicy:
    doc = _load_doc(path)
    return SoftmaxPolicy(spec=MlpSpec.from_dict(doc["spec"]), params=np.asarray(doc["params"]))


def load_value(path) -> ValueFunction:
    doc = _load_doc(path)
    return ValueFunction(spec=MlpSpec.from_dict(doc["spec"]), params=np.asarray(doc["params"]))
