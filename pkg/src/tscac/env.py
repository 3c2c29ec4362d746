"""Seeded synthetic short-video sessions.

One dense response (watch time) plus configurable sparse binary responses
(interactions). Each user draws a latent topic preference; watch time is a
softplus of preference-video affinity plus noise, and each sparse channel
fires with a sigmoid rate centered on its configured base rate. Sessions
terminate geometrically (leave probability per step) with a hard cap.

The per-channel ``interaction_align`` knob sets the cosine between a user's
interaction affinity and their watch-time preference, which is how partially
conflicting objectives are produced: negative alignment makes videos that
are watched long unlikely to be interacted with, and vice versa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .approx import SoftmaxPolicy, sample_action
from .core import DENSE, SPARSE, ResponseSpec, Session, Transition, write_sessions
from .errors import ConfigError
from .seeding import derive_rng

DEFAULT_BASE_RATES = (0.377, 0.0161, 0.0024)
DEFAULT_INTERACTION_NAMES = ("click", "like", "comment")


@dataclass(frozen=True)
class SimulatorConfig:
    n_topics: int = 8
    n_videos: int = 20
    state_dim: int = 0  # 0 means: derive from n_topics and history_len
    user_pref_scale: float = 1.0
    watchtime_scale: float = 1.0
    watchtime_noise: float = 0.3
    interaction_base_rates: tuple = DEFAULT_BASE_RATES
    interaction_names: tuple = DEFAULT_INTERACTION_NAMES
    interaction_align: tuple = ()
    interaction_affinity_scale: float = 1.0
    leave_prob: float = 0.1
    max_session_len: int = 40
    history_len: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "interaction_base_rates", tuple(self.interaction_base_rates))
        object.__setattr__(self, "interaction_names", tuple(self.interaction_names))
        align = tuple(self.interaction_align) or (0.0,) * self.n_interactions
        object.__setattr__(self, "interaction_align", align)
        if self.state_dim == 0:
            object.__setattr__(self, "state_dim", self.derived_state_dim())
        self._validate()

    def _validate(self):
        if self.n_topics < 1:
            raise ConfigError("simulator.n_topics: must be >= 1")
        if self.n_videos < 2:
            raise ConfigError("simulator.n_videos: must be >= 2")
        if self.n_interactions < 1:
            raise ConfigError("simulator.interaction_base_rates: need at least one channel")
        for k, rate in enumerate(self.interaction_base_rates):
            if not 0.0 < rate < 1.0:
                raise ConfigError(f"simulator.interaction_base_rates[{k}]: {rate} outside (0,1)")
        if len(self.interaction_names) != self.n_interactions:
            raise ConfigError("simulator.interaction_names: length must match base rates")
        if len(self.interaction_align) != self.n_interactions:
            raise ConfigError("simulator.interaction_align: length must match base rates")
        for k, a in enumerate(self.interaction_align):
            if not -1.0 <= a <= 1.0:
                raise ConfigError(f"simulator.interaction_align[{k}]: {a} outside [-1,1]")
        if not 0.0 < self.leave_prob < 1.0:
            raise ConfigError(f"simulator.leave_prob: {self.leave_prob} outside (0,1)")
        if self.max_session_len < 1:
            raise ConfigError("simulator.max_session_len: must be >= 1")
        if self.watchtime_noise < 0:
            raise ConfigError("simulator.watchtime_noise: must be >= 0")
        if not self.watchtime_scale > 0:
            raise ConfigError("simulator.watchtime_scale: must be > 0")
        if self.history_len < 1:
            raise ConfigError("simulator.history_len: must be >= 1")
        if self.state_dim != self.derived_state_dim():
            raise ConfigError(
                f"simulator.state_dim: {self.state_dim} != derived "
                f"{self.derived_state_dim()} (pref + history window + catalog mean + step)"
            )

    @property
    def n_interactions(self) -> int:
        return len(self.interaction_base_rates)

    def derived_state_dim(self) -> int:
        return (2 + self.history_len) * self.n_topics + 1

    def make_response_spec(self, discounts=None) -> ResponseSpec:
        m = 1 + self.n_interactions
        if discounts is None:
            discounts = (0.95,) * m
        return ResponseSpec(
            names=("watch_time", *self.interaction_names),
            discounts=tuple(discounts),
            sparsity=(DENSE,) + (SPARSE,) * self.n_interactions,
        )

    def to_dict(self) -> dict:
        return {
            "n_topics": self.n_topics,
            "n_videos": self.n_videos,
            "state_dim": self.state_dim,
            "user_pref_scale": self.user_pref_scale,
            "watchtime_noise": self.watchtime_noise,
            "interaction_base_rates": list(self.interaction_base_rates),
            "interaction_names": list(self.interaction_names),
            "interaction_align": list(self.interaction_align),
            "interaction_affinity_scale": self.interaction_affinity_scale,
            "leave_prob": self.leave_prob,
            "max_session_len": self.max_session_len,
            "history_len": self.history_len,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulatorConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"simulator: unknown fields {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class LatentUser:
    """Hidden per-user parameters; deterministic given the sampling seed."""

    pref: np.ndarray
    interaction_affinity: np.ndarray  # (n_interactions, n_topics)


def _softplus(x: float) -> float:
    return math.log1p(math.exp(-abs(x))) + max(x, 0.0)


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


class Simulator:
    """Synthetic environment over a fixed random video catalog.

    The catalog (unit embedding per video) is a pure function of
    ``config.seed``; all per-session randomness comes from the generator
    passed to :meth:`reset` / :meth:`step`.
    """

    def __init__(self, config: SimulatorConfig):
        self.config = config
        rng = derive_rng(config.seed, "catalog")
        raw = rng.normal(size=(config.n_videos, config.n_topics))
        self.videos = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        self.catalog_mean = self.videos.mean(axis=0)
        self._logit_base = np.array(
            [math.log(r / (1.0 - r)) for r in config.interaction_base_rates]
        )

    # state layout: pref | history window (newest first) | catalog mean | t / max_len
    def _build_state(self, user: LatentUser, history: np.ndarray, t: int) -> np.ndarray:
        cfg = self.config
        return np.concatenate(
            [user.pref, history.reshape(-1), self.catalog_mean, [t / cfg.max_session_len]]
        )

    def reset(self, rng: np.random.Generator):
        """Sample a user and the session-initial state (zeroed history)."""
        cfg = self.config
        pref = rng.uniform(-cfg.user_pref_scale, cfg.user_pref_scale, cfg.n_topics)
        p_hat = _unit(pref)
        affinity = np.empty((cfg.n_interactions, cfg.n_topics))
        for k, align in enumerate(cfg.interaction_align):
            raw = rng.normal(size=cfg.n_topics)
            ortho = _unit(raw - (raw @ p_hat) * p_hat)
            direction = align * p_hat + math.sqrt(max(0.0, 1.0 - align * align)) * ortho
            affinity[k] = cfg.interaction_affinity_scale * direction
        user = LatentUser(pref=pref, interaction_affinity=affinity)
        history = np.zeros((cfg.history_len, cfg.n_topics))
        return user, self._build_state(user, history, 0)

    def step(self, user: LatentUser, state: np.ndarray, action: int, rng: np.random.Generator):
        """Advance one request; returns (reward vector, next state, terminal)."""
        cfg = self.config
        if not 0 <= action < cfg.n_videos:
            raise IndexError(f"action {action} outside catalog of {cfg.n_videos}")
        emb = self.videos[action]
        watch = _softplus(float(user.pref @ emb) + rng.normal() * cfg.watchtime_noise)
        reward = np.empty(1 + cfg.n_interactions)
        reward[0] = watch
        scores = self._logit_base + user.interaction_affinity @ emb
        for k in range(cfg.n_interactions):
            reward[1 + k] = 1.0 if rng.random() < _sigmoid(scores[k]) else 0.0
        t = int(round(state[-1] * cfg.max_session_len))
        t_next = t + 1
        terminal = t_next >= cfg.max_session_len or rng.random() < cfg.leave_prob
        lo = cfg.n_topics
        hi = lo + cfg.history_len * cfg.n_topics
        history = state[lo:hi].reshape(cfg.history_len, cfg.n_topics)
        history = np.vstack([emb, history[:-1]])
        user_block = state[:lo]
        next_state = np.concatenate(
            [user_block, history.reshape(-1), self.catalog_mean, [t_next / cfg.max_session_len]]
        )
        return reward, next_state, bool(terminal)

    def run_session(self, policy, rng: np.random.Generator, user_id: str, seed: int = 0) -> Session:
        """Roll out one full session under ``policy`` (None = uniform)."""
        cfg = self.config
        user, state = self.reset(rng)
        transitions = []
        while True:
            if policy is None:
                action = int(rng.integers(cfg.n_videos))
                prob = 1.0 / cfg.n_videos
            else:
                action, prob = sample_action(policy, state, rng)
            reward, next_state, terminal = self.step(user, state, action, rng)
            transitions.append(
                Transition(
                    state=state,
                    action=action,
                    reward=reward,
                    next_state=next_state,
                    terminal=terminal,
                    behavior_prob=prob,
                )
            )
            state = next_state
            if terminal:
                return Session(transitions=tuple(transitions), user_id=user_id, seed=seed)


def simulate_sessions(
    config: SimulatorConfig, policy, n_sessions: int, seed: int
) -> list:
    """Independent sessions with per-session derived seeds."""
    sim = Simulator(config)
    sessions = []
    for idx in range(n_sessions):
        rng = derive_rng(seed, "session", idx)
        sessions.append(sim.run_session(policy, rng, user_id=f"u{idx:06d}", seed=seed))
    return sessions


def generate_log(config: SimulatorConfig, policy, n_sessions: int, seed: int, path) -> list:
    """Write sessions in the JSONL log format; byte-reproducible per seed."""
    sessions = simulate_sessions(config, policy, n_sessions, seed)
    try:
        write_sessions(path, sessions)
    except OSError as exc:
        raise OSError(f"cannot write session log {path}: {exc}") from exc
    return sessions
