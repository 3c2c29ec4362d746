"""Domain types for the vector-reward decision process.

A session is one user episode; every step carries an m-vector of response
rewards (index 0 is the main response, the rest are auxiliaries). These
records are immutable; the replay buffer is the only mutable container and
is single-writer.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, ShapeError

DENSE = "dense"
SPARSE = "sparse"


@dataclass(frozen=True)
class ResponseSpec:
    """Names, discounts, sparsity classes and constraint bounds of the m response channels.

    Channel 0 is the main response. ``constraints`` holds the m-1 lower
    bounds on the auxiliary channels; entries may be None (the bounds are
    reported, never enforced: constraint strength is set through the
    multipliers instead).
    """

    names: tuple
    discounts: tuple
    sparsity: tuple
    constraints: tuple = ()

    def __post_init__(self):
        m = len(self.names)
        if m < 2:
            raise ShapeError(f"need at least 2 response channels, got {m}")
        if len(self.discounts) != m or len(self.sparsity) != m:
            raise ShapeError(
                f"names/discounts/sparsity lengths differ: "
                f"{m}/{len(self.discounts)}/{len(self.sparsity)}"
            )
        constraints = tuple(self.constraints) if self.constraints else (None,) * (m - 1)
        if len(constraints) != m - 1:
            raise ShapeError(f"constraints must have length {m - 1}, got {len(constraints)}")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "discounts", tuple(float(g) for g in self.discounts))
        object.__setattr__(self, "sparsity", tuple(self.sparsity))
        object.__setattr__(self, "constraints", constraints)
        for g in self.discounts:
            if not 0.0 < g < 1.0:
                raise ValueError(f"discount {g} outside (0,1)")
        for s in self.sparsity:
            if s not in (DENSE, SPARSE):
                raise ValueError(f"sparsity class must be 'dense' or 'sparse', got {s!r}")

    @property
    def m(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Transition:
    """One interaction step.

    ``behavior_prob`` is the probability the acting policy assigned to the
    taken action; it is stored even for on-policy data so on- and off-policy
    code paths are identical.
    """

    state: np.ndarray
    action: int
    reward: np.ndarray
    next_state: np.ndarray
    terminal: bool
    behavior_prob: float

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=np.float64))
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=np.float64))
        object.__setattr__(self, "next_state", np.asarray(self.next_state, dtype=np.float64))
        if not 0.0 < self.behavior_prob <= 1.0:
            raise ValueError(f"behavior_prob {self.behavior_prob} outside (0,1]")


def validate_transition(transition: Transition, spec: ResponseSpec) -> None:
    """Check the reward vector length against the response spec."""
    if transition.reward.shape != (spec.m,):
        raise ShapeError(
            f"reward has shape {transition.reward.shape}, expected ({spec.m},)"
        )


@dataclass(frozen=True)
class Session:
    """Ordered transitions of one user episode.

    ``seed`` is the integer that generated the session, 0 for externally
    logged data.
    """

    transitions: tuple
    user_id: str
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if len(self.transitions) < 1:
            raise ValueError("session must contain at least one transition")
        for t in self.transitions[:-1]:
            if t.terminal:
                raise ValueError("only the final transition may be terminal")
        if not self.transitions[-1].terminal:
            raise ValueError("final transition must be terminal")

    def __len__(self) -> int:
        return len(self.transitions)


def discounted_return(session: Session, spec: ResponseSpec, t: int) -> np.ndarray:
    """Per-channel discounted cumulative reward from step ``t`` (1-based) to the session end.

    Component i is sum over t' >= t of discounts[i]**(t'-t) * reward_i.
    """
    horizon = len(session)
    if not 1 <= t <= horizon:
        raise IndexError(f"step {t} outside [1, {horizon}]")
    gammas = np.asarray(spec.discounts)
    out = np.zeros(spec.m)
    for tr in reversed(session.transitions[t - 1 :]):
        validate_transition(tr, spec)
        out = tr.reward + gammas * out
    return out


class ReplayBuffer:
    """Bounded FIFO store of transitions; eviction is strictly oldest-first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.entries: deque = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.entries)


def buffer_push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.entries.append(transition)


def buffer_sample(buffer: ReplayBuffer, batch: int, rng) -> list:
    """Uniform sample of ``batch`` transitions without replacement.

    ``rng`` is an integer seed or an ``np.random.Generator``; identical seeds
    yield identical batches.
    """
    size = len(buffer)
    if size == 0 or batch > size:
        raise InsufficientDataError(f"cannot sample {batch} from buffer of size {size}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(int(rng))
    idx = rng.choice(size, size=batch, replace=False)
    return [buffer.entries[i] for i in idx]


# --- session log serialization ---------------------------------------------
#
# One session per line: {"user_id": ..., "transitions": [{"state": [...],
# "action": int, "reward": [...], "behavior_prob": float, "terminal": bool}]}
# The simulator emits this format and the evaluators accept it.


def session_to_dict(session: Session) -> dict:
    return {
        "user_id": session.user_id,
        "transitions": [
            {
                "state": tr.state.tolist(),
                "action": int(tr.action),
                "reward": tr.reward.tolist(),
                "behavior_prob": float(tr.behavior_prob),
                "terminal": bool(tr.terminal),
            }
            for tr in session.transitions
        ],
    }


def session_from_dict(doc: dict) -> Session:
    raw = doc["transitions"]
    transitions = []
    for k, tr in enumerate(raw):
        state = np.asarray(tr["state"], dtype=np.float64)
        is_last = k == len(raw) - 1
        next_state = (
            np.asarray(raw[k + 1]["state"], dtype=np.float64) if not is_last else state
        )
        next_state = np.asarray(tr.get("next_state", next_state), dtype=np.float64)
        transitions.append(
            Transition(
                state=state,
                action=int(tr["action"]),
                reward=np.asarray(tr["reward"], dtype=np.float64),
                next_state=next_state,
                terminal=bool(tr["terminal"]),
                behavior_prob=float(tr["behavior_prob"]),
            )
        )
    return Session(transitions=tuple(transitions), user_id=str(doc["user_id"]), seed=0)


def write_sessions(path, sessions) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for session in sessions:
            fh.write(json.dumps(session_to_dict(session)) + "\n")


def read_sessions(path) -> list:
    sessions = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    sessions.append(session_from_dict(json.loads(line)))
    except OSError as exc:
        raise OSError(f"cannot read session log {path}: {exc}") from exc
    return sessions
