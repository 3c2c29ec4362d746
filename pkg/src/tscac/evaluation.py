"""Offline policy evaluation over logged sessions.

Normalised capped importance sampling (per-transition rewards, ratio capped
at c, self-normalized), a ranking DCG over re-scored session items, plain
Monte-Carlo session returns, and the comparison report against a named
baseline algorithm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import approx
from .core import ResponseSpec, discounted_return
from .errors import DataError, DegenerateEvaluationError, InsufficientDataError

@dataclass(frozen=True)
class EvalConfig:
    cap_c: float = 5.0
    dcg_enabled: bool = True

    def __post_init__(self):
        if not self.cap_c > 0:
            raise ValueError(f"cap_c must be > 0, got {self.cap_c}")


def _policy_action_prob(policy, states, actions) -> np.ndarray:
    probs = approx.policy_probs_batch(policy, states)
    return probs[np.arange(len(actions)), actions]


def ncis(policy, sessions, channel: int, cap_c: float) -> float:
    """Self-normalized capped-ratio estimate of the per-step reward on one channel.

    sum w * r / sum w over every logged transition, w = min(cap_c, pi/beta).
    """
    if not cap_c > 0:
        raise ValueError("cap_c must be > 0")
    transitions = [t for s in sessions for t in s.transitions]
    if not transitions:
        raise InsufficientDataError("no transitions to evaluate")
    states = np.stack([t.state for t in transitions])
    actions = np.array([t.action for t in transitions])
    rewards = np.array([t.reward[channel] for t in transitions])
    behavior = np.array([t.behavior_prob for t in transitions])
    if np.any(behavior <= 0.0):
        raise DataError("behavior_prob must be positive")
    weights = np.minimum(cap_c, _policy_action_prob(policy, states, actions) / behavior)
    total = weights.sum()
    if total <= 0.0:
        raise DegenerateEvaluationError("all importance weights are zero")
    # sum (not dot) so the unit-weight case reduces to np.mean bit-for-bit
    return float((weights * rewards).sum() / total)


def dcg(policy, sessions, channel: int) -> float:
    """Mean positional-discounted reward after re-ranking each session by policy score.

    Items are ordered by descending pi(a_t|s_t) evaluated at each item's own
    logged state, ties keeping the logged order, then reward/log2(pos+1) is
    summed. The re-ranking definition (rather than any particular production
    ranking) is a stated choice of this library.
    """
    sessions = list(sessions)
    if not sessions:
        raise InsufficientDataError("no sessions to evaluate")
    totals = []
    for session in sessions:
        states = np.stack([t.state for t in session.transitions])
        actions = np.array([t.action for t in session.transitions])
        scores = _policy_action_prob(policy, states, actions)
        order = np.argsort(-scores, kind="stable")
        score = 0.0
        for pos, idx in enumerate(order, start=1):
            score += session.transitions[idx].reward[channel] / math.log2(pos + 1)
        totals.append(score)
    return float(np.mean(totals))


def monte_carlo_values(sessions, spec: ResponseSpec) -> np.ndarray:
    """Per-channel mean of full-session discounted returns."""
    sessions = list(sessions)
    if not sessions:
        raise InsufficientDataError("no sessions to evaluate")
    returns = np.stack([discounted_return(s, spec, 1) for s in sessions])
    return returns.mean(axis=0)


# --- comparison report -------------------------------------------------------


def compare_report(results: dict, baseline: str, lower_is_better=()) -> list:
    """Score table with percentage gaps against the baseline algorithm.

    ``results`` maps algorithm -> {channel -> score}. Returns rows of
    {algorithm, channel, score, pct_gap, gap_flag, best}; ``pct_gap`` is None
    when the baseline score is zero (the absolute gap is reported and
    flagged). Channels named in ``lower_is_better`` rank ascending and are
    marked with the down-arrow convention in the text table.
    """
    if baseline not in results:
        raise KeyError(f"baseline {baseline!r} not among results {sorted(results)}")
    lower = set(lower_is_better)
    channels = list(results[baseline])
    best = {}
    for channel in channels:
        scores = {algo: res[channel] for algo, res in results.items() if channel in res}
        pick = min if channel in lower else max
        best[channel] = pick(scores, key=lambda a: scores[a])
    rows = []
    for algo, res in results.items():
        for channel in channels:
            if channel not in res:
                continue
            score = float(res[channel])
            base = float(results[baseline][channel])
            if base == 0.0:
                pct, gap_flag = None, "absolute"
                gap = score - base
            else:
                pct, gap_flag = 100.0 * (score - base) / abs(base), ""
                gap = score - base
            rows.append(
                {
                    "algorithm": algo,
                    "channel": channel,
                    "score": score,
                    "pct_gap": pct,
                    "abs_gap": gap,
                    "gap_flag": gap_flag,
                    "best": best[channel] == algo,
                }
            )
    return rows


def report_to_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["algorithm", "channel", "score", "pct_gap", "abs_gap", "gap_flag", "best"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def report_to_text(rows, lower_is_better=()) -> str:
    """Aligned table, one line per algorithm, channels as columns."""
    lower = set(lower_is_better)
    algos = list(dict.fromkeys(r["algorithm"] for r in rows))
    channels = list(dict.fromkeys(r["channel"] for r in rows))
    cell = {(r["algorithm"], r["channel"]): r for r in rows}
    headers = ["algorithm"] + [c + ("↓" if c in lower else "") for c in channels]
    lines = []
    for algo in algos:
        line = [algo]
        for channel in channels:
            r = cell.get((algo, channel))
            if r is None:
                line.append("-")
                continue
            if r["pct_gap"] is None:
                text = f"{r['score']:.4g} ({r['abs_gap']:+.4g} abs)"
            else:
                text = f"{r['score']:.4g} ({r['pct_gap']:+.2f}%)"
            if r["best"]:
                text += " *"
            line.append(text)
        lines.append(line)
    widths = [max(len(str(row[i])) for row in [headers] + lines) for i in range(len(headers))]
    fmt = "  ".join("{:<%d}" % w for w in widths)
    out = [fmt.format(*headers)]
    out += [fmt.format(*line) for line in lines]
    return "\n".join(out)
