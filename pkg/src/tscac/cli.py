"""Experiment orchestration and command-line entry point.

Subcommands mirror the experimental pipeline: ``simulate`` writes behavior
logs, ``train`` runs one algorithm over the configured seeds, ``sweep``
crosses a multiplier grid with the seeds, ``evaluate`` scores a policy
checkpoint against a log, and ``report`` assembles the comparison table.

All randomness flows from one root seed per run; component streams are
derived by hashing the root with a component path (see ``tscac.seeding``),
so every artifact under the output directory is byte-reproducible from
(config, seed). Output files are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import actors, approx, critics, evaluation
from ._kernels import BACKEND
from .actors import LagrangeWeights, PolicyBank
from .core import (
    ReplayBuffer,
    ResponseSpec,
    Transition,
    buffer_push,
    buffer_sample,
    read_sessions,
)
from .env import Simulator, SimulatorConfig, generate_log, simulate_sessions
from .errors import ConfigError, TscacError
from .evaluation import EvalConfig
from .seeding import derive_rng, derive_seed

ALGORITHMS = ("tscac", "rcpo", "rcpo_multi", "bc", "stage_one_only")
DEFAULT_LAMBDA_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
METRICS_EVERY = 100


# --- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class TrainingConfig:
    iterations: int = 20000
    batch_size: int = 64
    lr_actor: float = 1e-3
    lr_critic: float = 1e-2
    w_max: float | None = 20.0
    off_policy: bool = False
    clip_c: float = 10.0
    critic_warmup: int = 0
    buffer_capacity: int = 10000
    hidden: tuple = (32, 32)
    init_scale: float = 0.1
    eval_sessions: int = 300
    offline_sessions: int = 2000
    log_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(self.hidden))
        if self.iterations < 1:
            raise ConfigError("training.iterations: must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("training.batch_size: must be >= 1")
        if not self.lr_actor > 0 or not self.lr_critic > 0:
            raise ConfigError("training.lr_actor/lr_critic: must be > 0")
        if self.w_max is not None and not self.w_max > 0:
            raise ConfigError("training.w_max: must be > 0 or null")
        if not self.clip_c > 0:
            raise ConfigError("training.clip_c: must be > 0")
        if self.buffer_capacity < self.batch_size:
            raise ConfigError("training.buffer_capacity: must be >= batch_size")
        if self.critic_warmup < 0 or self.critic_warmup >= self.iterations:
            raise ConfigError("training.critic_warmup: must be in [0, iterations)")
        if self.eval_sessions < 1:
            raise ConfigError("training.eval_sessions: must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    simulator: SimulatorConfig
    algorithm: str
    lambdas: LagrangeWeights
    training: TrainingConfig
    eval: EvalConfig
    seeds: tuple
    output_dir: str
    discounts: tuple | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: {self.algorithm!r} not one of {ALGORITHMS}")
        if not self.seeds:
            raise ConfigError("seeds: must be nonempty")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if len(self.lambdas.lambdas) != self.simulator.n_interactions:
            raise ConfigError(
                f"lambdas: need {self.simulator.n_interactions} values, "
                f"got {len(self.lambdas.lambdas)}"
            )
        if self.discounts is not None:
            object.__setattr__(self, "discounts", tuple(float(g) for g in self.discounts))
            if len(self.discounts) != 1 + self.simulator.n_interactions:
                raise ConfigError("response_spec.discounts: length must be 1 + interactions")

    @property
    def response_spec(self) -> ResponseSpec:
        return self.simulator.make_response_spec(self.discounts)


def _section(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{name}: must be an object")
    return value


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return parse_config(doc)


def parse_config(doc: dict) -> ExperimentConfig:
    simulator = SimulatorConfig.from_dict(_section(doc, "simulator"))
    training_doc = dict(_section(doc, "training"))
    if "cap_c" in training_doc:  # accepted alias for the correction-ratio clip
        training_doc.setdefault("clip_c", training_doc.pop("cap_c"))
    known = set(TrainingConfig.__dataclass_fields__)
    unknown = set(training_doc) - known
    if unknown:
        raise ConfigError(f"training: unknown fields {sorted(unknown)}")
    training = TrainingConfig(**training_doc)

    eval_doc = _section(doc, "eval")
    unknown = set(eval_doc) - set(EvalConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"eval: unknown fields {sorted(unknown)}")
    eval_cfg = EvalConfig(**eval_doc)

    lam_doc = doc.get("lambdas", {"value": 1.0})
    n_aux = simulator.n_interactions
    if isinstance(lam_doc, dict) and "values" in lam_doc:
        lambdas = LagrangeWeights(tuple(float(v) for v in lam_doc["values"]))
    elif isinstance(lam_doc, dict) and "value" in lam_doc:
        lambdas = LagrangeWeights.uniform(float(lam_doc["value"]), n_aux)
    elif isinstance(lam_doc, (int, float)):
        lambdas = LagrangeWeights.uniform(float(lam_doc), n_aux)
    else:
        raise ConfigError("lambdas: expected a number, {'value': x} or {'values': [...]}")

    spec_doc = _section(doc, "response_spec")
    discounts = spec_doc.get("discounts")

    try:
        return ExperimentConfig(
            simulator=simulator,
            algorithm=doc.get("algorithm", "tscac"),
            lambdas=lambdas,
            training=training,
            eval=eval_cfg,
            seeds=tuple(doc.get("seeds", (0,))),
            output_dir=str(doc.get("output_dir", "runs")),
            discounts=tuple(discounts) if discounts is not None else None,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# --- network construction ------------------------------------------------------


def _policy_spec(config: ExperimentConfig, seed: int, *tag) -> approx.MlpSpec:
    return approx.MlpSpec(
        input_dim=config.simulator.state_dim,
        output_dim=config.simulator.n_videos,
        hidden=config.training.hidden,
        init_seed=derive_seed(seed, "init", *tag),
        init_scale=config.training.init_scale,
    )


def _critic_spec(config: ExperimentConfig, seed: int, *tag) -> approx.MlpSpec:
    return approx.MlpSpec(
        input_dim=config.simulator.state_dim,
        output_dim=1,
        hidden=config.training.hidden,
        init_seed=derive_seed(seed, "init", *tag),
        init_scale=config.training.init_scale,
    )


def _make_ensemble(config: ExperimentConfig, seed: int) -> critics.CriticEnsemble:
    spec = config.response_spec
    vfs = tuple(
        approx.make_value(_critic_spec(config, seed, "critic", spec.names[i]))
        for i in range(spec.m)
    )
    return critics.CriticEnsemble(spec=spec, critics=vfs)


# --- data sources ---------------------------------------------------------------


class _OnPolicyStream:
    """Feeds the replay buffer by stepping the simulator with the live policy."""

    def __init__(self, sim: Simulator, rng: np.random.Generator):
        self.sim = sim
        self.rng = rng
        self.user, self.state = sim.reset(rng)

    def collect(self, policy, buffer: ReplayBuffer):
        action, prob = approx.sample_action(policy, self.state, self.rng)
        reward, next_state, terminal = self.sim.step(self.user, self.state, action, self.rng)
        buffer_push(
            buffer,
            Transition(
                state=self.state,
                action=action,
                reward=reward,
                next_state=next_state,
                terminal=terminal,
                behavior_prob=prob,
            ),
        )
        self.state = next_state
        if terminal:
            self.user, self.state = self.sim.reset(self.rng)


def _offline_transitions(config: ExperimentConfig, seed: int) -> list:
    """Logged transitions for offline training: from disk, or a fresh uniform log."""
    if config.training.log_path:
        sessions = read_sessions(config.training.log_path)
    else:
        sessions = simulate_sessions(
            config.simulator, None, config.training.offline_sessions,
            derive_seed(seed, "offline-log"),
        )
    return [t for s in sessions for t in s.transitions]


# --- training loops --------------------------------------------------------------


class MetricsLog:
    columns = (
        "stage", "channel", "iteration", "critic_loss",
        "mean_weight", "clipped_frac", "mean_advantage",
    )

    def __init__(self):
        self.rows = []

    def add(self, stage, channel, iteration, critic_loss, stats):
        self.rows.append(
            {
                "stage": stage,
                "channel": channel,
                "iteration": iteration,
                "critic_loss": critic_loss,
                "mean_weight": stats.get("mean_weight", ""),
                "clipped_frac": stats.get("clipped_frac", ""),
                "mean_advantage": stats.get("mean_advantage", ""),
            }
        )

    def write(self, path):
        _atomic_csv(path, self.columns, self.rows)


def _train_channel(config, seed, sim, ensemble, policy, channel, stage, metrics):
    """Advantage-weighted actor-critic on one reward channel.

    On-policy: the stream follows the policy being trained. Offline: batches
    come from the logged data and the first-order correction ratio applies.
    """
    t = config.training
    sample_rng = derive_rng(seed, stage, "batch")
    if t.off_policy:
        data = _offline_transitions(config, seed)
        if len(data) < t.batch_size:
            raise ConfigError("training.offline_sessions: too few logged transitions")
        stream = None
    else:
        stream = _OnPolicyStream(sim, derive_rng(seed, stage, "env"))
        buffer = ReplayBuffer(t.buffer_capacity)
    for it in range(1, t.iterations + 1):
        if stream is not None:
            stream.collect(policy, buffer)
            if len(buffer) < t.batch_size:
                continue
            batch = buffer_sample(buffer, t.batch_size, sample_rng)
        else:
            idx = sample_rng.choice(len(data), size=t.batch_size, replace=False)
            batch = [data[i] for i in idx]
        stats = {}
        if it > t.critic_warmup:
            policy, stats = actors.stage_one_actor_update(
                policy, ensemble, channel, batch, t.lr_actor,
                off_policy=t.off_policy, clip_c=t.clip_c,
            )
        ensemble, loss = critics.critic_update(ensemble, channel, batch, t.lr_critic)
        if it % METRICS_EVERY == 0 or it == t.iterations:
            metrics.add(stage, channel, it, loss, stats)
    return policy, ensemble


def _train_stage_two(config, seed, sim, ensemble, bank, metrics):
    """Projection of the main policy toward the closed-form mixture target."""
    t = config.training
    sample_rng = derive_rng(seed, "stage2", "batch")
    if t.off_policy:
        data = _offline_transitions(config, seed)
        stream = None
    else:
        stream = _OnPolicyStream(sim, derive_rng(seed, "stage2", "env"))
        buffer = ReplayBuffer(t.buffer_capacity)
    for it in range(1, t.iterations + 1):
        if stream is not None:
            stream.collect(bank.main_policy, buffer)
            if len(buffer) < t.batch_size:
                continue
            batch = buffer_sample(buffer, t.batch_size, sample_rng)
        else:
            idx = sample_rng.choice(len(data), size=t.batch_size, replace=False)
            batch = [data[i] for i in idx]
        stats = {}
        if it > t.critic_warmup:
            main, stats = actors.stage_two_actor_update(
                bank, ensemble, batch, config.lambdas, t.lr_actor,
                w_max=t.w_max, off_policy=t.off_policy,
            )
            bank = bank.with_main(main)
        ensemble, loss = critics.critic_update(ensemble, 0, batch, t.lr_critic)
        if it % METRICS_EVERY == 0 or it == t.iterations:
            metrics.add("stage2", 0, it, loss, stats)
    return bank, ensemble


def run_two_stage(config: ExperimentConfig, seed: int, stage_one_only: bool = False):
    """Full two-stage schedule for one root seed.

    Trains one frozen actor-critic pair per auxiliary channel, then the main
    policy under the multiplier-weighted closeness constraint. Returns
    (PolicyBank, CriticEnsemble, MetricsLog).
    """
    spec = config.response_spec
    sim = Simulator(config.simulator)
    metrics = MetricsLog()
    ensemble = _make_ensemble(config, seed)
    aux_policies = []
    for i in range(1, spec.m):
        policy = approx.make_policy(_policy_spec(config, seed, "aux", spec.names[i]))
        stage = f"stage1:{spec.names[i]}"
        policy, ensemble = _train_channel(
            config, seed, sim, ensemble, policy, i, stage, metrics
        )
        aux_policies.append(policy)
    main = approx.make_policy(_policy_spec(config, seed, "main"))
    bank = PolicyBank(aux_policies=tuple(aux_policies), main_policy=main)
    if stage_one_only:
        return bank.with_main(aux_policies[0]), ensemble, metrics
    bank, ensemble = _train_stage_two(config, seed, sim, ensemble, bank, metrics)
    return bank, ensemble, metrics


def _train_rcpo(config: ExperimentConfig, seed: int):
    """Scalarized-reward baseline: one policy, one critic, shared main discount."""
    t = config.training
    spec = config.response_spec
    sim = Simulator(config.simulator)
    metrics = MetricsLog()
    policy = approx.make_policy(_policy_spec(config, seed, "main"))
    critic = approx.make_value(_critic_spec(config, seed, "critic", "scalarized"))
    gamma = spec.discounts[0]
    sample_rng = derive_rng(seed, "rcpo", "batch")
    if t.off_policy:
        data = _offline_transitions(config, seed)
        stream = None
    else:
        stream = _OnPolicyStream(sim, derive_rng(seed, "rcpo", "env"))
        buffer = ReplayBuffer(t.buffer_capacity)
    for it in range(1, t.iterations + 1):
        if stream is not None:
            stream.collect(policy, buffer)
            if len(buffer) < t.batch_size:
                continue
            batch = buffer_sample(buffer, t.batch_size, sample_rng)
        else:
            idx = sample_rng.choice(len(data), size=t.batch_size, replace=False)
            batch = [data[i] for i in idx]
        if it > t.critic_warmup:
            policy, critic, stats = actors.rcpo_update(
                policy, critic, batch, config.lambdas, gamma, t.lr_actor, t.lr_critic,
                off_policy=t.off_policy, clip_c=t.clip_c,
            )
        else:
            scalar = np.concatenate(([1.0], config.lambdas.lambdas))
            critic, loss = critics.joint_critic_update(critic, batch, scalar, gamma, t.lr_critic)
            stats = {"critic_loss": loss}
        if it % METRICS_EVERY == 0 or it == t.iterations:
            metrics.add("rcpo", -1, it, stats["critic_loss"], stats)
    return policy, critic, metrics


def _train_rcpo_multi(config: ExperimentConfig, seed: int):
    """Actor on the multiplier-weighted advantage sum; per-channel critics."""
    t = config.training
    spec = config.response_spec
    sim = Simulator(config.simulator)
    metrics = MetricsLog()
    policy = approx.make_policy(_policy_spec(config, seed, "main"))
    ensemble = _make_ensemble(config, seed)
    sample_rng = derive_rng(seed, "rcpo_multi", "batch")
    if t.off_policy:
        data = _offline_transitions(config, seed)
        stream = None
    else:
        stream = _OnPolicyStream(sim, derive_rng(seed, "rcpo_multi", "env"))
        buffer = ReplayBuffer(t.buffer_capacity)
    for it in range(1, t.iterations + 1):
        if stream is not None:
            stream.collect(policy, buffer)
            if len(buffer) < t.batch_size:
                continue
            batch = buffer_sample(buffer, t.batch_size, sample_rng)
        else:
            idx = sample_rng.choice(len(data), size=t.batch_size, replace=False)
            batch = [data[i] for i in idx]
        stats = {}
        if it > t.critic_warmup:
            policy, stats = actors.rcpo_multi_critic_update(
                policy, ensemble, batch, config.lambdas, t.lr_actor,
                off_policy=t.off_policy, clip_c=t.clip_c,
            )
        loss = 0.0
        for i in range(spec.m):
            ensemble, loss_i = critics.critic_update(ensemble, i, batch, t.lr_critic)
            loss += loss_i
        if it % METRICS_EVERY == 0 or it == t.iterations:
            metrics.add("rcpo_multi", -1, it, loss, stats)
    return policy, ensemble, metrics


def _train_bc(config: ExperimentConfig, seed: int):
    """Behavior cloning on logged data (generated uniformly when no log configured)."""
    t = config.training
    metrics = MetricsLog()
    policy = approx.make_policy(_policy_spec(config, seed, "main"))
    data = _offline_transitions(config, seed)
    if len(data) < t.batch_size:
        raise ConfigError("training.offline_sessions: too few logged transitions")
    sample_rng = derive_rng(seed, "bc", "batch")
    for it in range(1, t.iterations + 1):
        idx = sample_rng.choice(len(data), size=t.batch_size, replace=False)
        batch = [data[i] for i in idx]
        policy, nll = actors.behavior_cloning_update(policy, batch, t.lr_actor)
        if it % METRICS_EVERY == 0 or it == t.iterations:
            metrics.add("bc", -1, it, nll, {})
    return policy, metrics


# --- evaluation of trained policies ----------------------------------------------


def evaluate_policy(config: ExperimentConfig, policy, seed: int) -> dict:
    """Fresh-rollout Monte-Carlo values plus NCIS/DCG against a uniform-behavior log."""
    spec = config.response_spec
    rollouts = simulate_sessions(
        config.simulator, policy, config.training.eval_sessions, derive_seed(seed, "eval", "mc")
    )
    mc = evaluation.monte_carlo_values(rollouts, spec)
    log = simulate_sessions(
        config.simulator, None, config.training.eval_sessions, derive_seed(seed, "eval", "log")
    )
    out = {}
    for i, name in enumerate(spec.names):
        out[name] = {
            "mc_value": float(mc[i]),
            "ncis": evaluation.ncis(policy, log, i, config.eval.cap_c),
        }
        if config.eval.dcg_enabled:
            out[name]["dcg"] = evaluation.dcg(policy, log, i)
    return out


# --- orchestration ----------------------------------------------------------------


def train_once(config: ExperimentConfig, seed: int, out_dir=None):
    """One (algorithm, seed) cell: train, evaluate, optionally write artifacts.

    Returns (main policy, per-channel scores dict, MetricsLog).
    """
    algo = config.algorithm
    spec = config.response_spec
    artifacts = {}
    if algo in ("tscac", "stage_one_only"):
        bank, ensemble, metrics = run_two_stage(
            config, seed, stage_one_only=algo == "stage_one_only"
        )
        policy = bank.main_policy
        for name, aux in zip(spec.names[1:], bank.aux_policies):
            artifacts[f"policy_aux_{name}.json"] = aux
        for name, critic in zip(spec.names, ensemble.critics):
            artifacts[f"critic_{name}.json"] = critic
    elif algo == "rcpo":
        policy, critic, metrics = _train_rcpo(config, seed)
        artifacts["critic_scalarized.json"] = critic
    elif algo == "rcpo_multi":
        policy, ensemble, metrics = _train_rcpo_multi(config, seed)
        for name, critic in zip(spec.names, ensemble.critics):
            artifacts[f"critic_{name}.json"] = critic
    elif algo == "bc":
        policy, metrics = _train_bc(config, seed)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"algorithm: unknown {algo!r}")
    artifacts["policy_main.json"] = policy

    scores = evaluate_policy(config, policy, seed)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for fname, model in artifacts.items():
            _atomic_checkpoint(os.path.join(out_dir, fname), model)
        metrics.write(os.path.join(out_dir, "metrics.csv"))
        _atomic_json(
            os.path.join(out_dir, "run.json"),
            {
                "algorithm": algo,
                "seed": seed,
                "lambdas": list(config.lambdas.lambdas),
                "kernel_backend": BACKEND,
            },
        )
        rows = [
            {"channel": name, **{k: v for k, v in chan.items()}}
            for name, chan in scores.items()
        ]
        cols = ["channel", "mc_value", "ncis"] + (["dcg"] if config.eval.dcg_enabled else [])
        _atomic_csv(os.path.join(out_dir, "eval.csv"), cols, rows)
    return policy, scores, metrics


def run_training(config: ExperimentConfig):
    """Run the configured algorithm for every seed under output_dir."""
    results = {}
    for seed in config.seeds:
        out_dir = os.path.join(config.output_dir, f"{config.algorithm}_seed{seed}")
        results[seed] = train_once(config, seed, out_dir)
    return results


def run_sweep(config: ExperimentConfig, grid=DEFAULT_LAMBDA_GRID, out_path=None):
    """Cross the multiplier grid with the configured seeds.

    Each cell is a full two-stage run plus evaluation; failures are recorded
    in the row's error column and the sweep continues. Returns the rows.
    """
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ConfigError("sweep grid: must be nonempty")
    spec = config.response_spec
    rows = []
    for lam in grid:
        cell_config = replace(
            config, lambdas=LagrangeWeights.uniform(lam, config.simulator.n_interactions)
        )
        for seed in config.seeds:
            try:
                _, scores, _ = train_once(cell_config, seed, out_dir=None)
                for name in spec.names:
                    rows.append(
                        {
                            "lambda": lam,
                            "seed": seed,
                            "channel": name,
                            "ncis": scores[name]["ncis"],
                            "mc_value": scores[name]["mc_value"],
                            "error": "",
                        }
                    )
            except (TscacError, OSError) as exc:
                rows.append(
                    {
                        "lambda": lam, "seed": seed, "channel": "",
                        "ncis": "", "mc_value": "", "error": str(exc),
                    }
                )
    if out_path is not None:
        _atomic_csv(out_path, ["lambda", "seed", "channel", "ncis", "mc_value", "error"], rows)
    return rows


# --- file helpers ------------------------------------------------------------------


def _atomic_write(path, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_csv(path, columns, rows):
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns))
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def _atomic_json(path, doc):
    _atomic_write(path, json.dumps(doc, indent=2) + "\n")


def _atomic_checkpoint(path, model):
    doc = {"spec": model.spec.to_dict(), "params": model.params.tolist()}
    _atomic_write(path, json.dumps(doc))


# --- command-line interface ----------------------------------------------------------


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        config = replace(config, seeds=(args.seed,))
    if getattr(args, "out", None) is not None:
        config = replace(config, output_dir=args.out)
    if getattr(args, "algo", None) is not None:
        config = replace(config, algorithm=args.algo)
    if getattr(args, "lam", None) is not None:
        config = replace(
            config,
            lambdas=LagrangeWeights.uniform(args.lam, config.simulator.n_interactions),
        )
    return config


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    policy = approx.load_policy(args.policy) if args.policy else None
    seed = config.seeds[0]
    generate_log(config.simulator, policy, args.sessions, seed, args.log_out)
    print(f"wrote {args.sessions} sessions to {args.log_out}")
    return 0


def cmd_train(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    results = run_training(config)
    for seed, (_, scores, _) in results.items():
        for channel, vals in scores.items():
            print(f"seed={seed} channel={channel} " + " ".join(f"{k}={v:.6g}" for k, v in vals.items()))
    print(f"artifacts under {config.output_dir}")
    return 0


def cmd_sweep(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    grid = tuple(float(g) for g in args.grid.split(",")) if args.grid else DEFAULT_LAMBDA_GRID
    out_path = os.path.join(config.output_dir, "sweep.csv")
    rows = run_sweep(config, grid, out_path)
    failures = sum(1 for r in rows if r["error"])
    print(f"wrote {len(rows)} rows to {out_path} ({failures} failed cells)")
    return 0


def cmd_evaluate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    policy = approx.load_policy(args.policy)
    sessions = read_sessions(args.log)
    spec = config.response_spec
    rows = []
    for i, name in enumerate(spec.names):
        row = {"channel": name, "ncis": evaluation.ncis(policy, sessions, i, config.eval.cap_c)}
        if config.eval.dcg_enabled:
            row["dcg"] = evaluation.dcg(policy, sessions, i)
        rows.append(row)
    cols = ["channel", "ncis"] + (["dcg"] if config.eval.dcg_enabled else [])
    if args.scores_out:
        _atomic_csv(args.scores_out, cols, rows)
    for row in rows:
        print(" ".join(f"{k}={v}" for k, v in row.items()))
    return 0


def cmd_report(args) -> int:
    results = {}
    for item in args.result:
        if "=" not in item:
            raise ConfigError(f"report --result: expected NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        with open(path, "r", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            results[name] = {row["channel"]: float(row[args.metric]) for row in reader}
    lower = tuple(args.lower_is_better.split(",")) if args.lower_is_better else ()
    rows = evaluation.compare_report(results, args.baseline, lower)
    if args.report_out:
        evaluation.report_to_csv(rows, args.report_out)
    print(evaluation.report_to_text(rows, lower))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tscac", description="Constrained actor-critic experiment harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override: single seed")
        p.add_argument("--out", default=None, help="override: output directory")
        p.add_argument("--algo", choices=ALGORITHMS, default=None, help="override: algorithm")
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="override: shared multiplier value")

    p = sub.add_parser("simulate", help="generate a behavior log")
    common(p)
    p.add_argument("--sessions", type=int, required=True)
    p.add_argument("--log-out", required=True, help="output JSONL path")
    p.add_argument("--policy", default=None, help="behavior policy checkpoint (default uniform)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one algorithm over the configured seeds")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="cross a multiplier grid with the seeds")
    common(p)
    p.add_argument("--grid", default=None, help="comma-separated multiplier values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="score a policy checkpoint against a log")
    common(p)
    p.add_argument("--log", required=True, help="JSONL session log")
    p.add_argument("--policy", required=True, help="policy checkpoint JSON")
    p.add_argument("--scores-out", default=None, help="write per-channel scores CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="comparison table from per-algorithm score CSVs")
    p.add_argument("--result", action="append", required=True,
                   help="NAME=eval.csv, repeatable")
    p.add_argument("--baseline", required=True)
    p.add_argument("--metric", default="ncis")
    p.add_argument("--lower-is-better", default="", help="comma-separated channel names")
    p.add_argument("--report-out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "kind": "config"}), file=sys.stderr)
        return 2
    except (TscacError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
