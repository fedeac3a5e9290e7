"""Meta-level PPO training loop.

Each meta-step samples a batch of problem instances, rolls out one episode
per instance with the current policy, and buffers the transitions; every
``rollout_interval`` meta-steps the buffer is replayed for ``ppo_epochs``
full gradient passes and then cleared.  Per-meta-step randomness is derived
from (seed, step) so a resumed run continues exactly where it left off.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .episodes import EpisodeConfig, Transition, run_episode
from .policy import (CriticParams, LossConfig, PolicyParams, init_params,
                     policy_gradient, prepare_batch)
from .problems import DEFAULT_FUNCTIONS, make_instance
from .rewards import STRATEGIES
from .teachers import TEACHER_KINDS

OPTIMIZERS = ("sgd", "adam")


@dataclass
class TrainConfig:
    batch_problems: int = 32       # N: problems per meta-step
    horizon: int = 500             # T: generations per episode
    ppo_epochs: int = 3            # k: passes per update
    rollout_interval: int = 10     # n: meta-steps between updates
    gamma: float = 0.9
    learning_rate: float = 1e-3
    clip_eps: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_steps: int = 50_000
    strategy: str = "synergized"
    lam: float = 1.0
    ps: int = 100                  # student population size
    teacher_kind: str = "DE"
    teacher_ps: int = 100
    dim: int = 10
    bases: tuple[str, ...] = DEFAULT_FUNCTIONS
    seed: int = 0
    optimizer: str = "sgd"
    normalize_advantage: bool = True
    checkpoint_interval: int = 500  # meta-steps between periodic checkpoints

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; one of {STRATEGIES}")
        if self.strategy != "explore" and self.teacher_kind not in TEACHER_KINDS:
            raise ValueError(
                f"strategy {self.strategy!r} needs a teacher; unknown kind {self.teacher_kind!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; one of {OPTIMIZERS}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.ppo_epochs < 0:
            raise ValueError("ppo_epochs must be >= 0")
        for name in ("batch_problems", "horizon", "rollout_interval",
                     "learning_rate", "clip_eps", "ps", "teacher_ps", "dim",
                     "checkpoint_interval"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.checkpoint_interval % self.rollout_interval != 0:
            raise ValueError(
                "checkpoint_interval must be a multiple of rollout_interval "
                "so periodic checkpoints land on empty-buffer boundaries")
        unknown = set(self.bases) - set(DEFAULT_FUNCTIONS)
        if unknown:
            raise ValueError(f"unknown base functions: {sorted(unknown)}")

    def episode_config(self) -> EpisodeConfig:
        return EpisodeConfig(strategy=self.strategy, lam=self.lam, ps=self.ps,
                             horizon=self.horizon, teacher_kind=self.teacher_kind,
                             teacher_ps=self.teacher_ps)

    def loss_config(self) -> LossConfig:
        return LossConfig(clip_eps=self.clip_eps, value_coef=self.value_coef,
                          entropy_coef=self.entropy_coef)


def sample_problem_batch(config: TrainConfig, rng: np.random.Generator) -> list:
    """N fresh instances: base drawn uniformly (with repetition), new shift
    and rotation each."""
    bases = list(config.bases)
    picks = rng.integers(0, len(bases), size=config.batch_problems)
    return [make_instance(bases[int(i)], config.dim, rng) for i in picks]


def assign_returns(transitions: list[Transition], gamma: float) -> None:
    """Backward discounted returns and advantages for one episode, in place."""
    g = 0.0
    for tr in reversed(transitions):
        g = tr.reward + gamma * g
        tr.ret = g
        tr.old_logprob = tr.logprob
        tr.advantage = tr.ret - tr.value


def collect_rollouts(params: PolicyParams, critic: CriticParams, problems,
                     config: TrainConfig, rng: np.random.Generator) -> list[Transition]:
    """One episode per problem with independent spawned RNG streams;
    returns the flattened transition buffer with returns/advantages filled."""
    ep_cfg = config.episode_config()
    buffer: list[Transition] = []
    streams = rng.spawn(len(problems))
    for problem, stream in zip(problems, streams):
        traj = run_episode(params, critic, problem, ep_cfg, stream)
        assign_returns(traj.transitions, config.gamma)
        buffer.extend(traj.transitions)
    return buffer


class AdamState:
    """Per-tensor first/second moment accumulators (beta1=0.9, beta2=0.999)."""

    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, key: str, grad, lr: float):
        b1, b2, eps = 0.9, 0.999, 1e-8
        grad = np.asarray(grad, dtype=np.float64)
        if key not in self.m:
            self.m[key] = np.zeros_like(grad)
            self.v[key] = np.zeros_like(grad)
        self.m[key] = b1 * self.m[key] + (1 - b1) * grad
        self.v[key] = b2 * self.v[key] + (1 - b2) * grad * grad
        mhat = self.m[key] / (1 - b1 ** self.t)
        vhat = self.v[key] / (1 - b2 ** self.t)
        return lr * mhat / (np.sqrt(vhat) + eps)


def ppo_update(params: PolicyParams, critic: CriticParams,
               buffer: list[Transition], config: TrainConfig,
               adam: AdamState | None = None) -> dict:
    """k clipped-surrogate passes over the buffer; mutates params/critic.

    A non-finite loss aborts the whole update and restores the parameters
    that were in place before the first pass.
    """
    if not buffer:
        raise ValueError("empty transition buffer")
    batch = prepare_batch(buffer)
    if config.normalize_advantage:
        adv = batch.advantage
        batch.advantage = (adv - adv.mean()) / (adv.std() + 1e-8)
    loss_cfg = config.loss_config()
    backup = (params.copy(), critic.copy())
    diagnostics: dict = {}
    for _ in range(config.ppo_epochs):
        grads, critic_grads, diagnostics = policy_gradient(params, critic, batch, loss_cfg)
        if not np.isfinite(diagnostics["loss"]):
            restored, critic_restored = backup
            for name, value in restored.as_dict().items():
                getattr(params, name)[...] = value
            critic.w[...] = critic_restored.w
            critic.b = critic_restored.b
            diagnostics["aborted"] = True
            return diagnostics
        if adam is not None:
            adam.t += 1
            for name, g in grads.items():
                getattr(params, name)[...] -= adam.step(name, g, config.learning_rate)
            critic.w -= adam.step("critic_w", critic_grads["w"], config.learning_rate)
            critic.b -= float(adam.step("critic_b", critic_grads["b"], config.learning_rate))
        else:
            for name, g in grads.items():
                getattr(params, name)[...] -= config.learning_rate * g
            critic.w -= config.learning_rate * critic_grads["w"]
            critic.b -= config.learning_rate * critic_grads["b"]
    diagnostics["aborted"] = False
    return diagnostics


@dataclass
class TrainResult:
    params: PolicyParams
    critic: CriticParams
    log_records: list[dict] = field(default_factory=list)
    checkpoint_path: str | None = None
    log_path: str | None = None


def _format_record(rec: dict) -> str:
    return (f"step={rec['step']} mean_reward={rec['mean_reward']!r} "
            f"mean_return={rec['mean_return']!r} value_loss={rec['value_loss']!r} "
            f"entropy={rec['entropy']!r}")


def train(config: TrainConfig, out_dir, resume: str | None = None,
          verbose: bool = False) -> TrainResult:
    """Run the full meta-training loop.

    Writes ``train_log.txt`` (one deterministic record per meta-step; wall
    time goes to the console only, never into the log) and periodic plus
    final checkpoints under ``out_dir``.  ``resume`` restarts from a saved
    checkpoint's step counter with identical subsequent behavior.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.seed != config.seed:
            raise ValueError(f"checkpoint seed {ckpt.seed} != config seed {config.seed}")
        params, critic, start_step = ckpt.params, ckpt.critic, ckpt.step
        log_mode = "a"
    else:
        params, critic = init_params(config.seed)
        start_step = 0
        log_mode = "w"

    final_path = out_dir / "checkpoint_final.bin"
    if config.max_steps == 0 or start_step >= config.max_steps:
        save_checkpoint(final_path, params, critic, config.seed, start_step)
        return TrainResult(params=params, critic=critic,
                           checkpoint_path=str(final_path))

    adam = AdamState() if config.optimizer == "adam" else None
    buffer: list[Transition] = []
    if resume is not None:
        # Re-collect any meta-steps of a partially filled buffer so the
        # resumed run is indistinguishable from an uninterrupted one.  Each
        # meta-step's randomness derives from (seed, step), so the replay is
        # exact; those steps were already logged and never triggered updates.
        for step in range(start_step - start_step % config.rollout_interval, start_step):
            rng = np.random.default_rng([config.seed, step])
            problems = sample_problem_batch(config, rng)
            buffer.extend(collect_rollouts(params, critic, problems, config, rng))
    records: list[dict] = []
    log_path = out_dir / "train_log.txt"
    wall_start = time.monotonic()

    with open(log_path, log_mode) as log:
        for step in range(start_step, config.max_steps):
            rng = np.random.default_rng([config.seed, step])
            problems = sample_problem_batch(config, rng)
            transitions = collect_rollouts(params, critic, problems, config, rng)
            buffer.extend(transitions)

            rewards = np.array([t.reward for t in transitions])
            returns = np.array([t.ret for t in transitions])
            values = np.array([t.value for t in transitions])
            entropies = np.array([t.entropy for t in transitions])
            rec = {
                "step": step,
                "mean_reward": float(rewards.mean()),
                "mean_return": float(returns.mean()),
                "value_loss": float(np.mean((values - returns) ** 2)),
                "entropy": float(entropies.mean()),
            }
            records.append(rec)
            log.write(_format_record(rec) + "\n")

            if (step + 1) % config.rollout_interval == 0:
                ppo_update(params, critic, buffer, config, adam)
                buffer.clear()

            if (step + 1) % config.checkpoint_interval == 0:
                save_checkpoint(out_dir / f"checkpoint_{step + 1:06d}.bin",
                                params, critic, config.seed, step + 1)
            if verbose:
                elapsed = time.monotonic() - wall_start
                print(f"[{elapsed:9.1f}s] {_format_record(rec)}", file=sys.stderr)

    save_checkpoint(final_path, params, critic, config.seed, config.max_steps)
    return TrainResult(params=params, critic=critic, log_records=records,
                       checkpoint_path=str(final_path), log_path=str(log_path))
