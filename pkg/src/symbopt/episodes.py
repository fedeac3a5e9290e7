"""Lower-level optimization episodes.

One episode runs the generated-rule optimizer for T generations on a single
problem instance, optionally in lockstep with a teacher optimizer (the
teacher moves first each generation).  It records one transition per
generation: landscape features, the sampled rule with its log-probability
and entropy, the critic value and the strategy's reward.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .expressions import UpdateRule, to_infix
from .policy import CriticParams, PolicyParams, critic_value, generate_rule
from .population import (PopulationState, compute_fla, default_f_scale,
                         init_population, population_from_positions, step)
from .rewards import (STRATEGIES, r_explore, r_guided, r_synergized,
                      update_surrogate)
from .teachers import (TEACHER_KINDS, align_student_population, init_teacher,
                       teacher_step)

# Upper bound on the objective-statistic features (s4-s6) fed to the policy
# and critic.  At generation 0 no progress exists yet, so the progress-based
# scale bottoms out at its 1e-8 floor and the raw ratios reach ~1e10, which
# destabilizes the linear critic; past ~10 the ratios carry no extra signal
# ("spread dwarfs progress"), so they are saturated here.  compute_fla itself
# stays exact.
FLA_CLIP = 10.0


def policy_features(pop: PopulationState) -> np.ndarray:
    """9-vector of landscape features, saturated for network consumption."""
    return np.minimum(compute_fla(pop, default_f_scale(pop)).as_array(), FLA_CLIP)


@dataclass
class EpisodeConfig:
    strategy: str = "synergized"
    lam: float = 1.0
    ps: int = 100
    horizon: int = 500
    teacher_kind: str = "DE"
    teacher_ps: int = 100
    max_height: int = 5

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; one of {STRATEGIES}")
        if self.strategy != "explore" and self.teacher_kind not in TEACHER_KINDS:
            raise ValueError(f"unknown teacher kind {self.teacher_kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.ps < 2:
            raise ValueError("population size must be >= 2")


@dataclass
class Transition:
    fla: np.ndarray            # 9-vector fed to the policy
    rule: UpdateRule
    logprob: float
    entropy: float
    value: float               # critic baseline at sampling time
    reward: float
    steps: tuple               # per-token decision trace for exact replay
    old_logprob: float = 0.0   # filled by the trainer
    ret: float = 0.0           # discounted return, filled by the trainer
    advantage: float = 0.0     # filled by the trainer


@dataclass
class EpisodeTrajectory:
    transitions: list[Transition]
    best_curve: list[float]    # best-so-far value, length T+1 (init + each gen)
    rules: list[UpdateRule] = field(default_factory=list)
    final_best_val: float = np.inf
    function_evals: int = 0    # student-side objective evaluations: Ps*(T+1)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions])


def run_episode(params: PolicyParams, critic: CriticParams, problem,
                config: EpisodeConfig, rng: np.random.Generator) -> EpisodeTrajectory:
    """Run T synchronized generations and return the recorded trajectory.

    For the guided and synergized strategies the teacher population is
    created first and the student's generation-0 positions are sampled from
    it; each generation the teacher moves before the student.  The
    synergized strategy tracks a running surrogate optimum (best value seen
    by either population) in place of the unknown true optimum.
    """
    lo, hi = problem.bounds
    use_teacher = config.strategy != "explore"

    if use_teacher:
        teacher = init_teacher(config.teacher_kind, problem, config.teacher_ps, rng)
        student_pos = align_student_population(
            teacher.positions, teacher.values, config.ps, (lo, hi), rng)
        pop = population_from_positions(problem, student_pos, config.horizon)
        surrogate = update_surrogate(np.inf, pop.initial_best_val, teacher.best_val)
    else:
        teacher = None
        if problem.y_opt is None:
            raise ValueError("the explore strategy needs a problem with a known optimum")
        pop = init_population(problem, config.ps, rng, config.horizon)
        surrogate = np.inf

    transitions: list[Transition] = []
    best_curve = [pop.best_so_far_val]

    for _ in range(config.horizon):
        if use_teacher:
            teacher = teacher_step(teacher, problem, rng)

        fla = policy_features(pop)
        rule, logprob, entropy, steps = generate_rule(
            params, fla, rng, max_height=config.max_height, return_steps=True)
        value = critic_value(critic, fla)

        pop = step(pop, rule, problem, rng)

        if config.strategy == "explore":
            reward = r_explore(pop.best_so_far_val, pop.initial_best_val, problem.y_opt)
        elif config.strategy == "guided":
            reward = r_guided(pop.positions, teacher.positions, lo, hi)
        else:
            surrogate = update_surrogate(surrogate, pop.best_so_far_val, teacher.best_val)
            explore_part = r_explore(pop.best_so_far_val, pop.initial_best_val, surrogate)
            guided_part = r_guided(pop.positions, teacher.positions, lo, hi)
            reward = r_synergized(explore_part, guided_part, config.lam)

        transitions.append(Transition(fla=fla, rule=rule, logprob=logprob,
                                      entropy=entropy, value=value,
                                      reward=reward, steps=steps))
        best_curve.append(pop.best_so_far_val)

    return EpisodeTrajectory(
        transitions=transitions,
        best_curve=best_curve,
        rules=[t.rule for t in transitions],
        final_best_val=pop.best_so_far_val,
        function_evals=config.ps * (config.horizon + 1),
    )


def write_trajectory_csv(traj: EpisodeTrajectory, path) -> None:
    """Per-generation dump: t, best-so-far value, canonical rule string."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "best_so_far_val", "rule"])
        for t, tr in enumerate(traj.transitions):
            writer.writerow([t, repr(traj.best_curve[t + 1]), to_infix(tr.rule)])


def read_trajectory_csv(path) -> list[tuple[int, float, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "best_so_far_val", "rule"]:
            raise ValueError(f"unexpected trajectory header: {header}")
        return [(int(r[0]), float(r[1]), r[2]) for r in reader]
