"""Meta-testing, baselines, session-scoped normalization and rule reports.

A comparison session runs one or more methods (trained policy, random
search, DE, PSO) over the same instance suite with the same function-
evaluation budget, then min-max normalizes each instance's best values
across *all* runs of *all* methods in the session:

    Obj = (1/K) sum_k (1/M) sum_m (f_min^{m,k} - f_min^k) / (f_max^k - f_min^k)

and reports performance = 1 - Obj per method.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .expressions import check_rule_invariants, parse_infix, to_infix
from .policy import CriticParams, PolicyParams, generate_rule
from .population import init_population, step
from .episodes import policy_features
from .teachers import init_teacher, teacher_step

BASELINE_KINDS = ("RS", "DE", "PSO")


def budget_to_horizon(budget: int, ps: int) -> int:
    """Generations affordable under a total FE budget (init costs one Ps)."""
    horizon = budget // ps - 1
    if horizon < 1:
        raise ValueError(f"budget {budget} too small for population size {ps}")
    return horizon


def _policy_episode(params: PolicyParams, critic: CriticParams, problem,
                    ps: int, horizon: int, rng: np.random.Generator,
                    rule_log: list | None = None) -> float:
    """One reward-free rollout; returns the final best value.  Tokens are
    sampled stochastically (never argmax), as during training."""
    pop = init_population(problem, ps, rng, horizon)
    for t in range(horizon):
        fla = policy_features(pop)
        rule, _, _, _ = generate_rule(params, fla, rng, return_steps=True)
        if rule_log is not None:
            rule_log.append((t, rule))
        pop = step(pop, rule, problem, rng)
    return pop.best_so_far_val


def run_policy_method(params: PolicyParams, critic: CriticParams, instances,
                      runs: int, budget: int, ps: int, seed: int) -> np.ndarray:
    """(K, M) matrix of final best values for the trained policy."""
    horizon = budget_to_horizon(budget, ps)
    values = np.empty((len(instances), runs))
    for k, inst in enumerate(instances):
        for m in range(runs):
            rng = np.random.default_rng([seed, k, m])
            values[k, m] = _policy_episode(params, critic, inst, ps, horizon, rng)
    return values


def run_baseline(kind: str, instances, runs: int, budget: int, ps: int,
                 seed: int) -> np.ndarray:
    """(K, M) best values for a classical method under the same protocol."""
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}; one of {BASELINE_KINDS}")
    values = np.empty((len(instances), runs))
    for k, inst in enumerate(instances):
        lo, hi = inst.bounds
        for m in range(runs):
            rng = np.random.default_rng([seed, k, m])
            if kind == "RS":
                xs = rng.uniform(lo, hi, size=(budget, inst.dim))
                values[k, m] = float(np.min(inst(xs)))
            else:
                horizon = budget_to_horizon(budget, ps)
                state = init_teacher(kind, inst, ps, rng)
                for _ in range(horizon):
                    state = teacher_step(state, inst, rng)
                values[k, m] = state.best_val
    return values


@dataclass
class EvalReport:
    method: str
    values: np.ndarray            # (K, M) raw best objective values
    f_min: np.ndarray             # (K,) session-wide best per instance
    f_max: np.ndarray             # (K,) session-wide worst per instance
    per_instance_obj: np.ndarray  # (K,) mean normalized objective
    obj: float
    performance: float            # 1 - obj
    log_obj: float                # log10(obj), -inf when obj == 0
    fe_per_episode: int = 0

    @property
    def instances(self) -> int:
        return self.values.shape[0]

    @property
    def runs(self) -> int:
        return self.values.shape[1]


def normalize_session(results: dict[str, np.ndarray],
                      fe_per_episode: int = 0) -> dict[str, EvalReport]:
    """Min-max normalize every method against the whole session's runs."""
    if not results:
        raise ValueError("empty session")
    shapes = {v.shape for v in results.values()}
    if len(shapes) != 1:
        raise ValueError(f"methods disagree on (instances, runs): {shapes}")
    stacked = np.concatenate([v for v in results.values()], axis=1)  # (K, M*n_methods)
    f_min = stacked.min(axis=1)
    f_max = stacked.max(axis=1)
    span = f_max - f_min
    safe_span = np.where(span > 0, span, 1.0)
    reports = {}
    for method, vals in results.items():
        norm = (vals - f_min[:, None]) / safe_span[:, None]
        norm = np.where(span[:, None] > 0, norm, 0.0)
        per_instance = norm.mean(axis=1)
        obj = float(per_instance.mean())
        reports[method] = EvalReport(
            method=method, values=vals, f_min=f_min, f_max=f_max,
            per_instance_obj=per_instance, obj=obj, performance=1.0 - obj,
            log_obj=float(np.log10(obj)) if obj > 0 else float("-inf"),
            fe_per_episode=fe_per_episode)
    return reports


REPORT_HEADER = ["method", "instance", "run", "best_value", "f_min", "f_max",
                 "normalized"]


def write_report_csv(reports: dict[str, EvalReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for method in sorted(reports):
            rep = reports[method]
            span = rep.f_max - rep.f_min
            for k in range(rep.instances):
                for m in range(rep.runs):
                    norm = ((rep.values[k, m] - rep.f_min[k]) / span[k]
                            if span[k] > 0 else 0.0)
                    writer.writerow([method, k, m, repr(float(rep.values[k, m])),
                                     repr(float(rep.f_min[k])), repr(float(rep.f_max[k])),
                                     repr(float(norm))])


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != REPORT_HEADER:
            raise ValueError(f"unexpected report header: {header}")
        return [{"method": r[0], "instance": int(r[1]), "run": int(r[2]),
                 "best_value": float(r[3]), "f_min": float(r[4]),
                 "f_max": float(r[5]), "normalized": float(r[6])}
                for r in reader]


@dataclass
class RuleFrequencyReport:
    counts: Counter
    total: int
    top_k: int = 5
    timeline: list[tuple[int, int, str]] = field(default_factory=list)  # (run, t, rule)

    @property
    def shares(self) -> dict[str, float]:
        return {rule: n / self.total for rule, n in self.counts.items()}

    def top(self) -> list[tuple[str, int, float]]:
        return [(rule, n, n / self.total)
                for rule, n in self.counts.most_common(self.top_k)]

    def format_table(self) -> str:
        lines = [f"{'rule':<50} {'count':>8} {'share':>8}"]
        for rule, n, share in self.top():
            lines.append(f"{rule:<50} {n:>8} {share:>8.4f}")
        lines.append(f"{'(total rules)':<50} {self.total:>8} {1.0:>8.4f}")
        return "\n".join(lines)


def interpret(params: PolicyParams, critic: CriticParams, problem, runs: int,
              horizon: int, ps: int, seed: int,
              top_k: int = 5) -> RuleFrequencyReport:
    """Frequency table of canonicalized rules over many seeded episodes,
    plus the full per-generation rule timeline."""
    counts: Counter = Counter()
    timeline: list[tuple[int, int, str]] = []
    for run in range(runs):
        rng = np.random.default_rng([seed, run])
        rule_log: list = []
        _policy_episode(params, critic, problem, ps, horizon, rng, rule_log)
        for t, rule in rule_log:
            text = to_infix(rule)
            counts[text] += 1
            timeline.append((run, t, text))
    report = RuleFrequencyReport(counts=counts, total=sum(counts.values()),
                                 top_k=top_k, timeline=timeline)
    # every canonical string must parse back into a structurally valid rule
    # (grid membership is not re-checked: the display format rounds constants
    # to two decimals)
    for rule_text in counts:
        check_rule_invariants(parse_infix(rule_text), require_grid=False)
    return report
