"""Classical optimizers used as demonstration policies.

DE is rand/1/bin with greedy selection; PSO is the constricted global-best
variant with per-dimension velocity clamping.  Both preserve box
feasibility and are exactly reproducible under a shared seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

TEACHER_KINDS = ("DE", "PSO")

DE_DEFAULTS = {"f": 0.5, "cr": 0.9}
PSO_DEFAULTS = {"w": 0.729, "c1": 1.49445, "c2": 1.49445}


@dataclass(frozen=True)
class TeacherState:
    kind: str
    positions: np.ndarray
    values: np.ndarray
    bounds: tuple[float, float]
    # DE parameters
    f: float = DE_DEFAULTS["f"]
    cr: float = DE_DEFAULTS["cr"]
    # PSO state and parameters
    velocities: np.ndarray | None = None
    w: float = PSO_DEFAULTS["w"]
    c1: float = PSO_DEFAULTS["c1"]
    c2: float = PSO_DEFAULTS["c2"]
    personal_best_pos: np.ndarray | None = None
    personal_best_val: np.ndarray | None = None
    global_best_pos: np.ndarray | None = None
    global_best_val: float = np.inf

    @property
    def best_val(self) -> float:
        if self.kind == "PSO":
            return float(self.global_best_val)
        return float(np.min(self.values))


def init_teacher(kind: str, problem, ps: int, rng: np.random.Generator,
                 positions: np.ndarray | None = None, **params) -> TeacherState:
    """Fresh teacher population, optionally from given generation-0 positions."""
    if kind not in TEACHER_KINDS:
        raise ValueError(f"unknown teacher kind {kind!r}; one of {TEACHER_KINDS}")
    lo, hi = problem.bounds
    if positions is None:
        positions = rng.uniform(lo, hi, size=(ps, problem.dim))
    else:
        positions = np.asarray(positions, dtype=np.float64)
    values = np.asarray(problem(positions), dtype=np.float64)
    state = TeacherState(kind=kind, positions=positions, values=values,
                         bounds=(lo, hi), **params)
    if kind == "PSO":
        best = int(np.argmin(values))
        state = replace(
            state,
            velocities=np.zeros_like(positions),
            personal_best_pos=positions.copy(),
            personal_best_val=values.copy(),
            global_best_pos=positions[best].copy(),
            global_best_val=float(values[best]),
        )
    return state


def teacher_step(state: TeacherState, problem, rng: np.random.Generator) -> TeacherState:
    if state.kind == "DE":
        return _de_step(state, problem, rng)
    return _pso_step(state, problem, rng)


def _draw_distinct(rng, ps, taken) -> np.ndarray:
    """Per-row uniform indices avoiding every row of ``taken`` (rejection)."""
    out = rng.integers(0, ps, size=ps)
    while True:
        bad = np.zeros(ps, dtype=bool)
        for t in taken:
            bad |= out == t
        if not bad.any():
            return out
        out[bad] = rng.integers(0, ps, size=int(bad.sum()))


def _de_step(state: TeacherState, problem, rng) -> TeacherState:
    ps, dim = state.positions.shape
    lo, hi = state.bounds
    x = state.positions
    idx = np.arange(ps)
    r1 = _draw_distinct(rng, ps, (idx,))
    r2 = _draw_distinct(rng, ps, (idx, r1))
    r3 = _draw_distinct(rng, ps, (idx, r1, r2))
    mutant = x[r1] + state.f * (x[r2] - x[r3])
    cross = rng.random((ps, dim)) < state.cr
    jrand = rng.integers(0, dim, size=ps)
    cross[idx, jrand] = True
    trial = np.clip(np.where(cross, mutant, x), lo, hi)
    trial_values = np.asarray(problem(trial), dtype=np.float64)
    better = trial_values < state.values
    return replace(
        state,
        positions=np.where(better[:, None], trial, x),
        values=np.where(better, trial_values, state.values),
    )


def _pso_step(state: TeacherState, problem, rng) -> TeacherState:
    ps, dim = state.positions.shape
    lo, hi = state.bounds
    vmax = 0.5 * (hi - lo)
    r1 = rng.random((ps, dim))
    r2 = rng.random((ps, dim))
    vel = (state.w * state.velocities
           + state.c1 * r1 * (state.personal_best_pos - state.positions)
           + state.c2 * r2 * (state.global_best_pos - state.positions))
    vel = np.clip(vel, -vmax, vmax)
    pos = np.clip(state.positions + vel, lo, hi)
    values = np.asarray(problem(pos), dtype=np.float64)
    improved = values < state.personal_best_val
    pb_pos = np.where(improved[:, None], pos, state.personal_best_pos)
    pb_val = np.where(improved, values, state.personal_best_val)
    gbest = int(np.argmin(pb_val))
    return replace(
        state,
        positions=pos,
        values=values,
        velocities=vel,
        personal_best_pos=pb_pos,
        personal_best_val=pb_val,
        global_best_pos=pb_pos[gbest].copy(),
        global_best_val=float(pb_val[gbest]),
    )


def align_student_population(teacher_pop: np.ndarray, teacher_vals: np.ndarray,
                             target_size: int, bounds: tuple[float, float],
                             rng: np.random.Generator) -> np.ndarray:
    """Student initial positions derived from the teacher's population.

    Larger student: copy every teacher member and fill with uniform draws.
    Smaller or equal: sort by objective and take equally spaced ranks
    (always including the teacher's best).
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    teacher_pop = np.asarray(teacher_pop, dtype=np.float64)
    n, dim = teacher_pop.shape
    lo, hi = bounds
    if target_size > n:
        fill = rng.uniform(lo, hi, size=(target_size - n, dim))
        return np.vstack([teacher_pop, fill])
    order = np.argsort(teacher_vals, kind="stable")
    if target_size == 1:
        picks = order[:1]
    else:
        ranks = (np.arange(target_size) * (n - 1)) // (target_size - 1)
        picks = order[ranks]
    return teacher_pop[picks].copy()
