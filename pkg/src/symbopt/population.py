"""Population state for the lower-level optimization loop.

The whole population moves unconditionally by the rule's displacement
(no survivor selection); positions are clamped to the box and the realized
post-clamp displacement becomes the next velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .expressions import UpdateRule, evaluate


@dataclass(frozen=True)
class PopulationState:
    positions: np.ndarray          # Ps x D
    velocities: np.ndarray         # Ps x D, previous realized displacement
    values: np.ndarray             # Ps
    personal_best_pos: np.ndarray  # Ps x D
    personal_best_val: np.ndarray  # Ps
    best_so_far_pos: np.ndarray    # D
    best_so_far_val: float
    worst_so_far_pos: np.ndarray   # D
    worst_so_far_val: float
    gen_best_val: float
    initial_best_val: float
    bounds: tuple[float, float]
    stagnation: int = 0
    generation: int = 0
    horizon: int = 500

    @property
    def ps(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class FlaState:
    """Nine landscape features: dispersion s1-s3, objective stats s4-s6,
    time stamps s7-s9."""

    s1: float
    s2: float
    s3: float
    s4: float
    s5: float
    s6: float
    s7: float
    s8: float
    s9: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3, self.s4, self.s5,
                         self.s6, self.s7, self.s8, self.s9])


def population_from_positions(problem, positions: np.ndarray,
                              horizon: int = 500) -> PopulationState:
    """Seed all trackers from an explicit generation-0 population."""
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[0] < 2:
        raise ValueError("population size must be >= 2")
    values = np.asarray(problem(positions), dtype=np.float64)
    best = int(np.argmin(values))
    worst = int(np.argmax(values))
    return PopulationState(
        positions=positions,
        velocities=np.zeros_like(positions),
        values=values,
        personal_best_pos=positions.copy(),
        personal_best_val=values.copy(),
        best_so_far_pos=positions[best].copy(),
        best_so_far_val=float(values[best]),
        worst_so_far_pos=positions[worst].copy(),
        worst_so_far_val=float(values[worst]),
        gen_best_val=float(values[best]),
        initial_best_val=float(values[best]),
        bounds=tuple(problem.bounds),
        stagnation=0,
        generation=0,
        horizon=horizon,
    )


def init_population(problem, ps: int, rng: np.random.Generator,
                    horizon: int = 500) -> PopulationState:
    if ps < 2:
        raise ValueError("population size must be >= 2")
    lo, hi = problem.bounds
    positions = rng.uniform(lo, hi, size=(ps, problem.dim))
    return population_from_positions(problem, positions, horizon)


def step(pop: PopulationState, rule: UpdateRule, problem,
         rng: np.random.Generator) -> PopulationState:
    """Advance one generation: x <- clamp(x + rule(pop)) and refresh trackers."""
    if pop.generation >= pop.horizon:
        raise RuntimeError(f"episode horizon {pop.horizon} exhausted")
    lo, hi = pop.bounds
    displacement = evaluate(rule, pop, rng)
    new_positions = np.clip(pop.positions + displacement, lo, hi)
    velocities = new_positions - pop.positions
    values = np.asarray(problem(new_positions), dtype=np.float64)

    improved_pb = values < pop.personal_best_val
    personal_best_pos = np.where(improved_pb[:, None], new_positions, pop.personal_best_pos)
    personal_best_val = np.where(improved_pb, values, pop.personal_best_val)

    gen_best = int(np.argmin(values))
    gen_best_val = float(values[gen_best])
    gen_worst = int(np.argmax(values))

    if gen_best_val < pop.best_so_far_val:
        best_pos, best_val = new_positions[gen_best].copy(), gen_best_val
        stagnation = 0
    else:
        best_pos, best_val = pop.best_so_far_pos, pop.best_so_far_val
        stagnation = pop.stagnation + 1

    if values[gen_worst] > pop.worst_so_far_val:
        worst_pos, worst_val = new_positions[gen_worst].copy(), float(values[gen_worst])
    else:
        worst_pos, worst_val = pop.worst_so_far_pos, pop.worst_so_far_val

    return replace(
        pop,
        positions=new_positions,
        velocities=velocities,
        values=values,
        personal_best_pos=personal_best_pos,
        personal_best_val=personal_best_val,
        best_so_far_pos=best_pos,
        best_so_far_val=best_val,
        worst_so_far_pos=worst_pos,
        worst_so_far_val=worst_val,
        gen_best_val=gen_best_val,
        stagnation=stagnation,
        generation=pop.generation + 1,
    )


def default_f_scale(pop: PopulationState) -> float:
    """Objective scale used to normalize s4-s6: progress made so far."""
    return max(abs(pop.initial_best_val - pop.best_so_far_val), 1e-8)


def compute_fla(pop: PopulationState, f_scale: float) -> FlaState:
    """Landscape features of the current population.

    Distances are normalized by the box diagonal, objective gaps by
    ``f_scale``; s7 is the remaining-generation fraction, s8 the stagnation
    fraction and s9 flags a best-so-far improvement in the last step.
    """
    if pop.ps < 2:
        raise ValueError("pairwise features need at least 2 individuals")
    if f_scale <= 0:
        raise ValueError("f_scale must be positive")
    lo, hi = pop.bounds
    if hi <= lo:
        raise ValueError("degenerate search box")
    diag = np.sqrt(pop.dim) * (hi - lo)

    gen_best = int(np.argmin(pop.values))
    s1 = float(np.mean(pdist(pop.positions))) / diag
    s2 = float(np.mean(cdist(pop.positions, pop.positions[gen_best][None, :]))) / diag
    s3 = float(np.mean(cdist(pop.positions, pop.best_so_far_pos[None, :]))) / diag
    s4 = float(np.mean(pop.values - pop.best_so_far_val)) / f_scale
    s5 = float(np.mean(pop.values - pop.gen_best_val)) / f_scale
    s6 = float(np.std(pop.values)) / f_scale
    s7 = (pop.horizon - pop.generation) / pop.horizon
    s8 = pop.stagnation / pop.horizon
    s9 = 1.0 if (pop.generation > 0 and pop.stagnation == 0) else 0.0
    return FlaState(s1, s2, s3, s4, s5, s6, float(s7), float(s8), s9)
