"""Meta-performance signals for the three training strategies.

Exploration rewards normalized best-so-far progress; guided learning
rewards closeness to a teacher population via a normalized directed
Hausdorff distance (implemented exactly as the max-min formula); the
synergized signal adds both, replacing the true optimum with a running
surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

STRATEGIES = ("explore", "guided", "synergized")


@dataclass
class RewardConfig:
    strategy: str = "synergized"
    lam: float = 1.0
    y_opt: float | None = None       # required by the explore strategy
    surrogate: float = np.inf        # running surrogate optimum

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; one of {STRATEGIES}")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


def r_explore(best_t: float, best_0: float, opt: float) -> float:
    """-(best_t - opt) / (best_0 - opt); 0 when the task starts solved."""
    denom = best_0 - opt
    if denom <= 0:
        return 0.0
    return -(best_t - opt) / denom


def r_guided(student: np.ndarray, teacher: np.ndarray,
             x_min: float, x_max: float) -> float:
    """Negated directed Hausdorff distance from student rows to teacher rows,
    normalized by the box width."""
    if len(student) == 0 or len(teacher) == 0:
        raise ValueError("populations must be non-empty")
    if x_max <= x_min:
        raise ValueError("x_max must exceed x_min")
    d = cdist(np.atleast_2d(student), np.atleast_2d(teacher))
    return float(-np.max(np.min(d, axis=1)) / (x_max - x_min))


def r_synergized(explore_part: float, guided_part: float, lam: float) -> float:
    return explore_part + lam * guided_part


def update_surrogate(surrogate: float, student_best: float, teacher_best: float) -> float:
    return min(surrogate, student_best, teacher_best)
