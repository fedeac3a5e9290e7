"""A single optimization episode driven by an (untrained) rule policy.

Each generation the policy reads nine landscape features, samples one
symbolic update rule, and the whole population moves by that rule.  The
episode records the best-so-far curve and every sampled rule.
"""

import collections

import numpy as np

from symbopt import (EpisodeConfig, init_params, run_episode, to_infix)
from symbopt.episodes import policy_features, write_trajectory_csv
from symbopt.population import init_population
from symbopt.problems import instance_from_seed

problem = instance_from_seed("Rastrigin", 2, seed=7)
params, critic = init_params(seed=0)

# Peek at the features the policy consumes at generation 0.
rng = np.random.default_rng(1)
pop = init_population(problem, ps=20, rng=rng, horizon=30)
names = ["s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9"]
for name, v in zip(names, policy_features(pop)):
    print(f"{name} = {v: .4f}")

# Run a 30-generation explore episode (no teacher; the reward needs the
# instance's known optimum).
config = EpisodeConfig(strategy="explore", ps=20, horizon=30)
traj = run_episode(params, critic, problem, config, np.random.default_rng(1))

print(f"\nfunction evaluations: {traj.function_evals}")
print(f"best value: {traj.best_curve[0]:.4f} -> {traj.final_best_val:.4f}"
      f"  (optimum {problem.y_opt:.4f})")
print(f"reward range: [{traj.rewards.min():.4f}, {traj.rewards.max():.4f}]")

counts = collections.Counter(to_infix(r) for r in traj.rules)
print("\nmost common rules this episode:")
for text, n in counts.most_common(5):
    print(f"  {n:3d}x  {text}")

write_trajectory_csv(traj, "trajectory.csv")
print("\nper-generation log written to trajectory.csv")
