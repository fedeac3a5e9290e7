"""A small but real meta-training run (about a minute on one core).

Trains the rule policy with PPO under the guided strategy on 2-D sphere and
Rastrigin instances, then prints the reward trend and where the artifacts
landed.  The run is fully deterministic: re-running this script reproduces
the log and checkpoints byte for byte.
"""

import numpy as np

from symbopt import TrainConfig, train

config = TrainConfig(
    batch_problems=2,
    horizon=20,
    max_steps=60,
    rollout_interval=10,
    ppo_epochs=3,
    ps=10,
    teacher_ps=10,
    dim=2,
    bases=("Sphere", "Rastrigin"),
    strategy="guided",
    teacher_kind="DE",
    checkpoint_interval=30,
    optimizer="adam",
    seed=0,
)

result = train(config, out_dir="smoke_run", verbose=True)

rewards = np.array([rec["mean_reward"] for rec in result.log_records])
n = max(1, len(rewards) // 5)
print(f"\nmean reward, first {n} steps: {rewards[:n].mean():.4f}")
print(f"mean reward, last  {n} steps: {rewards[-n:].mean():.4f}")
print(f"final checkpoint: {result.checkpoint_path}")
print("training log:     smoke_run/train_log.txt")

# The checkpoint stores the seed and step counter, so a longer run can be
# resumed exactly:  train(config_with_more_steps, "smoke_run", resume=True)
