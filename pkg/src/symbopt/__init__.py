"""Learning closed-form update rules for population-based black-box
optimization.

A small recurrent policy autoregressively generates symbolic displacement
expressions (one per generation) that move a candidate population; the
policy is meta-trained with PPO over a distribution of shifted/rotated
benchmark problems, optionally guided by a classical teacher optimizer.
Everything is plain numpy/scipy with exact analytic gradients.
"""

from .expressions import (Constant, GrammarViolation, Token, UpdateRule,
                          check_rule_invariants, encode_vte, evaluate,
                          make_rule, parse_infix, parse_rule, serialize_rule,
                          to_infix)
from .population import (FlaState, PopulationState, compute_fla,
                         init_population, population_from_positions, step)
from .problems import (CATALOG, DEFAULT_FUNCTIONS, ProblemInstance,
                       instance_from_seed, load_manifest, make_base,
                       make_instance, random_rotation, save_manifest)
from .rewards import r_explore, r_guided, r_synergized, update_surrogate
from .teachers import (TeacherState, align_student_population, init_teacher,
                       teacher_step)
from .policy import (CriticParams, PolicyParams, critic_value, generate_rule,
                     init_params, logprob_of, policy_gradient, ppo_loss,
                     prepare_batch)
from .episodes import EpisodeConfig, EpisodeTrajectory, run_episode
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .training import (TrainConfig, TrainResult, collect_rollouts, ppo_update,
                       sample_problem_batch, train)
from .evaluation import (EvalReport, RuleFrequencyReport, interpret,
                         normalize_session, run_baseline, run_policy_method)
from .config import ConfigError, load_config, save_config

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
