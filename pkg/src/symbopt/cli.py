"""Command-line entry points.

Subcommands: ``train``, ``test``, ``baseline``, ``interpret`` and
``suite gen``.  Every command exits 0 on success and 1 with a named error
class on stderr otherwise.  All outputs (logs, CSV reports, rule tables)
are deterministic given the same config and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import ConfigError, load_config
from .evaluation import (BASELINE_KINDS, interpret, normalize_session,
                         run_baseline, run_policy_method, write_report_csv)
from .problems import (DEFAULT_FUNCTIONS, generate_manifest_entries,
                       instance_from_seed, load_manifest, save_manifest)
from .training import TrainConfig, train


def _add_train(sub):
    p = sub.add_parser("train", help="meta-train a rule-generating policy")
    p.add_argument("--config", help="JSON config file (empty file = defaults)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--max-steps", type=int, help="override max meta-steps")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--verbose", action="store_true",
                   help="echo progress with wall time to stderr")


def _add_eval_common(p):
    p.add_argument("--suite", required=True, help="instance manifest JSON")
    p.add_argument("--runs", type=int, default=5, help="runs per instance")
    p.add_argument("--budget", type=int, default=50_000,
                   help="function evaluations per run")
    p.add_argument("--ps", type=int, default=100, help="population size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")


def _add_test(sub):
    p = sub.add_parser("test", help="meta-test a checkpoint on a suite")
    p.add_argument("--checkpoint", required=True)
    _add_eval_common(p)
    p.add_argument("--with-baseline", action="append", default=[],
                   choices=BASELINE_KINDS, metavar="KIND",
                   help="also run a baseline in the same normalization session "
                        "(repeatable; one of RS, DE, PSO)")


def _add_baseline(sub):
    p = sub.add_parser("baseline", help="run a classical baseline on a suite")
    p.add_argument("--kind", required=True, choices=BASELINE_KINDS)
    _add_eval_common(p)


def _add_interpret(sub):
    p = sub.add_parser("interpret", help="rule-frequency report for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--base", default="Rastrigin", choices=DEFAULT_FUNCTIONS)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--problem-seed", type=int, default=0,
                   help="seed fixing the instance's shift and rotation")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--horizon", type=int, default=100, help="generations per run")
    p.add_argument("--ps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--out", required=True, help="output directory")


def _add_suite(sub):
    p = sub.add_parser("suite", help="instance-suite utilities")
    ssub = p.add_subparsers(dest="suite_command", required=True)
    g = ssub.add_parser("gen", help="generate a reproducible instance manifest")
    g.add_argument("--count", type=int, default=32, help="number of instances")
    g.add_argument("--dim", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="manifest path")


def _cmd_train(args) -> int:
    config = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.max_steps is not None:
        overrides["max_steps"] = args.max_steps
    if overrides:
        config = TrainConfig(**{**config.__dict__, **overrides})
    result = train(config, args.out, resume=args.resume, verbose=args.verbose)
    print(f"trained {config.max_steps} meta-steps; "
          f"final checkpoint: {result.checkpoint_path}")
    return 0


def _write_session(reports, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out_dir / "report.csv")
    with open(out_dir / "summary.txt", "w") as fh:
        for method in sorted(reports):
            rep = reports[method]
            fh.write(f"method={method} obj={rep.obj!r} "
                     f"performance={rep.performance!r}\n")
    for method in sorted(reports):
        rep = reports[method]
        print(f"{method}: performance={rep.performance:.4f} (obj={rep.obj:.4f})")


def _cmd_test(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    instances = load_manifest(args.suite)
    results = {"policy": run_policy_method(ckpt.params, ckpt.critic, instances,
                                           args.runs, args.budget, args.ps,
                                           args.seed)}
    for kind in dict.fromkeys(args.with_baseline):
        results[kind] = run_baseline(kind, instances, args.runs, args.budget,
                                     args.ps, args.seed)
    _write_session(normalize_session(results, fe_per_episode=args.budget), args.out)
    return 0


def _cmd_baseline(args) -> int:
    instances = load_manifest(args.suite)
    values = run_baseline(args.kind, instances, args.runs, args.budget,
                          args.ps, args.seed)
    _write_session(normalize_session({args.kind: values},
                                     fe_per_episode=args.budget), args.out)
    return 0


def _cmd_interpret(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    problem = instance_from_seed(args.base, args.dim, args.problem_seed)
    report = interpret(ckpt.params, ckpt.critic, problem, args.runs,
                       args.horizon, args.ps, args.seed, args.top_k)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = report.format_table()
    with open(out_dir / "rule_frequency.txt", "w") as fh:
        fh.write(table + "\n")
    with open(out_dir / "rule_timeline.csv", "w") as fh:
        fh.write("run,t,rule\n")
        for run, t, rule in report.timeline:
            fh.write(f'{run},{t},"{rule}"\n')
    print(table)
    return 0


def _cmd_suite(args) -> int:
    entries = generate_manifest_entries(args.count, args.dim, args.seed)
    save_manifest(args.out, entries)
    print(f"wrote {len(entries)} instances to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="symbopt",
        description="Train, evaluate and inspect learned symbolic update "
                    "rules for population-based black-box optimization.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_train(sub)
    _add_test(sub)
    _add_baseline(sub)
    _add_interpret(sub)
    _add_suite(sub)
    args = parser.parse_args(argv)
    handlers = {"train": _cmd_train, "test": _cmd_test, "baseline": _cmd_baseline,
                "interpret": _cmd_interpret, "suite": _cmd_suite}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
