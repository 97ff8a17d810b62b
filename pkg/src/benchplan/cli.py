"""Command-line pipeline: gen, fit, plan, eval, report.

Exit codes: 0 success, 1 usage error, 2 missing or mismatched artifacts,
3 acceptance-threshold failure (including a planner that finds no plan).
The default artifact directory can be set via BENCHPLAN_ARTIFACTS.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import artifacts
from .evaluate import interpretability_report, run_experiment
from .fitting import FitConfig, fit_pipeline
from .mdp import NoPlanFound, plan
from .symbols import symbolize
from .taskgen import (
    N_TYPES,
    generate_dataset,
    make_unseen_object_split,
    make_unseen_task_split,
)
from .token_maps import rollout, token_mse
from .workbench import CONCEPTS, EnvConfig, ObjectState

ENV_ARTIFACT_DIR = "BENCHPLAN_ARTIFACTS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ARTIFACTS = 2
EXIT_THRESHOLD = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _artifact_dir(args) -> str:
    if args.artifacts:
        return args.artifacts
    return os.environ.get(ENV_ARTIFACT_DIR, "artifacts")


def cmd_gen(args) -> int:
    if args.variant == "unseen_task":
        dataset = make_unseen_task_split(args.level, (args.train, args.val, args.test),
                                         args.seed)
    else:
        dataset = generate_dataset(args.level, (args.train, args.val, args.test),
                                   args.seed, codebook_seed=args.codebook_seed)
        if args.variant == "unseen_object":
            held = set(range(N_TYPES, N_TYPES + args.unseen_types))
            dataset = make_unseen_object_split(dataset, held)
    artifacts.save_dataset(args.out, dataset)
    lengths = [len(t.gt_actions) for t in dataset.tasks]
    print(f"wrote {len(dataset.tasks)} level-{args.level} tasks to {args.out} "
          f"(variant {dataset.variant}, mean gt length {np.mean(lengths):.2f}, "
          f"max {max(lengths)})")
    return EXIT_OK


def cmd_fit(args) -> int:
    dataset = artifacts.load_dataset(args.data)
    config = FitConfig(dim=args.dim, min_sep=args.min_sep, noise_sigma=args.sigma,
                       thresh=args.thresh, seed=args.seed, restarts=args.restarts)
    fitted = fit_pipeline(dataset, config)
    out = _artifact_dir(args)
    artifacts.save_fitted(out, fitted)
    print(f"fit {len(dataset.subset('train'))} training tasks -> {out}")
    for name, p in zip(CONCEPTS, fitted.train_purity):
        print(f"  purity[{name}] = {p:.4f}")
    print(f"  transition keys: {', '.join(fitted.model.action_keys)}")
    return EXIT_OK


def _parse_state(text: str) -> ObjectState:
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 6:
        raise ValueError("state spec needs 6 comma-separated ints: "
                         "type,x,y,rot,color,size")
    return ObjectState(*parts)


def _adhoc_task(args):
    from .taskgen import Task, oracle_shortest_plan
    obstacles = tuple(tuple(int(v) for v in c.split(","))
                      for c in args.obstacles.split(";")) if args.obstacles else ()
    dyer = tuple(int(v) for v in args.dyer.split(",")) if args.dyer else None
    env = EnvConfig(level=args.level, obstacles=obstacles, dyer=dyer,
                    dyer_color=args.dyer_color)
    init, goal = _parse_state(args.init), _parse_state(args.goal)
    try:
        gt = oracle_shortest_plan(env, init, goal)
    except Exception:
        gt = ()
    return Task(env=env, init=init, goal=goal, gt_actions=gt, task_id="adhoc")


def cmd_plan(args) -> int:
    fitted = artifacts.load_fitted(_artifact_dir(args))
    if args.task_id:
        dataset = artifacts.load_dataset(args.data)
        artifacts.check_compatible(dataset, fitted)
        matches = [t for t in dataset.tasks if t.task_id == args.task_id]
        if not matches:
            raise artifacts.MissingArtifact(f"task {args.task_id!r} not in {args.data}")
        task = matches[0]
    else:
        task = _adhoc_task(args)
    from .evaluate import _masks_for
    from .concepts import encode
    rng = np.random.default_rng([args.seed, 3])
    init_tokens = encode(task.init, fitted.codebook, args.sigma, rng)
    goal_tokens = encode(task.goal, fitted.codebook, args.sigma, rng)
    masks = _masks_for(task, fitted)
    init_sym = symbolize(init_tokens, fitted.symbolizer)
    goal_sym = symbolize(goal_tokens, fitted.symbolizer)
    l_max = args.l_max if args.l_max else task.env.max_len
    try:
        result = plan(fitted.model, init_sym, goal_sym, masks,
                      top_k=args.topk, l_max=l_max)
    except NoPlanFound as err:
        print(f"no plan found: {err}", file=sys.stderr)
        return EXIT_THRESHOLD
    print(f"task {task.task_id} (level {task.env.level}, "
          f"gt length {len(task.gt_actions)})")
    for i, p in enumerate(result.plans, 1):
        seq = " ".join(p.actions) if p.actions else "(empty plan)"
        print(f"  {i}. {seq}  [score {p.score:.6f}]")
    trace = rollout(init_tokens, result.best.actions, fitted.maps)
    print(f"token rollout: final mse to goal tokens "
          f"{token_mse(trace[-1], goal_tokens):.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = artifacts.load_dataset(args.data)
    fitted = artifacts.load_fitted(_artifact_dir(args))
    artifacts.check_compatible(dataset, fitted)
    sigma = fitted.config.noise_sigma if args.sigma is None else args.sigma
    config_fields = dict(data=os.path.basename(args.data), sigma=sigma,
                         top_k=args.topk, l_max=args.l_max if args.l_max else "env",
                         seed=args.seed)
    planners = ["symbolic"]
    if args.baseline_chance or args.compare:
        planners.append("chance")
    if args.compare:
        planners.append("token")
    reports = {}
    for planner in planners:
        report = run_experiment(dataset, fitted, planner=planner, split=args.split,
                                noise_sigma=sigma, top_k=args.topk,
                                l_max=args.l_max, seed=args.seed, jobs=args.jobs)
        reports[planner] = report
        artifacts.save_report(args.out, report, config_fields)
        ase_txt = f"{report.ase:.4f}" if report.ase is not None else "absent"
        print(f"{planner:9s} top1 {report.asacc_top1:6.2f}%  "
              f"top5 {report.asacc_top5:6.2f}%  ase {ase_txt}  "
              f"fsd {report.fsd_mean:.4f}")
    if args.min_top1 is not None and reports["symbolic"].asacc_top1 < args.min_top1:
        print(f"top-1 ASAcc {reports['symbolic'].asacc_top1:.2f}% below "
              f"threshold {args.min_top1:.2f}%", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_report(args) -> int:
    fitted = artifacts.load_fitted(_artifact_dir(args))
    rep = interpretability_report(fitted.maps, fitted.codebook,
                                  samples=args.samples, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "displacement.tsv"), "w") as fh:
        fh.write(rep.to_text())
    with open(os.path.join(args.out, "position_changes.tsv"), "w") as fh:
        fh.write(rep.position_tsv())
    print(rep.to_text())
    print("dominant concept per action:")
    for action, concept in rep.argmax_concepts().items():
        print(f"  {action:14s} -> {concept}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="benchplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a task dataset")
    p.add_argument("--level", type=int, choices=(1, 2, 3, 4), required=True)
    p.add_argument("--train", type=int, default=800)
    p.add_argument("--val", type=int, default=100)
    p.add_argument("--test", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--codebook-seed", type=int, default=None)
    p.add_argument("--variant", choices=("standard", "unseen_object", "unseen_task"),
                   default="standard")
    p.add_argument("--unseen-types", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="fit symbolizer, transition model, and maps")
    p.add_argument("--data", required=True)
    p.add_argument("--artifacts", default=None)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--min-sep", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--thresh", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plan", help="plan one task and print the top-k sequences")
    p.add_argument("--artifacts", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--task-id", default=None)
    p.add_argument("--level", type=int, choices=(1, 2, 3, 4), default=1)
    p.add_argument("--init", default=None, help="type,x,y,rot,color,size")
    p.add_argument("--goal", default=None)
    p.add_argument("--obstacles", default=None, help="x,y;x,y")
    p.add_argument("--dyer", default=None, help="x,y")
    p.add_argument("--dyer-color", type=int, default=None)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="evaluate the planner on a dataset split")
    p.add_argument("--data", required=True)
    p.add_argument("--artifacts", default=None)
    p.add_argument("--out", default="reports")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--sigma", type=float, default=None,
                   help="eval-time token noise (default: the fit's sigma)")
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--baseline-chance", action="store_true")
    p.add_argument("--compare", action="store_true",
                   help="also run the chance baseline and the token-space planner")
    p.add_argument("--min-top1", type=float, default=None,
                   help="exit 3 when symbolic top-1 ASAcc falls below this")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="emit interpretability tables from fitted maps")
    p.add_argument("--artifacts", default=None)
    p.add_argument("--out", default="reports")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "plan" and not args.task_id and not (args.init and args.goal):
            parser.error("plan needs either --task-id with --data, or --init and --goal")
        if args.command == "plan" and args.task_id and not args.data:
            parser.error("--task-id needs --data")
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (artifacts.MissingArtifact, artifacts.SchemaMismatch) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ARTIFACTS


if __name__ == "__main__":
    sys.exit(main())
