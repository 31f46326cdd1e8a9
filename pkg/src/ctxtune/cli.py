"""Command line entry point: ``ctxtune train|replay|eval|plot``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .agents import Checkpoint, make_agent
from .context import InstanceSet
from .envs import make_env
from .errors import InvalidArgument, InvalidConfiguration, NumericError, ParseError
from .harness.config import RunConfig
from .harness.evaluation import evaluate, replay_schedule
from .harness.plotting import emit_plot
from .harness.training import INSTANCES_FILE, RUN_FILE, run_training
from .pb2 import load_schedules

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("ctxtune")


def _add_run_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--env", choices=["pendulum", "acrobot", "lander"], default=d("pendulum"))
    p.add_argument("--algorithm", choices=["ddpg", "ppo"], default=None)
    p.add_argument("--visibility", choices=["hidden", "visible"], default=d("hidden"))
    p.add_argument("--workers", type=int, default=d(8))
    p.add_argument("--interval", type=int, default=d(4096))
    p.add_argument("--steps", type=int, default=d(8 * 4096 * 10), help="total env steps across the population")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--hidden-width", type=int, default=d(64))
    p.add_argument("--outdir", default=d("runs/default"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxtune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a population under PB2")
    _add_run_flags(p)
    p.add_argument("--async", dest="asynchronous", action="store_true", help="asynchronous scheduling (not reproducible)")
    p.add_argument("--jobs", type=int, default=1, help="parallel training lanes")
    p.add_argument("--wallclock", action="store_true", help="record real elapsed seconds in metrics.csv")
    p.add_argument("--time-budget", type=float, default=None, help="stop after this many seconds; lineages are marked truncated")

    p = sub.add_parser("replay", help="retrain found schedules on fresh seeds")
    _add_run_flags(p, defaults=False)
    p.add_argument("--schedules", required=True)
    p.add_argument("--eval-seeds", type=int, nargs="*", default=[101, 102, 103, 104, 105])
    p.add_argument("--members", type=int, nargs="*", default=None, help="schedule ids to replay (default all)")
    p.add_argument("--skip-truncated", action="store_true", help="leave out lineages cut short by the time budget")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("eval", help="evaluate a run's final checkpoints on its instance set")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--eval-seeds", type=int, nargs="*", default=[101])
    p.add_argument("--episodes", type=int, default=1, help="episodes per instance")

    p = sub.add_parser("plot", help="render a learning-curve SVG")
    p.add_argument("source", help="metrics.csv or an evaluation report .json")
    p.add_argument("--out", default=None)
    p.add_argument("--band", action="store_true", help="add mean line and standard-error band")
    return parser


def _config_from_args(args, base: RunConfig | None = None) -> RunConfig:
    overrides = {
        "env": args.env,
        "algorithm": args.algorithm,
        "visibility": args.visibility,
        "workers": args.workers,
        "interval": args.interval,
        "steps": args.steps,
        "seed": args.seed,
        "hidden_width": args.hidden_width,
        "outdir": args.outdir,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if base is None:
        return RunConfig(**overrides)
    if "env" in overrides and "algorithm" not in overrides and overrides["env"] != base.env:
        overrides["algorithm"] = None
    return RunConfig.from_json({**base.to_json(), **overrides})


def cmd_train(args) -> int:
    cfg = _config_from_args(args).with_(
        synchronous=not args.asynchronous, n_jobs=args.jobs, record_wallclock=args.wallclock,
        time_budget_s=args.time_budget,
    )
    out = run_training(cfg)
    print(out)
    return EXIT_OK


def cmd_replay(args) -> int:
    schedules, doc = load_schedules(args.schedules)
    run_file = Path(args.schedules).parent / RUN_FILE
    base = RunConfig.from_json(json.loads(run_file.read_text())["config"]) if run_file.exists() else None
    cfg = _config_from_args(args, base)
    outdir = Path(args.outdir) if args.outdir else Path(args.schedules).parent / "replay"
    outdir.mkdir(parents=True, exist_ok=True)
    wanted = set(args.members) if args.members is not None else None
    summary = {}
    for sched in schedules:
        if wanted is not None and sched.member not in wanted:
            continue
        if args.skip_truncated and sched.truncated:
            continue
        report = replay_schedule(sched, cfg, args.eval_seeds, n_jobs=args.jobs)
        report.save(outdir / f"report_member_{sched.member:02d}.json")
        if report.results:
            emit_plot(report, outdir / f"curve_member_{sched.member:02d}.svg", band=True,
                      title=f"{cfg.env} schedule {sched.member}")
        summary[sched.member] = {"mean": report.mean, "stderr": report.stderr}
        print(f"schedule {sched.member}: mean {report.mean}")
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    run = Path(args.run)
    info = json.loads((run / RUN_FILE).read_text())
    cfg = RunConfig.from_json(info["config"])
    instances = InstanceSet.load(run / INSTANCES_FILE)
    spec = make_env(cfg.env).spec
    results = {}
    for path in sorted((run / "checkpoints").glob("member_*.ckpt")):
        ckpt = Checkpoint.from_bytes(path.read_bytes())
        agent = make_agent(cfg.algorithm, spec, info["obs_dim"], hidden=cfg.hidden)
        agent.load_checkpoint(ckpt)
        per_seed = [evaluate(agent, cfg.env, instances, cfg.visibility, args.episodes, seed=s).mean
                    for s in args.eval_seeds]
        results[path.stem] = per_seed
        print(f"{path.stem}: {per_seed}")
    (run / "eval.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_plot(args) -> int:
    src = Path(args.source)
    out = Path(args.out) if args.out else src.with_suffix(".svg")
    emit_plot(src, out, band=args.band)
    print(out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"train": cmd_train, "replay": cmd_replay, "eval": cmd_eval, "plot": cmd_plot}
    try:
        return handlers[args.command](args)
    except (InvalidConfiguration, InvalidArgument, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
