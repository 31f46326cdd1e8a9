"""End-to-end PB2 training runs and their on-disk artifacts.

A run directory holds::

    run.json        config plus observation-size diagnostics
    instances.json  the training instance set
    metrics.csv     one row per member per interval
    schedules.json  per-member hyperparameter lineages
    bandit.json     GP fit diagnostics per perturbation event
    checkpoints/    final agent checkpoints, one per member
"""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..agents import Agent, make_agent
from ..context import InstanceSet, sample_instance_set
from ..envs import TRAINING_DISTRIBUTIONS, EpisodeRunner, make_env
from ..pb2 import PB2, HyperparamSpace, Pb2Config, export_schedules
from .config import RunConfig

log = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
SCHEDULES_FILE = "schedules.json"
RUN_FILE = "run.json"
INSTANCES_FILE = "instances.json"


def subseed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def build_instance_set(cfg: RunConfig) -> InstanceSet:
    """Training contexts: the env's varied feature around its default, 10% spread."""
    name, mu, sigma = TRAINING_DISTRIBUTIONS[cfg.env]
    feature = make_env(cfg.env).spec.feature(name)
    return sample_instance_set(feature, mu, sigma, cfg.n_instances, cfg.seed)


def build_member(cfg: RunConfig, instances: InstanceSet, seed: int, hp=None) -> tuple[Agent, EpisodeRunner]:
    """Fresh agent plus runner; everything random derives from ``seed``."""
    env = make_env(cfg.env)
    runner = EpisodeRunner(env, instances, cfg.visibility, seed=subseed(seed, 2), presentation=cfg.presentation)
    agent = make_agent(cfg.algorithm, env.spec, runner.obs_dim, hp=hp, hidden=cfg.hidden, seed=subseed(seed, 1))
    return agent, runner


def hyperparam_space(cfg: RunConfig) -> HyperparamSpace:
    return HyperparamSpace.for_algorithm(cfg.algorithm, **cfg.initial)


class MetricsWriter:
    """Appends metrics rows from any thread through a single lock."""

    def __init__(self, path: Path, hp_names: list[str], record_wallclock: bool):
        self.path = path
        self.hp_names = hp_names
        self.record_wallclock = record_wallclock
        self._lock = threading.Lock()
        self._start = time.monotonic()
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerow(["step", "member", "return", *hp_names, "wallclock_s"])

    def __call__(self, member, step: int, score: float) -> None:
        wall = round(time.monotonic() - self._start, 3) if self.record_wallclock else 0.0
        row = [step, member.id, repr(float(score)), *(repr(float(member.hyperparams[n])) for n in self.hp_names), wall]
        with self._lock, open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow(row)


@dataclass
class TrainingResult:
    outdir: Path
    scheduler: PB2
    instances: InstanceSet


def train(cfg: RunConfig) -> TrainingResult:
    out = Path(cfg.outdir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    instances = build_instance_set(cfg)
    instances.save(out / INSTANCES_FILE)
    space = hyperparam_space(cfg)

    pb2_cfg = Pb2Config(
        population_size=cfg.workers,
        interval=cfg.interval,
        quantile=cfg.quantile,
        steps_per_member=cfg.steps_per_member,
        seed=cfg.seed,
        synchronous=cfg.synchronous,
        n_jobs=cfg.n_jobs,
        time_budget_s=cfg.time_budget_s,
    )
    writer = MetricsWriter(out / METRICS_FILE, space.names, cfg.record_wallclock)
    scheduler = PB2(space, pb2_cfg, lambda i: build_member(cfg, instances, subseed(cfg.seed, i)), on_interval=writer)

    spec = make_env(cfg.env).spec
    run_info = {
        "config": cfg.to_json(),
        "base_obs_dim": spec.base_obs_dim,
        "obs_dim": scheduler.members[0].runner.obs_dim,
        "varied_feature": instances.feature.name,
        "steps_per_member": cfg.steps_per_member,
        "hyperparameters": space.names,
    }
    (out / RUN_FILE).write_text(json.dumps(run_info, indent=2, sort_keys=True) + "\n")
    log.info("training %s/%s (%s) with %d members", cfg.env, cfg.algorithm, cfg.visibility.value, cfg.workers)

    scheduler.run()

    export_schedules(scheduler, out / SCHEDULES_FILE, extra={"env": cfg.env, "algorithm": cfg.algorithm,
                                                            "visibility": cfg.visibility.value})
    (out / "bandit.json").write_text(json.dumps(scheduler.bandit_diagnostics, indent=2, sort_keys=True) + "\n")
    for m in scheduler.members:
        (out / "checkpoints" / f"member_{m.id:02d}.ckpt").write_bytes(m.agent.checkpoint().to_bytes())
    return TrainingResult(out, scheduler, instances)


def run_training(cfg: RunConfig) -> Path:
    """Train a population under PB2 and return the run directory."""
    return train(cfg).outdir
