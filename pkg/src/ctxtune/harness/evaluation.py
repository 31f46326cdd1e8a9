from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..agents import Agent
from ..context import InstanceSet, VisibilityMode, augment_observation
from ..envs import make_env
from ..errors import InvalidArgument, ParseError
from ..pb2 import Schedule
from .config import RunConfig
from .training import build_instance_set, build_member, hyperparam_space, subseed


@dataclass
class EvalResult:
    mean: float
    per_instance: list[float]
    solved: bool | None = None


def evaluate(
    agent: Agent,
    env_name: str,
    instances: InstanceSet,
    visibility: VisibilityMode | str = VisibilityMode.HIDDEN,
    episodes_per_instance: int = 1,
    seed: int = 0,
) -> EvalResult:
    """Greedy-policy return averaged over every instance (and episode)."""
    env = make_env(env_name)
    per_instance = []
    for i, ctx in enumerate(instances):
        returns = []
        for ep in range(episodes_per_instance):
            obs = augment_observation(env.reset(ctx, subseed(seed, i, ep)), ctx, visibility, env.spec.feature_list)
            total = 0.0
            while True:
                res = env.step(agent.predict(obs))
                total += res.reward
                if res.terminated or res.truncated:
                    break
                obs = augment_observation(res.obs, ctx, visibility, env.spec.feature_list)
            returns.append(total)
        per_instance.append(float(np.mean(returns)))
    mean = float(np.mean(per_instance))
    solved = None if env.solved_return is None else mean >= env.solved_return
    return EvalResult(mean, per_instance, solved)


@dataclass
class SeedResult:
    seed: int
    final_mean: float
    per_instance: list[float]
    curve: list[tuple[int, float]]
    switches: list[tuple[int, dict]]


@dataclass
class EvalReport:
    schedule_id: int | None
    seeds: list[int]
    results: list[SeedResult] = field(default_factory=list)

    @property
    def mean(self) -> float | None:
        if not self.results:
            return None
        return float(np.mean([r.final_mean for r in self.results]))

    @property
    def stderr(self) -> float | None:
        if len(self.results) < 2:
            return None
        finals = np.array([r.final_mean for r in self.results])
        return float(finals.std(ddof=1) / np.sqrt(len(finals)))

    def to_json(self) -> dict:
        return {
            "schedule_id": self.schedule_id,
            "seeds": self.seeds,
            "mean": self.mean,
            "stderr": self.stderr,
            "results": [asdict(r) for r in self.results],
        }

    @classmethod
    def from_json(cls, d) -> "EvalReport":
        try:
            results = [
                SeedResult(
                    int(r["seed"]), float(r["final_mean"]), list(r["per_instance"]),
                    [(int(s), float(v)) for s, v in r["curve"]],
                    [(int(s), dict(h)) for s, h in r["switches"]],
                )
                for r in d["results"]
            ]
            return cls(d.get("schedule_id"), list(d["seeds"]), results)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed evaluation report: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def _segment_ends(schedule: Schedule, total: int, chunk: int) -> list[int]:
    points = {e.step for e in schedule.entries if 0 < e.step < total}
    points.update(range(chunk, total, chunk))
    points.add(total)
    return sorted(points)


def _replay_one(schedule: Schedule, cfg: RunConfig, seed: int, instances: InstanceSet, total: int,
                eval_episodes: int) -> SeedResult:
    agent, runner = build_member(cfg, instances, seed)
    steps = 0
    active = schedule.active_at(0)
    agent.set_hyperparams(active)
    switches = [(0, dict(active))]
    curve = []
    for end in _segment_ends(schedule, total, cfg.interval):
        agent.learn(runner, end - steps)
        steps = end
        curve.append((steps, runner.pop_interval_score()))
        if steps < total:
            hp = schedule.active_at(steps)
            if hp != active:
                agent.set_hyperparams(hp)
                switches.append((steps, dict(hp)))
                active = hp
    result = evaluate(agent, cfg.env, instances, cfg.visibility, eval_episodes, seed=subseed(seed, 99))
    return SeedResult(seed, result.mean, result.per_instance, curve, switches)


def replay_schedule(
    schedule: Schedule,
    cfg: RunConfig,
    seeds: Sequence[int],
    total_steps: int | None = None,
    eval_episodes: int = 1,
    n_jobs: int = 1,
) -> EvalReport:
    """Train fresh agents, one per seed, following ``schedule``'s hyperparameters.

    Each agent ends with a greedy evaluation on the training instance set.
    ``total_steps`` defaults to the schedule's last recorded step.
    """
    seeds = [int(s) for s in seeds]
    if cfg.seed in seeds:
        raise InvalidArgument(f"replay seeds must differ from the training seed {cfg.seed}")
    space = hyperparam_space(cfg)
    for e in schedule.entries:
        if set(e.hyperparams) != set(space.names):
            raise InvalidArgument(
                f"schedule hyperparameters {sorted(e.hyperparams)} do not match {cfg.algorithm} space {space.names}"
            )
        if not space.contains(e.hyperparams):
            raise InvalidArgument(f"schedule entry at step {e.step} is out of bounds")
    report = EvalReport(schedule.member, seeds)
    if not seeds:
        return report
    total = schedule.final_step if total_steps is None else total_steps
    instances = build_instance_set(cfg)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            report.results = list(pool.map(lambda s: _replay_one(schedule, cfg, s, instances, total, eval_episodes), seeds))
    else:
        report.results = [_replay_one(schedule, cfg, s, instances, total, eval_episodes) for s in seeds]
    return report
