"""Population-based bandit scheduling of agent hyperparameters.

A population of agents trains in lock-step intervals. After each interval
the members are ranked by their interval score; the bottom quantile copies
weights and optimizer state from a random member of the top quantile and
receives new hyperparameters from the GP-UCB bandit, which is fitted on
every member's (interval, hyperparameters, score improvement) history.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import bandit
from .agents.hyper import HyperDDPG, HyperPPO
from .errors import InvalidArgument, InvalidConfiguration, ParseError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class HyperparamSpace:
    dims: tuple[Dim, ...]
    initial: Mapping[str, float]

    def __post_init__(self):
        for d in self.dims:
            if not d.lower < d.upper:
                raise InvalidConfiguration(f"empty range for {d.name}")
        object.__setattr__(self, "initial", dict(self.initial))
        self.normalize(self.initial)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    @property
    def dim(self) -> int:
        return len(self.dims)

    def contains(self, hp: Mapping[str, float]) -> bool:
        return all(d.lower <= hp[d.name] <= d.upper for d in self.dims)

    def normalize(self, hp: Mapping[str, float]) -> np.ndarray:
        """Linear map of each dimension onto [0, 1]."""
        missing = [n for n in self.names if n not in hp]
        if missing:
            raise InvalidArgument(f"missing hyperparameters {missing}")
        out = np.empty(self.dim)
        for i, d in enumerate(self.dims):
            v = float(hp[d.name])
            if not (d.lower <= v <= d.upper):
                raise InvalidArgument(f"{d.name}={v} outside [{d.lower}, {d.upper}]")
            out[i] = (v - d.lower) / (d.upper - d.lower)
        return out

    def denormalize(self, u) -> dict[str, float]:
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        if u.shape[0] != self.dim:
            raise InvalidArgument(f"expected {self.dim} coordinates")
        if np.any(u < -1e-12) or np.any(u > 1 + 1e-12):
            raise InvalidArgument(f"point {u} outside the unit box")
        u = np.clip(u, 0.0, 1.0)
        return {d.name: float(d.lower + ui * (d.upper - d.lower)) for d, ui in zip(self.dims, u)}

    def to_json(self) -> list[dict]:
        return [asdict(d) for d in self.dims]

    @classmethod
    def for_algorithm(cls, algo: str, **initial) -> "HyperparamSpace":
        hyper = {"ddpg": HyperDDPG, "ppo": HyperPPO}.get(algo)
        if hyper is None:
            raise InvalidConfiguration(f"unknown algorithm {algo!r}")
        start = hyper(**initial).to_dict()
        dims = tuple(Dim(n, *hyper.BOUNDS[n]) for n in hyper.names())
        return cls(dims, start)


def normalize(hp: Mapping[str, float], space: HyperparamSpace) -> np.ndarray:
    return space.normalize(hp)


def denormalize(u, space: HyperparamSpace) -> dict[str, float]:
    return space.denormalize(u)


@dataclass
class ScheduleEntry:
    step: int
    member: int
    hyperparams: dict[str, float]
    parent: int | None = None
    score: float | None = None

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "member": self.member,
            "hyperparams": dict(self.hyperparams),
            "parent": self.parent,
            "score": self.score,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "ScheduleEntry":
        return cls(int(d["step"]), int(d["member"]), {k: float(v) for k, v in d["hyperparams"].items()},
                   None if d.get("parent") is None else int(d["parent"]),
                   None if d.get("score") is None else float(d["score"]))


@dataclass
class Schedule:
    """Hyperparameters one lineage used over time, ending at the member's final step."""

    member: int
    entries: list[ScheduleEntry] = field(default_factory=list)
    truncated: bool = False

    def active_at(self, step: int) -> dict[str, float]:
        """Hyperparameters of the last entry whose step is <= ``step``."""
        current = None
        for e in self.entries:
            if e.step <= step:
                current = e.hyperparams
            else:
                break
        if current is None:
            raise InvalidArgument(f"schedule has no entry at or before step {step}")
        return dict(current)

    def switch_points(self) -> list[int]:
        """Steps (after 0) at which the hyperparameters actually change."""
        out = []
        for prev, cur in zip(self.entries, self.entries[1:]):
            if cur.hyperparams != prev.hyperparams:
                out.append(cur.step)
        return out

    @property
    def final_step(self) -> int:
        return self.entries[-1].step if self.entries else 0

    def to_json(self) -> dict:
        return {"member": self.member, "truncated": self.truncated, "entries": [e.to_json() for e in self.entries]}

    @classmethod
    def from_json(cls, d: Mapping) -> "Schedule":
        return cls(int(d["member"]), [ScheduleEntry.from_json(e) for e in d["entries"]], bool(d.get("truncated", False)))


@dataclass(frozen=True)
class Pb2Config:
    population_size: int = 8
    interval: int = 4096
    quantile: float = 0.25
    steps_per_member: int = 4096 * 10
    seed: int = 0
    synchronous: bool = True
    n_jobs: int = 1
    window: int = bandit.WINDOW
    acquisition: bandit.AcquisitionConfig = bandit.AcquisitionConfig()
    time_budget_s: float | None = None

    def __post_init__(self):
        if self.population_size < 2:
            raise InvalidConfiguration("PB2 needs at least 2 members")
        if not 0.0 < self.quantile <= 0.5:
            raise InvalidConfiguration("quantile must lie in (0, 0.5]")
        if self.interval < 1:
            raise InvalidConfiguration("interval must be >= 1")
        if self.steps_per_member < 0:
            raise InvalidConfiguration("step budget must be >= 0")

    @property
    def n_exploit(self) -> int:
        return math.ceil(self.quantile * self.population_size)


@dataclass
class PopulationMember:
    id: int
    agent: object
    runner: object
    hyperparams: dict[str, float]
    scores: list[float] = field(default_factory=list)
    steps: int = 0
    schedule: Schedule | None = None
    checkpoint: object = None


@dataclass
class ExploitRecord:
    step: int
    generation: int
    member: int
    donor: int
    old_hyperparams: dict
    new_hyperparams: dict


def bandit_reward(scores: Sequence[float], interval: int) -> float:
    """Score change over ``interval``; the first interval is measured from 0."""
    previous = scores[interval - 1] if interval > 0 else 0.0
    return float(scores[interval] - previous)


def rank_members(scores: Mapping[int, float]) -> list[int]:
    """Member ids from best to worst score; ties broken by lower id first."""
    return sorted(scores, key=lambda i: (-scores[i], i))


def _subseed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


IntervalCallback = Callable[[PopulationMember, int, float], None]


class PB2:
    """Synchronous (default) or asynchronous population-based bandit scheduler.

    ``member_factory(i)`` must return ``(agent, runner)`` for member ``i``;
    agents expose ``learn``, ``checkpoint``, ``load_checkpoint`` and
    ``set_hyperparams``.
    """

    def __init__(
        self,
        space: HyperparamSpace,
        config: Pb2Config,
        member_factory: Callable[[int], tuple],
        on_interval: IntervalCallback | None = None,
    ):
        self.space = space
        self.config = config
        self.on_interval = on_interval
        self.members: list[PopulationMember] = []
        for i in range(config.population_size):
            agent, runner = member_factory(i)
            hp = dict(space.initial)
            agent.set_hyperparams(hp)
            sched = Schedule(i, [ScheduleEntry(0, i, dict(hp))])
            self.members.append(PopulationMember(i, agent, runner, hp, schedule=sched))
        self.observations: list[bandit.BanditObservation] = []
        self.exploits: list[ExploitRecord] = []
        self.bandit_diagnostics: list[dict] = []
        self.generation = 0
        self._rng = np.random.default_rng(_subseed(config.seed, 0xB2))
        self._lock = threading.Lock()
        self._finished = False

    # ---- training -------------------------------------------------------

    def _train(self, member: PopulationMember, n: int) -> float:
        member.agent.learn(member.runner, n)
        member.steps += n
        score = member.runner.pop_interval_score()
        member.scores.append(score)
        return score

    def run(self) -> "PB2":
        if self.config.synchronous:
            self._run_sync()
        else:
            self._run_async()
        return self

    def _run_sync(self) -> None:
        cfg = self.config
        start = time.monotonic()
        pool = ThreadPoolExecutor(cfg.n_jobs) if cfg.n_jobs > 1 else None
        try:
            while self.members[0].steps < cfg.steps_per_member:
                if cfg.time_budget_s is not None and time.monotonic() - start > cfg.time_budget_s:
                    log.warning("time budget exhausted at step %d", self.members[0].steps)
                    for m in self.members:
                        m.schedule.truncated = True
                    break
                n = min(cfg.interval, cfg.steps_per_member - self.members[0].steps)
                if pool is None:
                    for m in self.members:
                        self._train(m, n)
                else:
                    list(pool.map(lambda m: self._train(m, n), self.members))
                for m in self.members:
                    if self.on_interval is not None:
                        self.on_interval(m, m.steps, m.scores[-1])
                if n == cfg.interval and self.members[0].steps < cfg.steps_per_member:
                    self.perturbation_event()
                self.generation += 1
        finally:
            if pool is not None:
                pool.shutdown()
        self._finish()

    def _finish(self) -> None:
        for m in self.members:
            last = m.schedule.entries[-1]
            if m.steps > last.step:
                m.schedule.entries.append(
                    ScheduleEntry(m.steps, m.id, dict(m.hyperparams), None, m.scores[-1] if m.scores else None)
                )
        self._finished = True

    # ---- exploit / explore ---------------------------------------------

    def record_observations(self, generation: int, members: Sequence[PopulationMember] | None = None) -> None:
        for m in members if members is not None else self.members:
            self.observations.append(
                bandit.BanditObservation(
                    generation, tuple(self.space.normalize(m.hyperparams)), bandit_reward(m.scores, len(m.scores) - 1)
                )
            )

    def perturbation_event(self) -> list[ExploitRecord]:
        """Rank on the latest interval scores, exploit/explore the bottom quantile.

        Every member gets a schedule entry at the current step; replaced
        members inherit the donor's lineage up to this point.
        """
        cfg = self.config
        gen = self.generation
        step = self.members[0].steps
        self.record_observations(gen)
        scores = {m.id: m.scores[-1] for m in self.members}
        order = rank_members(scores)
        k = cfg.n_exploit
        top, bottom = order[:k], sorted(order[-k:])
        donors = {i: self.members[i].agent.checkpoint() for i in top}
        lineages = {m.id: [ScheduleEntry(**asdict(e)) for e in m.schedule.entries] for m in self.members}

        model = bandit.fit(self.observations, window=cfg.window, dim=self.space.dim)
        self.bandit_diagnostics.append(
            {"generation": gen, "kernel": asdict(model.params), "lml": model.lml, **model.diagnostics}
        )
        pending: list[np.ndarray] = []
        records = []
        for m in self.members:
            if m.id not in bottom:
                m.schedule.entries.append(ScheduleEntry(step, m.id, dict(m.hyperparams), None, scores[m.id]))
                continue
            donor = top[int(self._rng.integers(len(top)))]
            m.agent.load_checkpoint(donors[donor], hyperparams=False)
            x = bandit.suggest(model, gen + 1, pending=pending, cfg=cfg.acquisition, seed=_subseed(cfg.seed, gen, m.id))
            pending.append(x)
            new_hp = self.space.denormalize(x)
            m.agent.set_hyperparams(new_hp)
            rec = ExploitRecord(step, gen, m.id, donor, dict(m.hyperparams), new_hp)
            records.append(rec)
            m.hyperparams = new_hp
            m.schedule.entries = lineages[donor] + [ScheduleEntry(step, m.id, dict(new_hp), donor, scores[m.id])]
        self.exploits.extend(records)
        return records

    # ---- asynchronous mode ---------------------------------------------

    def _run_async(self) -> None:
        """Each member perturbs itself against whatever scores exist. Not reproducible."""
        cfg = self.config
        latest: dict[int, float] = {}
        published: dict[int, object] = {}

        def lane(m: PopulationMember):
            while m.steps < cfg.steps_per_member:
                n = min(cfg.interval, cfg.steps_per_member - m.steps)
                score = self._train(m, n)
                with self._lock:
                    if self.on_interval is not None:
                        self.on_interval(m, m.steps, score)
                    latest[m.id] = score
                    published[m.id] = m.agent.checkpoint()
                    if n < cfg.interval or m.steps >= cfg.steps_per_member:
                        continue
                    gen = len(m.scores) - 1
                    self.record_observations(gen, [m])
                    k = max(1, math.ceil(cfg.quantile * len(latest)))
                    order = rank_members(latest)
                    if len(latest) < 2 or m.id not in order[-k:] or m.id in order[:k]:
                        m.schedule.entries.append(ScheduleEntry(m.steps, m.id, dict(m.hyperparams), None, score))
                        continue
                    donor = order[int(self._rng.integers(k))]
                    m.agent.load_checkpoint(published[donor], hyperparams=False)
                    model = bandit.fit(self.observations, window=cfg.window, dim=self.space.dim)
                    x = bandit.suggest(model, gen + 1, cfg=cfg.acquisition, seed=_subseed(cfg.seed, gen, m.id))
                    new_hp = self.space.denormalize(x)
                    m.agent.set_hyperparams(new_hp)
                    self.exploits.append(ExploitRecord(m.steps, gen, m.id, donor, dict(m.hyperparams), new_hp))
                    m.hyperparams = new_hp
                    prefix = [ScheduleEntry(**asdict(e)) for e in self.members[donor].schedule.entries if e.step < m.steps]
                    m.schedule.entries = prefix + [ScheduleEntry(m.steps, m.id, dict(new_hp), donor, score)]

        with ThreadPoolExecutor(max(1, cfg.n_jobs)) as pool:
            for fut in [pool.submit(lane, m) for m in self.members]:
                fut.result()
        self._finish()

    # ---- export ---------------------------------------------------------

    @property
    def schedules(self) -> list[Schedule]:
        return [m.schedule for m in self.members]

    def export(self) -> dict:
        return {
            "interval": self.config.interval,
            "population_size": self.config.population_size,
            "quantile": self.config.quantile,
            "steps_per_member": self.config.steps_per_member,
            "seed": self.config.seed,
            "space": self.space.to_json(),
            "schedules": [s.to_json() for s in self.schedules],
            "exploits": [asdict(r) for r in self.exploits],
        }


def export_schedules(run: PB2 | Mapping, path: str | Path | None = None, extra: Mapping | None = None) -> dict:
    """Schedule document for a run (optionally written to ``path`` as JSON)."""
    doc = run.export() if isinstance(run, PB2) else dict(run)
    if extra:
        doc = {**extra, **doc}
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def load_schedules(path: str | Path) -> tuple[list[Schedule], dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), exc.lineno) from exc
    try:
        schedules = [Schedule.from_json(s) for s in doc["schedules"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed schedule file: {exc}") from exc
    return schedules, doc
