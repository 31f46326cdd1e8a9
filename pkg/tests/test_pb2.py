import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctxtune.errors import InvalidArgument, InvalidConfiguration, ParseError
from ctxtune.pb2 import (
    PB2, HyperparamSpace, Pb2Config, Schedule, ScheduleEntry, bandit_reward, denormalize, export_schedules,
    load_schedules, normalize, rank_members,
)

DDPG_SPACE = HyperparamSpace.for_algorithm("ddpg")
PPO_SPACE = HyperparamSpace.for_algorithm("ppo")


def test_spaces_match_declared_boxes():
    assert [(d.name, d.lower, d.upper) for d in DDPG_SPACE.dims] == [
        ("learning_rate", 1e-5, 0.02), ("gamma", 0.8, 0.999), ("tau", 0.0, 0.99)]
    assert PPO_SPACE.names == ["learning_rate", "gamma", "ent_coef", "vf_coef", "max_grad_norm", "gae_lambda"]
    assert DDPG_SPACE.initial["learning_rate"] == 3e-5 and DDPG_SPACE.initial["gamma"] == 0.99


def test_normalize_midpoint_and_edges():
    hp = {"learning_rate": 0.010005, "gamma": 0.8, "tau": 0.99}
    np.testing.assert_allclose(normalize(hp, DDPG_SPACE), [0.5, 0.0, 1.0], atol=1e-12)


@given(u=st.lists(st.floats(0, 1), min_size=6, max_size=6))
@settings(max_examples=100, deadline=None)
def test_normalize_roundtrip(u):
    hp = denormalize(u, PPO_SPACE)
    assert PPO_SPACE.contains(hp)
    np.testing.assert_allclose(normalize(hp, PPO_SPACE), u, atol=1e-12)
    back = denormalize(normalize(hp, PPO_SPACE), PPO_SPACE)
    assert all(abs(back[k] - hp[k]) <= 1e-12 for k in hp)


def test_normalize_rejects_out_of_box():
    with pytest.raises(InvalidArgument):
        normalize({"learning_rate": 0.5, "gamma": 0.9, "tau": 0.1}, DDPG_SPACE)
    with pytest.raises(InvalidArgument):
        denormalize([0.5, 1.5, 0.0], DDPG_SPACE)


def test_bandit_reward():
    assert bandit_reward([-500.0, -400.0], 1) == 100.0
    assert bandit_reward([-3.0, -3.0, -3.0], 2) == 0.0
    assert bandit_reward([-7.0], 0) == -7.0
    rng = np.random.default_rng(0)
    scores = list(rng.normal(size=30))
    diffs = np.diff(np.concatenate([[0.0], scores]))
    assert [bandit_reward(scores, i) for i in range(30)] == pytest.approx(list(diffs), abs=0)


def test_rank_members_breaks_ties_by_id():
    assert rank_members({3: 1.0, 1: 1.0, 2: 5.0, 0: -1.0}) == [2, 1, 3, 0]


def test_config_validation():
    with pytest.raises(InvalidConfiguration):
        Pb2Config(population_size=1)
    with pytest.raises(InvalidConfiguration):
        Pb2Config(quantile=0.6)
    assert Pb2Config().n_exploit == 2


def _run(factory, n=8, generations=3, interval=4096, seed=0, extra_steps=0):
    cfg = Pb2Config(population_size=n, interval=interval, steps_per_member=generations * interval + extra_steps,
                    seed=seed)
    return PB2(DDPG_SPACE, cfg, factory).run()


def test_exactly_two_replaced_per_generation(toy_factory):
    pb2 = _run(toy_factory, generations=4)
    per_gen = {}
    for rec in pb2.exploits:
        per_gen.setdefault(rec.generation, []).append(rec)
    assert sorted(per_gen) == [0, 1, 2]
    assert all(len(v) == 2 for v in per_gen.values())


class Snooping(PB2):
    """Records pre-event checkpoints and top members at each event."""

    def perturbation_event(self):
        scores = {m.id: m.scores[-1] for m in self.members}
        before = {m.id: m.agent.checkpoint() for m in self.members}
        before_hp = {m.id: dict(m.hyperparams) for m in self.members}
        records = super().perturbation_event()
        top = rank_members(scores)[:self.config.n_exploit]
        after = {m.id: m.agent.checkpoint() for m in self.members}
        self.events = getattr(self, "events", []) + [(before, before_hp, after, top, records)]
        return records


def test_exploit_copies_donor_bytes_and_spares_the_rest(toy_factory):
    cfg = Pb2Config(population_size=8, interval=4096, steps_per_member=3 * 4096, seed=1)
    pb2 = Snooping(DDPG_SPACE, cfg, toy_factory).run()
    assert len(pb2.events) == 2
    for before, before_hp, after, top, records in pb2.events:
        replaced = {r.member: r.donor for r in records}
        assert len(replaced) == 2
        for mid, donor in replaced.items():
            assert donor in top
            assert after[mid].params == before[donor].params
            assert after[mid].optimizer == before[donor].optimizer
        for mid in before:
            if mid not in replaced:
                assert after[mid] == before[mid]
                assert pb2.members[mid].agent is not None
        for mid in top:
            assert mid not in replaced


def test_schedule_entries_in_bounds_and_ordered(toy_factory):
    pb2 = _run(toy_factory, generations=5, seed=3)
    for sched in pb2.schedules:
        steps = [e.step for e in sched.entries]
        assert steps[0] == 0 and steps == sorted(set(steps))
        assert sched.entries[0].hyperparams == DDPG_SPACE.initial
        assert steps[-1] == 5 * 4096
        for e in sched.entries:
            assert DDPG_SPACE.contains(e.hyperparams)
        assert all(s % 4096 == 0 for s in sched.switch_points())


def test_lineage_parents_were_top_members(toy_factory):
    cfg = Pb2Config(population_size=8, interval=4096, steps_per_member=4 * 4096, seed=2)
    pb2 = Snooping(DDPG_SPACE, cfg, toy_factory).run()
    tops = {records[0].step: top for *_, top, records in pb2.events}
    for sched in pb2.schedules:
        for e in sched.entries:
            if e.parent is not None:
                assert e.parent in tops[e.step]


def test_run_is_reproducible(toy_factory):
    a = export_schedules(_run(toy_factory, seed=5))
    b = export_schedules(_run(toy_factory, seed=5))
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_zero_generation_export(toy_factory, tmp_path):
    pb2 = PB2(DDPG_SPACE, Pb2Config(population_size=4, steps_per_member=0), toy_factory).run()
    doc = export_schedules(pb2, tmp_path / "s.json")
    assert len(doc["schedules"]) == 4
    assert all(len(s["entries"]) == 1 and s["entries"][0]["step"] == 0 for s in doc["schedules"])


def test_partial_last_interval_has_no_event(toy_factory):
    pb2 = _run(toy_factory, n=4, generations=2, extra_steps=1000)
    assert {r.step for r in pb2.exploits} == {4096, 8192}
    assert all(s.final_step == 2 * 4096 + 1000 for s in pb2.schedules)


def test_export_roundtrip(toy_factory, tmp_path):
    pb2 = _run(toy_factory, n=4, generations=3)
    path = tmp_path / "schedules.json"
    export_schedules(pb2, path, extra={"env": "toy"})
    schedules, doc = load_schedules(path)
    assert doc["env"] == "toy"
    assert [s.to_json() for s in schedules] == [s.to_json() for s in pb2.schedules]


def test_load_schedules_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"schedules\": [\n oops")
    with pytest.raises(ParseError, match="line"):
        load_schedules(bad)
    bad.write_text("{}")
    with pytest.raises(ParseError):
        load_schedules(bad)


def test_schedule_active_at():
    s = Schedule(0, [ScheduleEntry(0, 0, {"a": 1.0}), ScheduleEntry(4096, 0, {"a": 2.0}),
                     ScheduleEntry(8192, 0, {"a": 2.0})])
    assert s.active_at(0) == {"a": 1.0}
    assert s.active_at(4095) == {"a": 1.0}
    assert s.active_at(4096) == {"a": 2.0}
    assert s.switch_points() == [4096]
    with pytest.raises(InvalidArgument):
        Schedule(1, []).active_at(0)


def test_time_budget_marks_truncated(toy_factory):
    cfg = Pb2Config(population_size=2, interval=64, steps_per_member=640, time_budget_s=0.0)
    pb2 = PB2(DDPG_SPACE, cfg, toy_factory).run()
    assert all(s.truncated for s in pb2.schedules)
    assert pb2.members[0].steps < 640


def test_async_mode_completes(toy_factory):
    cfg = Pb2Config(population_size=4, interval=256, steps_per_member=1024, synchronous=False, n_jobs=4)
    pb2 = PB2(DDPG_SPACE, cfg, toy_factory).run()
    for sched in pb2.schedules:
        assert sched.final_step == 1024
        assert all(DDPG_SPACE.contains(e.hyperparams) for e in sched.entries)


def test_parallel_lanes_match_serial(toy_factory):
    serial = export_schedules(_run(toy_factory, n=4, generations=3, seed=8))
    cfg = Pb2Config(population_size=4, interval=4096, steps_per_member=3 * 4096, seed=8, n_jobs=4)
    parallel = export_schedules(PB2(DDPG_SPACE, cfg, toy_factory).run())
    assert serial == parallel
