import csv
import json

import numpy as np
import pytest

from ctxtune import cli
from ctxtune.agents import make_agent
from ctxtune.context import sample_instance_set
from ctxtune.envs import make_env
from ctxtune.errors import InvalidArgument, InvalidConfiguration, NumericError, ParseError
from ctxtune.harness import RunConfig, evaluate, replay_schedule, run_training, train
from ctxtune.harness.plotting import emit_plot, read_metrics, render_svg
from ctxtune.pb2 import Schedule, ScheduleEntry, load_schedules

SMALL = dict(env="pendulum", workers=2, interval=256, steps=2 * 768, n_instances=5, hidden_width=16)


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    """The declared smoke contract, run twice for the byte comparison."""
    dirs = []
    for i in range(2):
        out = tmp_path_factory.mktemp(f"smoke{i}")
        run_training(RunConfig(env="pendulum", visibility="hidden", workers=2, steps=8192, seed=0, outdir=str(out)))
        dirs.append(out)
    return dirs


def test_smoke_contract(smoke_run):
    schedules, doc = load_schedules(smoke_run[0] / "schedules.json")
    assert len(schedules) == 2
    assert all(len(s.entries) >= 2 for s in schedules)
    assert doc["env"] == "pendulum" and doc["algorithm"] == "ddpg"
    for name in ("run.json", "instances.json", "metrics.csv", "bandit.json", "checkpoints/member_00.ckpt"):
        assert (smoke_run[0] / name).exists()


def test_identical_metrics_for_same_seed(smoke_run):
    a, b = (d / "metrics.csv" for d in smoke_run)
    assert a.read_bytes() == b.read_bytes()
    assert (smoke_run[0] / "schedules.json").read_bytes() == (smoke_run[1] / "schedules.json").read_bytes()


def test_metrics_columns(smoke_run):
    with open(smoke_run[0] / "metrics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "member", "return", "learning_rate", "gamma", "tau", "wallclock_s"]
    per_member = {}
    for r in rows[1:]:
        per_member.setdefault(r[1], []).append(int(r[0]))
    assert all(steps == sorted(steps) for steps in per_member.values())


def test_visible_run_logs_larger_obs(tmp_path):
    dims = {}
    for vis in ("hidden", "visible"):
        out = tmp_path / vis
        run_training(RunConfig(**SMALL, visibility=vis, outdir=str(out)))
        dims[vis] = json.loads((out / "run.json").read_text())
    assert dims["visible"]["obs_dim"] == dims["hidden"]["obs_dim"] + 1
    assert dims["hidden"]["obs_dim"] == dims["hidden"]["base_obs_dim"] == 3


def test_config_rejects_bad_pairing():
    with pytest.raises(InvalidConfiguration):
        RunConfig(env="acrobot", algorithm="ddpg")
    with pytest.raises(InvalidConfiguration):
        RunConfig(env="pendulum", algorithm="ppo")
    with pytest.raises(InvalidConfiguration):
        RunConfig(workers=1)
    assert RunConfig(env="lander").algorithm == "ppo"


def test_config_json_roundtrip():
    cfg = RunConfig(env="acrobot", visibility="visible", initial={"learning_rate": 3e-4})
    assert RunConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    cfg = RunConfig(**SMALL, seed=3, outdir=str(out))
    return cfg, train(cfg)


def test_replay_empty_seed_list(small_run):
    cfg, result = small_run
    report = replay_schedule(result.scheduler.schedules[0], cfg, [])
    assert report.results == [] and report.mean is None


def test_replay_rejects_training_seed_and_mismatch(small_run):
    cfg, result = small_run
    with pytest.raises(InvalidArgument):
        replay_schedule(result.scheduler.schedules[0], cfg, [cfg.seed])
    ppo_like = Schedule(0, [ScheduleEntry(0, 0, {"learning_rate": 1e-3, "gamma": 0.9})])
    with pytest.raises(InvalidArgument):
        replay_schedule(ppo_like, cfg, [11])
    out_of_box = Schedule(0, [ScheduleEntry(0, 0, {"learning_rate": 0.5, "gamma": 0.9, "tau": 0.1})])
    with pytest.raises(InvalidArgument):
        replay_schedule(out_of_box, cfg, [11])


def test_replay_is_deterministic_and_follows_switches(small_run):
    cfg, result = small_run
    sched = next((s for s in result.scheduler.schedules if s.switch_points()), result.scheduler.schedules[0])
    a = replay_schedule(sched, cfg, [11])
    b = replay_schedule(sched, cfg, [11])
    assert a.results[0].curve == b.results[0].curve
    assert a.results[0].final_mean == b.results[0].final_mean
    assert [s for s, _ in a.results[0].switches[1:]] == sched.switch_points()
    for step, hp in a.results[0].switches:
        assert hp == sched.active_at(step)


def test_single_entry_schedule_is_fixed_training(small_run):
    cfg, _ = small_run
    hp = {"learning_rate": 1e-3, "gamma": 0.99, "tau": 0.005}
    sched = Schedule(0, [ScheduleEntry(0, 0, hp)])
    report = replay_schedule(sched, cfg, [21, 22], total_steps=512)
    for r in report.results:
        assert r.switches == [(0, hp)]
        assert [s for s, _ in r.curve] == [256, 512]
    assert report.stderr is not None


def test_evaluate_mean_matches_breakdown():
    env = make_env("pendulum")
    inst = sample_instance_set(env.spec.feature("g"), 10.0, 1.0, 4, seed=0)
    agent = make_agent("ddpg", env.spec, 3, hidden=(8, 8), seed=0)
    res = evaluate(agent, "pendulum", inst, episodes_per_instance=2, seed=5)
    assert res.mean == pytest.approx(np.mean(res.per_instance), abs=1e-12)
    assert evaluate(agent, "pendulum", inst, episodes_per_instance=2, seed=5) == res
    single = sample_instance_set(env.spec.feature("g"), 10.0, 0.0, 1, seed=0)
    one = evaluate(agent, "pendulum", single, seed=1)
    assert one.mean == one.per_instance[0]


# ------------------------------------------------------------------ plotting

def test_plot_empty_metrics(tmp_path):
    src = tmp_path / "metrics.csv"
    src.write_text("step,member,return,learning_rate,wallclock_s\n")
    out = emit_plot(src, tmp_path / "plot.svg")
    svg = out.read_text()
    assert svg.startswith("<svg") and svg.count("<path") == 0


def test_plot_two_members(smoke_run, tmp_path):
    out = emit_plot(smoke_run[0] / "metrics.csv", tmp_path / "a.svg")
    assert out.read_text().count("<path") == 2
    again = emit_plot(smoke_run[0] / "metrics.csv", tmp_path / "b.svg")
    assert out.read_bytes() == again.read_bytes()


def test_plot_band_adds_mean_line():
    series = {"a": [(0, 1.0), (10, 2.0)], "b": [(0, 3.0), (10, 1.0)]}
    svg = render_svg(series, band=True)
    assert svg.count("<path") == 2 and 'class="band"' in svg and 'class="mean"' in svg
    assert 'class="band"' not in render_svg(series)


def test_plot_malformed_csv_reports_line(tmp_path):
    src = tmp_path / "bad.csv"
    src.write_text("step,member,return\n1,0,-5\n2,zero,-4\n")
    with pytest.raises(ParseError, match="line 3"):
        read_metrics(src)


# ----------------------------------------------------------------------- CLI

def test_cli_train_replay_plot(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["train", "--env", "acrobot", "--workers", "2", "--interval", "128", "--steps", "512",
                     "--hidden-width", "8", "--outdir", str(out)]) == 0
    assert (out / "schedules.json").exists()
    assert cli.main(["replay", "--schedules", str(out / "schedules.json"), "--eval-seeds", "7",
                     "--members", "0", "--outdir", str(tmp_path / "rep")]) == 0
    summary = json.loads((tmp_path / "rep" / "summary.json").read_text())
    assert list(summary) == ["0"]
    assert cli.main(["eval", "--run", str(out), "--eval-seeds", "3"]) == 0
    assert set(json.loads((out / "eval.json").read_text())) == {"member_00", "member_01"}
    assert cli.main(["plot", str(out / "metrics.csv"), "--out", str(tmp_path / "c.svg"), "--band"]) == 0
    assert (tmp_path / "c.svg").exists()


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert cli.main(["train", "--env", "acrobot", "--algorithm", "ddpg", "--outdir", str(tmp_path)]) == 2
    assert cli.main(["replay", "--schedules", str(tmp_path / "missing.json")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("step,member,return\nx,0,1\n")
    assert cli.main(["plot", str(bad)]) == 2

    def boom(cfg):
        raise NumericError("non-finite gradient")

    monkeypatch.setattr(cli, "run_training", boom)
    assert cli.main(["train", "--outdir", str(tmp_path / "x")]) == 4


def test_lander_solved_flag():
    env = make_env("lander")
    inst = sample_instance_set(env.spec.feature("gravity_y"), -10.0, 0.0, 1, seed=0)
    agent = make_agent("ppo", env.spec, 8, hidden=(8,), seed=0)
    res = evaluate(agent, "lander", inst, seed=2)
    assert res.solved == (res.mean >= 200.0)
    pend = make_env("pendulum")
    single = sample_instance_set(pend.spec.feature("g"), 10.0, 0.0, 1, seed=0)
    assert evaluate(make_agent("ddpg", pend.spec, 3, hidden=(8,), seed=0), "pendulum", single).solved is None
