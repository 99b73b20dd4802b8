"""Command-line interface: exit codes, file outputs, determinism, config parsing."""

import json
import pytest

from mrolab.cli import main
from mrolab.config import ConfigError, build_config, config_hash, load_config, parse_kv_text

MINI_CFG = """
# single tiny scenario, short windows, small training budgets
scenario.load = 0.6
scenario.velocity = 50
scenario.window_seconds = 10
scenario.horizon = 3
grid.train_loads = 0.6
grid.train_velocities = 50
grid.train_seeds = 1
grid.episodes_per_cell = 1
data.episodes_per_cell = 1
cql.steps = 60
cql.hidden = 16
dt.steps = 40
dt.embed = 16
dt.blocks = 1
dt.batch_size = 16
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "mini.cfg").write_text(MINI_CFG)
    return d


@pytest.fixture(scope="module")
def dataset(workdir):
    out = workdir / "data.jsonl"
    rc = main(["gen-data", "--config", str(workdir / "mini.cfg"), "--out", str(out), "--seed", "0"])
    assert rc == 0
    return out


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["eval", "--policy", "dt", "--out", "/tmp/x"]) == 1  # checkpoint missing


def test_runtime_errors_exit_2(workdir):
    rc = main(
        [
            "train-cql",
            "--config",
            str(workdir / "mini.cfg"),
            "--dataset",
            str(workdir / "does-not-exist.jsonl"),
            "--out",
            str(workdir / "q.json"),
        ]
    )
    assert rc == 2


def test_gen_data_deterministic(workdir, dataset):
    again = workdir / "data2.jsonl"
    rc = main(["gen-data", "--config", str(workdir / "mini.cfg"), "--out", str(again), "--seed", "0"])
    assert rc == 0
    assert dataset.read_bytes() == again.read_bytes()


def test_train_and_eval_cql(workdir, dataset):
    ck = workdir / "q.json"
    rc = main(
        [
            "train-cql",
            "--config",
            str(workdir / "mini.cfg"),
            "--dataset",
            str(dataset),
            "--out",
            str(ck),
            "--no-filter",
            "--cql-alpha",
            "0.5",
        ]
    )
    assert rc == 0 and ck.exists()
    assert ck.with_suffix(".curve.csv").exists()
    out = workdir / "eval_cql"
    rc = main(
        [
            "eval",
            "--config",
            str(workdir / "mini.cfg"),
            "--policy",
            "cql",
            "--checkpoint",
            str(ck),
            "--out",
            str(out),
            "--episodes",
            "1",
            "--seed",
            "0",
        ]
    )
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert {r["policy"] for r in report["rows"]} == {"cql", "mro"}


def test_train_and_sweep_dt(workdir, dataset):
    ck = workdir / "dt.json"
    rc = main(
        [
            "train-dt",
            "--config",
            str(workdir / "mini.cfg"),
            "--dataset",
            str(dataset),
            "--out",
            str(ck),
            "--context-k",
            "2",
        ]
    )
    assert rc == 0 and ck.exists()
    out = workdir / "sweep"
    rc = main(
        [
            "sweep-cio",
            "--config",
            str(workdir / "mini.cfg"),
            "--policy",
            "dt",
            "--checkpoint",
            str(ck),
            "--out",
            str(out),
            "--target-rtg",
            "8.0",
        ]
    )
    assert rc == 0
    lines = (out / "cio_sweep_dt.csv").read_text().strip().splitlines()
    assert len(lines) == 18


def test_baseline_curves_command(workdir):
    out = workdir / "curves"
    rc = main(
        [
            "baseline-curves",
            "--config",
            str(workdir / "mini.cfg"),
            "--out",
            str(out),
            "--curve-seeds",
            "1",
            "--windows",
            "1",
        ]
    )
    assert rc == 0
    assert (out / "baseline_curves.csv").exists()


def test_eval_is_deterministic(workdir):
    outs = []
    for name in ("e1", "e2"):
        out = workdir / name
        rc = main(
            [
                "eval",
                "--config",
                str(workdir / "mini.cfg"),
                "--policy",
                "mro",
                "--out",
                str(out),
                "--episodes",
                "1",
                "--seed",
                "3",
            ]
        )
        assert rc == 0
        outs.append((out / "report.json").read_bytes())
    assert outs[0] == outs[1]


# -- config parsing ---------------------------------------------------------------


def test_parse_kv_basics():
    kv = parse_kv_text("a.b = 1\n# comment\nc.d = x y  # trailing\n")
    assert kv == {"a.b": "1", "c.d": "x y"}
    with pytest.raises(ConfigError):
        parse_kv_text("no equals sign")
    with pytest.raises(ConfigError):
        parse_kv_text("a.b = 1\na.b = 2")


def test_build_config_types_and_unknown_keys():
    cfg = build_config(
        {
            "scenario.load": "0.4",
            "scenario.horizon": "5",
            "sim.base_arrival_rate": "2.0",
            "a3.ttt_ms": "320",
            "grid.train_loads": "0.2, 0.4",
            "cql.filter_zero_failures_only": "false",
            "reward.variant": "cio_penalty",
        }
    )
    assert cfg.scenario.load == 0.4
    assert cfg.scenario.horizon == 5
    assert cfg.sim.a3.ttt_ms == 320.0
    assert cfg.sim.ttt_samples == 8
    assert cfg.grid.train_loads == (0.2, 0.4)
    assert cfg.cql.filter_zero_failures_only is False
    assert cfg.reward.variant == "cio_penalty"
    with pytest.raises(ConfigError):
        build_config({"scenario.lod": "0.4"})
    with pytest.raises(ConfigError):
        build_config({"nosuchblock.x": "1"})
    with pytest.raises(ConfigError):
        build_config({"load": "0.4"})


def test_reward_weights_follow_rule_weights():
    cfg = build_config({"mro_weights.w_f": "2.0"})
    assert cfg.reward.issue_weights.w_f == 2.0


def test_config_hash_stability(tmp_path):
    c1 = build_config({"scenario.load": "0.4"})
    c2 = build_config({"scenario.load": "0.4"})
    c3 = build_config({"scenario.load": "0.5"})
    assert config_hash(c1) == config_hash(c2)
    assert config_hash(c1) != config_hash(c3)
    p = tmp_path / "c.cfg"
    p.write_text("scenario.load = 0.4\n")
    assert config_hash(load_config(p)) == config_hash(c1)


def test_grid_selection():
    from mrolab.cli import UsageError, _grid_scenarios
    from mrolab.config import ExperimentConfig

    cfg = ExperimentConfig()
    train = _grid_scenarios(cfg, "train")
    assert len(train) == 4 * 3 * 2
    val = _grid_scenarios(cfg, "val")
    assert len(val) == 3 * 2 * 2
    assert {s.load for s in val} == {0.5, 0.6, 0.7}
    assert {s.velocity for s in val} == {25.0, 85.0}
    assert {s.seed for s in val} == {3, 4}
    assert len(_grid_scenarios(cfg, "single")) == 1
    with pytest.raises(UsageError):
        _grid_scenarios(cfg, "nope")


def test_shipped_default_config_matches_builtin_defaults():
    from pathlib import Path

    from mrolab.config import ExperimentConfig, config_hash

    sample = Path(__file__).resolve().parent.parent / "configs" / "default.cfg"
    assert config_hash(load_config(sample)) == config_hash(ExperimentConfig())
