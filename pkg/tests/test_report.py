"""Evaluation harness: pairing, relative gains, emission round-trips."""

import json

import numpy as np
import pytest

from mrolab.config import ExperimentConfig
from mrolab.evaluate import (
    EpisodeRow,
    EvalReport,
    aggregate_rows,
    baseline_curves,
    converged_cio_sweep,
    emit_curves,
    emit_sweep,
    evaluate,
    relative_gain_pct,
    report_emit,
    rtg_histogram,
    sweep_mode,
)
from mrolab.policies import make_behavior_policy
from mrolab.sim import ScenarioConfig

CFG = ExperimentConfig()
FAST = ScenarioConfig(load=0.6, velocity=50.0, seed=1, window_seconds=10.0, horizon=3)


def row(policy, rtg, load=0.6, velocity=50.0, episode=0, final_cio=-2):
    return EpisodeRow(
        policy=policy,
        scenario_id=f"l{load:g}-v{velocity:g}-s1",
        load=load,
        velocity=velocity,
        scenario_seed=1,
        episode=episode,
        world_seed=1,
        init_cio=0,
        final_cio=final_cio,
        rtg=rtg,
        empty_windows=0,
    )


def test_relative_gain_reproduces_reported_value():
    # means 23.36 vs 23.08 -> +1.2 at one decimal
    gain = relative_gain_pct(23.36, 23.08)
    assert gain == pytest.approx(100.0 * (23.36 - 23.08) / 23.08, rel=1e-15)
    assert round(gain, 1) == 1.2


def test_rgain_zero_against_itself():
    rows = [row("mro", 20.0), row("mro", 24.0, episode=1)]
    rows += [row("dt", 20.0), row("dt", 24.0, episode=1)]
    groups = aggregate_rows(rows, baseline="mro")
    by = {(g.policy, g.group): g for g in groups}
    assert by[("dt", "all")].rgain_pct == pytest.approx(0.0)
    assert by[("mro", "all")].rgain_pct is None


def test_table_fixture_through_the_report():
    rows = [row("mro", 23.08), row("dt", 23.36)]
    report = EvalReport(baseline="mro", rows=rows)
    report.groups = aggregate_rows(rows, "mro")
    assert round(report.rgain("dt"), 1) == 1.2
    assert report.mean_rtg("dt") == pytest.approx(23.36)


def test_identical_policy_gives_identical_episodes():
    report = evaluate(
        candidates={"clone": lambda: make_behavior_policy("mro", CFG.mro_weights, CFG.mro_thresholds)},
        scenarios=[FAST],
        episodes_per_cell=2,
        sim=CFG.sim,
        reward_cfg=CFG.reward,
        weights=CFG.mro_weights,
        thresholds=CFG.mro_thresholds,
        base_seed=0,
    )
    clones = sorted([r for r in report.rows if r.policy == "clone"], key=lambda r: r.episode)
    base = sorted([r for r in report.rows if r.policy == "mro"], key=lambda r: r.episode)
    assert [(r.rtg, r.final_cio, r.world_seed) for r in clones] == [
        (r.rtg, r.final_cio, r.world_seed) for r in base
    ]
    assert report.rgain("clone") == pytest.approx(0.0)


def test_baseline_always_included():
    report = evaluate(
        candidates={"up": lambda: make_behavior_policy("up")},
        scenarios=[FAST],
        episodes_per_cell=1,
        sim=CFG.sim,
        reward_cfg=CFG.reward,
        base_seed=0,
    )
    assert {r.policy for r in report.rows} == {"up", "mro"}


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        evaluate({}, [], 1, CFG.sim, CFG.reward)


def test_histogram_counts_conserved():
    rng = np.random.default_rng(0)
    rows = [row("mro", float(r)) for r in rng.uniform(10, 40, size=37)]
    rows += [row("dt", float(r)) for r in rng.uniform(10, 40, size=23)]
    hist = rtg_histogram(rows, n_bins=8)
    assert sum(hist["policies"]["mro"]) == 37
    assert sum(hist["policies"]["dt"]) == 23
    assert len(hist["edges"]) == 9


def test_report_emit_and_json_roundtrip(tmp_path):
    rows = [row("mro", 23.08), row("dt", 23.36)]
    report = EvalReport(baseline="mro", rows=rows)
    report.groups = aggregate_rows(rows, "mro")
    files = report_emit(report, tmp_path)
    names = {f.name for f in files}
    assert names == {"summary.csv", "episodes.csv", "rtg_hist.csv", "report.json"}
    loaded = EvalReport.from_dict(json.loads((tmp_path / "report.json").read_text()))
    assert loaded.to_dict() == report.to_dict()
    summary = (tmp_path / "summary.csv").read_text()
    assert "+1.2" in summary


def test_report_emit_empty_report(tmp_path):
    report = EvalReport(baseline="mro", rows=[])
    report_emit(report, tmp_path)
    lines = (tmp_path / "summary.csv").read_text().strip().splitlines()
    assert len(lines) == 1  # header only


def test_sweep_saturating_policies():
    down = converged_cio_sweep(
        lambda: make_behavior_policy("down"), FAST.with_(horizon=17), CFG.sim, CFG.reward
    )
    assert set(down.values()) == {-8}
    up = converged_cio_sweep(
        lambda: make_behavior_policy("up"), FAST.with_(horizon=17), CFG.sim, CFG.reward
    )
    assert set(up.values()) == {8}
    assert sweep_mode(down) == -8


def test_sweep_emission(tmp_path):
    sweep = {i: -2 for i in range(-8, 9)}
    path = emit_sweep(sweep, tmp_path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 18
    assert lines[1] == "-8,-2"


def test_baseline_curves_shape(tmp_path):
    curves = baseline_curves(FAST, CFG.sim, CFG.mro_weights, seeds=(1,), windows=2)
    assert len(curves) == 17
    assert all(set(c) == {"cio", "e_sum_mean", "l_sum_mean", "n_all_mean"} for c in curves)
    path = emit_curves(curves, tmp_path)
    assert len(path.read_text().strip().splitlines()) == 18


def test_context_sweep_reports_per_k(tmp_path):
    # micro training budgets: the sweep-and-report protocol is what is
    # under test, not model quality
    from mrolab.dataset import generate_dataset
    from mrolab.evaluate import context_sweep

    tiny = FAST.with_(horizon=7)
    ds = generate_dataset(
        scenarios=[tiny],
        policies=["mro", "rnd"],
        episodes_per_cell=1,
        sim=CFG.sim,
        reward_cfg=CFG.reward,
        base_seed=0,
    )
    rows = context_sweep(
        ds,
        contexts=(3, 4, 5, 7),
        scenarios=[tiny],
        episodes_per_cell=1,
        sim=CFG.sim,
        reward_cfg=CFG.reward,
        weights=CFG.mro_weights,
        thresholds=CFG.mro_thresholds,
        train_kwargs={"steps": 25, "embed": 16, "blocks": 1, "batch_size": 8},
    )
    assert [r["context"] for r in rows] == [3, 4, 5, 7]
    for r in rows:
        assert r["rgain_pct"] is not None
        assert r["model"].cfg.context == r["context"]
        assert r["report"].mean_rtg(f"dt-k{r['context']}") == pytest.approx(r["mean"])
