"""Tests for the experiment harness: configs, datasets, runners, CSV output."""

import hashlib
import json

import numpy as np
import pytest

from gwrpredict import experiments
from gwrpredict.cli import main
from gwrpredict.data import generate_synthetic
from gwrpredict.delay import DelayModel, LagReport
from gwrpredict.experiments import (
    DatasetConfig,
    DelayRunConfig,
    ExperimentConfig,
    PatternData,
    SweepAtRow,
    SweepConfig,
    SweepHorizonRow,
    SweepLossRow,
    TrainingConfig,
    build_dataset,
    config_to_dict,
    derive_seed,
    evaluate_demo,
    evaluate_suite,
    load_config,
    load_dataset_dir,
    parse_config,
    run_delay_demo,
    run_incremental,
    sweep_activation_threshold,
    sweep_data_loss,
    sweep_horizon,
    write_dataset_dir,
    write_delay_demo,
    write_incremental,
    write_sweep_at,
    write_sweep_horizon,
    write_sweep_loss,
)
from gwrpredict.temporal import load_hierarchy


def _tiny_dict() -> dict:
    # Two short patterns, one subject, one repetition: every runner finishes
    # in well under a second on this while still exercising the real paths.
    return {
        "dataset": {
            "patterns": [["wave", "left"], ["raise-lateral", "right"]],
            "subject_count": 1,
            "repetitions": 1,
            "duration_s": 3.0,
            "fps": 10.0,
        },
        "training": {"epochs_per_pattern": 2, "presentation_orders": 2},
        "sweeps": {
            "activation_thresholds": [0.5, 0.99],
            "horizons": [1, 2, 4],
            "loss_fractions": [0.0, 0.5],
            "loss_chunk_frames": 5,
        },
        "delay": {"latency_ms": 300.0, "jitter_ms": 50.0},
    }


@pytest.fixture(scope="module")
def tiny_cfg():
    return parse_config(_tiny_dict())


@pytest.fixture(scope="module")
def incremental(tiny_cfg):
    return run_incremental(tiny_cfg, seed=5)


# -- config parsing --------------------------------------------------------------


def test_empty_config_gives_defaults():
    cfg = parse_config({})
    assert cfg == ExperimentConfig()
    assert cfg.dataset.kind == "synthetic"
    assert cfg.dataset.subject_count == 3
    assert cfg.dataset.repetitions == 10
    assert cfg.training.epochs_per_pattern == 50
    assert cfg.training.presentation_orders == 5
    assert cfg.sweeps.activation_thresholds == (0.5, 0.7, 0.9, 0.99)
    assert cfg.sweeps.horizons == tuple(range(1, 21))
    assert cfg.sweeps.loss_fractions[-1] == 0.95
    assert cfg.delay.modes == ("fixed", "variable", "baseline")


def test_parse_config_applies_nested_overrides():
    cfg = parse_config({
        "dataset": {"subject_count": 2, "noise_std": 0.05,
                    "patterns": [["wave", "both"]]},
        "hierarchy": {"tau1": 2, "layer3": {"activation_threshold": 0.9,
                                            "max_neurons": 50}},
        "training": {"epochs_per_pattern": 7},
        "sweeps": {"horizons": [1, 5]},
        "delay": {"modes": ["fixed"]},
    })
    assert cfg.dataset.subject_count == 2
    assert cfg.dataset.patterns == (("wave", "both"),)
    assert cfg.hierarchy.tau1 == 2
    assert cfg.hierarchy.layer3.activation_threshold == 0.9
    assert cfg.hierarchy.layer3.max_neurons == 50
    # untouched layer fields keep their layer defaults
    assert cfg.hierarchy.layer3.max_edge_age == 300
    assert cfg.hierarchy.layer1.max_edge_age == 100
    assert cfg.training.epochs_per_pattern == 7
    assert cfg.sweeps.horizons == (1, 5)
    assert cfg.delay.modes == ("fixed",)


@pytest.mark.parametrize("obj, what", [
    ({"bogus": {}}, "config"),
    ({"dataset": {"bogus": 1}}, "dataset"),
    ({"hierarchy": {"bogus": 1}}, "hierarchy"),
    ({"hierarchy": {"layer2": {"bogus": 1}}}, "layer2"),
    ({"training": {"bogus": 1}}, "training"),
    ({"sweeps": {"bogus": 1}}, "sweeps"),
    ({"delay": {"bogus": 1}}, "delay"),
])
def test_parse_config_rejects_unknown_keys(obj, what):
    with pytest.raises(ValueError, match=f"unknown {what} keys"):
        parse_config(obj)


@pytest.mark.parametrize("obj", [
    {"dataset": {"kind": "bogus"}},
    {"dataset": {"kind": "files"}},  # files without a path
    {"dataset": {"patterns": []}},
    {"dataset": {"patterns": [["spin", "left"]]}},
    {"dataset": {"repetitions": 2, "holdout_repetitions": 2}},
    {"dataset": {"duration_s": 0.5}},
    {"dataset": {"noise_std": -0.1}},
    {"training": {"epochs_per_pattern": 0}},
    {"sweeps": {"activation_thresholds": [1.0]}},
    {"sweeps": {"horizons": [0]}},
    {"sweeps": {"loss_fractions": [1.0]}},
    {"sweeps": {"loss_chunk_frames": 0}},
    {"delay": {"modes": []}},
    {"delay": {"modes": ["sometimes"]}},
    {"delay": {"latency_ms": -1.0}},
])
def test_parse_config_rejects_bad_values(obj):
    with pytest.raises(ValueError):
        parse_config(obj)


def test_parse_config_rejects_non_object_sections():
    with pytest.raises(ValueError, match="config root"):
        parse_config([1, 2])
    with pytest.raises(ValueError, match="dataset section"):
        parse_config({"dataset": 5})
    with pytest.raises(ValueError, match="hierarchy section"):
        parse_config({"hierarchy": []})
    with pytest.raises(ValueError, match="layer1 must be an object"):
        parse_config({"hierarchy": {"layer1": 3}})


def test_config_round_trips_through_dict():
    cfg = parse_config({
        "dataset": {"subject_count": 1, "repetitions": 4,
                    "holdout_repetitions": 1, "style_jitter": 0.1},
        "hierarchy": {"output_steps": 1, "prediction_horizon": 4,
                      "layer1": {"max_neurons": 30},
                      "layer2": {"learning_rate_bmu": 0.2}},
        "sweeps": {"loss_fractions": [0.0, 0.25], "loss_chunk_frames": 4},
        "delay": {"jitter_ms": 120.0, "modes": ["baseline", "fixed"]},
    })
    obj = config_to_dict(cfg)
    # the mirror is JSON-ready and parses back to an equal config
    assert parse_config(json.loads(json.dumps(obj))) == cfg


def test_load_config_reads_json_files(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(_tiny_dict()), encoding="utf-8")
    assert load_config(path) == parse_config(_tiny_dict())

    bad = tmp_path / "bad.json"
    bad.write_text("{nope", encoding="utf-8")
    with pytest.raises(ValueError, match="config is not valid JSON"):
        load_config(bad)


def test_delay_run_config_builds_model():
    cfg = DelayRunConfig(latency_ms=250.0, jitter_ms=30.0, frame_period_ms=50.0)
    assert cfg.model() == DelayModel(250.0, 30.0, 50.0)


# -- seed derivation --------------------------------------------------------------


def test_derive_seed_is_stable_and_order_sensitive():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert derive_seed(0, 0) != derive_seed(0, 1)
    # contract: the value is SeedSequence's first uint64 word for the parts
    expected = int(np.random.SeedSequence([7, 1, 2]).generate_state(1, np.uint64)[0])
    assert derive_seed(7, 1, 2) == expected
    assert 0 <= derive_seed(3) < 2 ** 64


# -- dataset construction ----------------------------------------------------------


def test_build_dataset_counts_labels_and_split():
    cfg = parse_config({
        "dataset": {"patterns": [["wave", "left"], ["raise-lateral", "right"]],
                    "subject_count": 2, "repetitions": 3,
                    "holdout_repetitions": 1, "duration_s": 3.0},
    })
    patterns = build_dataset(cfg, seed=11)
    assert [p.label for p in patterns] == ["wave/left", "raise-lateral/right"]
    for pat in patterns:
        # per subject, the last repetition goes to the holdout split
        assert len(pat.demos) == 4
        assert len(pat.holdout) == 2
        assert [d.subject_id for d in pat.demos] == ["s0", "s0", "s1", "s1"]
        assert [d.subject_id for d in pat.holdout] == ["s0", "s1"]
        for seq in pat.demos + pat.holdout:
            assert seq.frames.shape == (30, 8)
            assert seq.pattern_label == pat.label


def test_build_dataset_is_seed_deterministic(tiny_cfg):
    a = build_dataset(tiny_cfg, seed=4)
    b = build_dataset(tiny_cfg, seed=4)
    c = build_dataset(tiny_cfg, seed=5)
    for pa, pb in zip(a, b):
        for da, db in zip(pa.demos, pb.demos):
            assert np.array_equal(da.frames, db.frames)
    assert not np.array_equal(a[0].demos[0].frames, c[0].demos[0].frames)


def test_build_dataset_repetitions_differ():
    cfg = parse_config({
        "dataset": {"patterns": [["wave", "left"]], "subject_count": 1,
                    "repetitions": 2, "duration_s": 3.0},
    })
    pat = build_dataset(cfg, seed=0)[0]
    # each repetition draws its own starting phase
    assert not np.array_equal(pat.demos[0].frames, pat.demos[1].frames)


def test_build_dataset_applies_median_downsample():
    obj = _tiny_dict()
    obj["training"]["median_downsample"] = True
    patterns = build_dataset(parse_config(obj), seed=2)
    for pat in patterns:
        for seq in pat.demos:
            assert seq.frames.shape[0] == 10  # 30 frames, window of three
            assert seq.fps == pytest.approx(10.0 / 3.0)


# -- dataset files ----------------------------------------------------------------


def test_dataset_dir_round_trip(tmp_path):
    cfg = parse_config({
        "dataset": {"patterns": [["wave", "left"], ["circle-cw", "both"]],
                    "subject_count": 2, "repetitions": 3,
                    "holdout_repetitions": 1, "duration_s": 3.0,
                    "noise_std": 0.01},
    })
    patterns = build_dataset(cfg, seed=9)
    names = write_dataset_dir(patterns, tmp_path)
    assert names[-1] == "manifest.json"
    assert len(names) == 13  # 2 patterns x 6 repetitions, plus the manifest
    for name in names:
        assert (tmp_path / name).exists()

    manifest = json.loads((tmp_path / "manifest.json").read_text("utf-8"))
    assert manifest["format"] == "motion-dataset"
    assert manifest["version"] == 1
    entries = manifest["sequences"]
    assert len(entries) == 12
    assert sum(e["holdout"] for e in entries) == 4
    assert {e["pattern_label"] for e in entries} == {"wave/left", "circle-cw/both"}

    loaded = load_dataset_dir(tmp_path)
    assert [p.label for p in loaded] == [p.label for p in patterns]
    for orig, back in zip(patterns, loaded):
        assert len(back.demos) == len(orig.demos)
        assert len(back.holdout) == len(orig.holdout)
        for a, b in zip(orig.demos + orig.holdout, back.demos + back.holdout):
            assert np.array_equal(a.frames, b.frames)  # hex floats, lossless
            assert a.subject_id == b.subject_id
            assert b.pattern_label == orig.label


def test_build_dataset_from_files_kind(tmp_path):
    patterns = build_dataset(parse_config(_tiny_dict()), seed=3)
    write_dataset_dir(patterns, tmp_path)
    cfg = parse_config({"dataset": {"kind": "files", "path": str(tmp_path)}})
    loaded = build_dataset(cfg, seed=999)  # seed is irrelevant for files
    assert [p.label for p in loaded] == [p.label for p in patterns]
    assert np.array_equal(loaded[0].demos[0].frames, patterns[0].demos[0].frames)


def test_load_dataset_dir_rejects_bad_manifests(tmp_path):
    with pytest.raises(ValueError, match="no manifest.json"):
        load_dataset_dir(tmp_path / "missing")

    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.json").write_text('{"format": "something-else"}', "utf-8")
    with pytest.raises(ValueError, match="not a motion-dataset manifest"):
        load_dataset_dir(bad)

    (bad / "manifest.json").write_text(
        '{"format": "motion-dataset", "version": 9}', "utf-8")
    with pytest.raises(ValueError, match="unsupported dataset version"):
        load_dataset_dir(bad)

    (bad / "manifest.json").write_text(
        '{"format": "motion-dataset", "version": 1, "sequences": []}', "utf-8")
    with pytest.raises(ValueError, match="lists no sequences"):
        load_dataset_dir(bad)


# -- evaluation --------------------------------------------------------------------


def test_evaluate_demo_matches_per_row_recomputation(incremental):
    hier = incremental.hierarchy
    demo = generate_synthetic("wave", "left", duration_s=3.0, fps=10.0, seed=77)
    horizon = 2
    got = evaluate_demo(hier, demo, horizon)
    assert got is not None

    # recompute one row at a time through the single-regressor path
    enc = hier.encode_sequence(demo)
    seg = enc.segments[0]
    codes = seg.codes
    order = hier.config.regressor_order
    sq_truth, sq_recon = [], []
    for k in range(order - 1, codes.shape[0]):
        if k + horizon > codes.shape[0] - 1:
            continue
        reg = np.concatenate([codes[k - j] for j in range(order)])
        pred = hier.predict_codes(reg[None, :], horizon)[:, horizon - 1, :]
        frame = hier.frame_view(pred)[0]
        truth = demo.frames[seg.first_frame + k + horizon]
        recon = hier.frame_view(codes[k + horizon][None, :])[0]
        sq_truth.append((frame - truth) ** 2)
        sq_recon.append((frame - recon) ** 2)
    assert got[0] == pytest.approx(float(np.mean(np.vstack(sq_truth))), rel=1e-12)
    assert got[1] == pytest.approx(float(np.mean(np.vstack(sq_recon))), rel=1e-12)


def test_evaluate_demo_returns_none_without_rows(incremental):
    # 10 frames encode to 8 codes; no code sits 6 steps past a full window
    short = generate_synthetic("wave", "left", duration_s=1.0, fps=10.0, seed=1)
    assert evaluate_demo(incremental.hierarchy, short, horizon=6) is None


def test_evaluate_suite_weights_patterns_equally(incremental):
    hier = incremental.hierarchy
    d1 = generate_synthetic("wave", "left", duration_s=3.0, fps=10.0, seed=21)
    d2 = generate_synthetic("raise-lateral", "right", duration_s=3.0, fps=10.0,
                            seed=22)
    d3 = generate_synthetic("raise-lateral", "right", duration_s=3.0, fps=10.0,
                            seed=23)
    pats = [PatternData("a", (d1,)), PatternData("b", (d2, d3))]
    cpe, pe, rows = evaluate_suite(hier, pats, horizon=2)

    e1 = evaluate_demo(hier, d1, 2)
    e2 = evaluate_demo(hier, d2, 2)
    e3 = evaluate_demo(hier, d3, 2)
    b_truth = float(np.mean([e2[0], e3[0]]))
    assert rows == [("a", e1[0]), ("b", b_truth)]
    assert cpe == float(np.mean([e1[0], b_truth]))
    assert pe == float(np.mean([e1[1], float(np.mean([e2[1], e3[1]]))]))


def test_evaluate_suite_skips_and_rejects_empty(incremental):
    hier = incremental.hierarchy
    good = generate_synthetic("wave", "left", duration_s=3.0, fps=10.0, seed=31)
    short = generate_synthetic("wave", "left", duration_s=1.0, fps=10.0, seed=32)
    cpe, _, rows = evaluate_suite(
        hier, [PatternData("good", (good,)), PatternData("short", (short,))],
        horizon=6)
    assert [label for label, _ in rows] == ["good"]
    assert cpe == rows[0][1]

    with pytest.raises(ValueError, match="no pattern produced evaluable frames"):
        evaluate_suite(hier, [PatternData("short", (short,))], horizon=6)


# -- incremental protocol -----------------------------------------------------------


def test_run_incremental_record_structure(tiny_cfg, incremental):
    res = incremental
    orders = tiny_cfg.training.presentation_orders
    epochs = tiny_cfg.training.epochs_per_pattern
    assert len(res.records) == orders * 2 * epochs
    assert len(res.permutations) == orders
    for perm in res.permutations:
        assert sorted(perm) == [0, 1]

    patterns = build_dataset(tiny_cfg, seed=5)
    for order in range(orders):
        recs = [r for r in res.records if r.order == order]
        assert [r.global_epoch for r in recs] == list(range(2 * epochs))
        assert [r.block_index for r in recs] == [0, 0, 1, 1]
        assert [r.epoch_in_block for r in recs] == [0, 1, 0, 1]
        perm = res.permutations[order]
        assert [r.pattern_label for r in recs] == [
            patterns[perm[0]].label, patterns[perm[0]].label,
            patterns[perm[1]].label, patterns[perm[1]].label,
        ]
        for r in recs:
            assert r.cpe > 0 and r.pe > 0
            assert all(n >= 2 for n in r.neuron_counts)

    # 30-frame demos: the very first epoch burns two seeds per level
    first = [r for r in res.records if r.order == 0]
    assert first[0].step_counts == (28, 26, 23)
    assert first[1].step_counts == (30, 28, 25)
    assert first[2].step_counts == (30, 28, 25)
    assert first[3].step_counts == (30, 28, 25)

    # the returned hierarchy is the order-0 one, in its final state
    assert res.hierarchy.neuron_counts() == first[-1].neuron_counts


def test_run_incremental_per_sequence_and_adaptation(tiny_cfg, incremental):
    res = incremental
    # block 0 evaluates one pattern per epoch, block 1 evaluates both
    per_order = tiny_cfg.training.epochs_per_pattern * (1 + 2)
    assert len(res.per_sequence) == tiny_cfg.training.presentation_orders * per_order

    by_key = {(r.order, r.global_epoch) for r in res.per_sequence}
    for rec in res.records:
        assert (rec.order, rec.global_epoch) in by_key

    assert len(res.adaptation) == tiny_cfg.training.presentation_orders * 2
    for a in res.adaptation:
        assert a.threshold > 0
        assert a.adaptation_steps >= -1
    # the first block's record belongs to the first introduced pattern
    patterns = build_dataset(tiny_cfg, seed=5)
    for order, perm in enumerate(res.permutations):
        rec = [a for a in res.adaptation if a.order == order][0]
        assert rec.block_index == 0
        assert rec.pattern_label == patterns[perm[0]].label


def test_run_incremental_mean_rows_recompute(incremental):
    res = incremental
    by_epoch = {}
    for rec in res.records:
        by_epoch.setdefault(rec.global_epoch, []).append(rec)
    expected = tuple(
        (epoch,
         float(np.mean([r.cpe for r in group])),
         float(np.mean([r.pe for r in group])))
        for epoch, group in sorted(by_epoch.items())
    )
    assert res.mean_rows == expected


def test_run_incremental_is_deterministic(tiny_cfg, incremental):
    again = run_incremental(tiny_cfg, seed=5)
    assert again.records == incremental.records
    assert again.per_sequence == incremental.per_sequence
    assert again.adaptation == incremental.adaptation
    assert again.permutations == incremental.permutations
    assert again.mean_rows == incremental.mean_rows

    other = run_incremental(tiny_cfg, seed=6)
    assert other.records != incremental.records


def test_run_incremental_single_pattern_cpe_is_demo_mse():
    obj = _tiny_dict()
    obj["dataset"]["patterns"] = [["wave", "left"]]
    obj["training"]["presentation_orders"] = 1
    cfg = parse_config(obj)
    res = run_incremental(cfg, seed=8)
    patterns = build_dataset(cfg, seed=8)
    demo = patterns[0].demos[0]
    expected = evaluate_demo(res.hierarchy, demo, cfg.hierarchy.prediction_horizon)
    assert res.records[-1].cpe == expected[0]
    assert res.records[-1].pe == expected[1]


# -- sweeps ------------------------------------------------------------------------


def test_sweep_activation_threshold_grows_with_threshold():
    obj = _tiny_dict()
    obj["training"]["epochs_per_pattern"] = 5
    cfg = parse_config(obj)
    rows = sweep_activation_threshold(cfg, seed=5)
    assert [r.activation_threshold for r in rows] == [0.5, 0.99]
    assert all(r.neuron_count >= 2 for r in rows)
    assert rows[1].neuron_count > rows[0].neuron_count
    assert all(np.isfinite(r.mse) and r.mse >= 0 for r in rows)


def test_sweep_activation_threshold_rejects_empty(tiny_cfg):
    from dataclasses import replace
    cfg = replace(tiny_cfg, sweeps=replace(tiny_cfg.sweeps,
                                           activation_thresholds=()))
    with pytest.raises(ValueError, match="activation_thresholds"):
        sweep_activation_threshold(cfg, seed=0)


def test_sweep_horizon_row_counts_and_first_horizon(tiny_cfg):
    rows = sweep_horizon(tiny_cfg, seed=5)
    assert [r.horizon for r in rows] == [1, 2, 4]
    # 30 frames -> 28 codes per demo; a horizon step costs one row per demo
    assert [r.row_count for r in rows] == [50, 48, 44]
    assert all(np.isfinite(r.mae) and r.mae > 0 for r in rows)
    assert all(np.isfinite(r.mae_std) for r in rows)
    assert all(np.isfinite(r.frame_mae) and r.frame_mae > 0 for r in rows)

    # at horizon 1 the code-space mae equals the predictive level's own
    # one-step error over the identical encoded streams
    patterns = build_dataset(tiny_cfg, seed=5)
    hier = experiments._train_joint(tiny_cfg, patterns)
    streams = experiments._encoded_sample_streams(hier, patterns)
    flat = [s for stream in streams for s in stream]
    _, mae = hier.pgwr.prediction_error(flat)
    assert rows[0].mae == pytest.approx(mae, rel=1e-12)


def test_sweep_horizon_rejects_vector_mode_overreach():
    obj = _tiny_dict()
    obj["hierarchy"] = {"output_steps": 3, "prediction_horizon": 2}
    obj["sweeps"]["horizons"] = [1, 2, 4]
    with pytest.raises(ValueError, match="cannot sweep beyond"):
        sweep_horizon(parse_config(obj), seed=0)


def test_sweep_data_loss_rows(tiny_cfg):
    rows = sweep_data_loss(tiny_cfg, seed=5)
    assert [r.target_fraction for r in rows] == [0.0, 0.5]
    assert rows[0].achieved_fraction == 0.0
    # 30 frames, chunks of 5: half the frames is exactly three chunks
    assert rows[1].achieved_fraction == 0.5
    for r in rows:
        assert np.isfinite(r.mse) and r.mse > 0
        assert np.isfinite(r.final_mse) and r.final_mse > 0
        assert all(n >= 2 for n in r.neuron_counts)
    assert sweep_data_loss(tiny_cfg, seed=5) == rows


# -- delay demo --------------------------------------------------------------------


def test_run_delay_demo_requires_holdout(tiny_cfg):
    with pytest.raises(ValueError, match="holdout_repetitions"):
        run_delay_demo(tiny_cfg, seed=0)


def test_run_delay_demo_rows_align_across_modes():
    obj = _tiny_dict()
    obj["dataset"]["repetitions"] = 2
    obj["dataset"]["holdout_repetitions"] = 1
    cfg = parse_config(obj)
    rows = run_delay_demo(cfg, seed=7)
    assert len(rows) == 2 * 1 * 3  # patterns x holdout reps x modes
    assert {r.mode for r in rows} == {"fixed", "variable", "baseline"}

    by_run = {}
    for row in rows:
        by_run.setdefault((row.pattern_label, row.repetition), []).append(row)
    assert len(by_run) == 2
    for group in by_run.values():
        assert len(group) == 3
        base = group[0].report
        for other in group[1:]:
            # one seed per repetition: every mode sees the same drawn delays
            assert np.array_equal(other.report.actual_delay, base.actual_delay)
            assert np.array_equal(other.report.frame_index, base.frame_index)
            assert np.array_equal(other.report.truth, base.truth)
        for row in group:
            assert row.report.mode == row.mode
            assert row.mean_chosen_index == float(np.mean(row.report.chosen_index))
            assert row.mean_actual_delay == float(np.mean(row.report.actual_delay))


# -- csv writers -------------------------------------------------------------------


def test_write_incremental_files(incremental, tmp_path):
    names = write_incremental(incremental, tmp_path)
    assert names == ["incremental_order_0.csv", "incremental_order_1.csv",
                     "incremental_mean.csv", "incremental_per_sequence.csv",
                     "adaptation.csv"]
    import csv as csv_mod
    with open(tmp_path / "incremental_order_0.csv", newline="") as fh:
        rows = list(csv_mod.reader(fh))
    assert rows[0] == ["global_epoch", "block_index", "pattern_label",
                       "epoch_in_block", "cpe", "pe", "neurons_frame",
                       "neurons_window", "neurons_predictive", "steps_frame",
                       "steps_window", "steps_predictive"]
    recs = [r for r in incremental.records if r.order == 0]
    assert len(rows) == 1 + len(recs)
    # repr floats round-trip exactly through the file
    assert float(rows[1][4]) == recs[0].cpe
    assert float(rows[1][5]) == recs[0].pe
    assert int(rows[1][6]) == recs[0].neuron_counts[0]

    with open(tmp_path / "incremental_mean.csv", newline="") as fh:
        mean_rows = list(csv_mod.reader(fh))
    assert mean_rows[0] == ["global_epoch", "cpe_mean", "pe_mean"]
    assert [(int(r[0]), float(r[1]), float(r[2])) for r in mean_rows[1:]] \
        == list(incremental.mean_rows)

    with open(tmp_path / "incremental_per_sequence.csv", newline="") as fh:
        seq_rows = list(csv_mod.reader(fh))
    assert len(seq_rows) == 1 + len(incremental.per_sequence)

    with open(tmp_path / "adaptation.csv", newline="") as fh:
        adapt_rows = list(csv_mod.reader(fh))
    assert adapt_rows[0] == ["order", "block_index", "pattern_label",
                             "adaptation_steps", "threshold"]
    assert len(adapt_rows) == 1 + len(incremental.adaptation)


def test_write_sweep_tables_exact_bytes(tmp_path):
    write_sweep_at([SweepAtRow(0.5, 10, 0.03125), SweepAtRow(0.99, 40, 0.015)],
                   tmp_path)
    assert (tmp_path / "sweep_at.csv").read_text("ascii") == (
        "activation_threshold,neuron_count,mse\n"
        "0.5,10,0.03125\n"
        "0.99,40,0.015\n"
    )

    write_sweep_horizon([SweepHorizonRow(1, 0.25, 0.125, 0.5, 44)], tmp_path)
    assert (tmp_path / "sweep_horizon.csv").read_text("ascii") == (
        "horizon,mae,mae_std,frame_mae,row_count\n"
        "1,0.25,0.125,0.5,44\n"
    )

    write_sweep_loss([SweepLossRow(0.5, 0.5, 2.0, 1.5, (4, 5, 6))], tmp_path)
    assert (tmp_path / "sweep_loss.csv").read_text("ascii") == (
        "target_fraction,achieved_fraction,mse,final_mse,"
        "neurons_frame,neurons_window,neurons_predictive\n"
        "0.5,0.5,2.0,1.5,4,5,6\n"
    )


def test_write_delay_demo_files(tmp_path):
    report = LagReport(
        mode="fixed",
        delay=DelayModel(200.0, 0.0, 100.0),
        frame_index=np.array([4, 5]),
        chosen_index=np.array([2, 2]),
        actual_delay=np.array([2, 2]),
        command=np.array([[0.0, 1.0], [1.0, 1.0]]),
        truth=np.array([[0.0, 0.0], [1.0, 0.0]]),
    )
    row = experiments.DelayDemoRow("wave/left", 0, "fixed", report)
    names = write_delay_demo([row], tmp_path)
    assert names == ["lag_000_wave-left_rep0_fixed.csv", "delay_summary.csv"]
    text = (tmp_path / "delay_summary.csv").read_text("ascii")
    assert text == (
        "pattern_label,repetition,mode,row_count,mse,mae,"
        "mean_chosen_index,mean_actual_delay\n"
        "wave/left,0,fixed,2,0.5,0.5,2.0,2.0\n"
    )
    lag = (tmp_path / "lag_000_wave-left_rep0_fixed.csv").read_text("ascii")
    assert lag.splitlines()[0] == ("frame_index,chosen_index,actual_delay,"
                                   "cmd_0,cmd_1,truth_0,truth_1,abs_error")


# -- command line ------------------------------------------------------------------


def _write_cfg(tmp_path, obj=None, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj if obj is not None else _tiny_dict()),
                    encoding="utf-8")
    return path


def _read_manifest(out_dir):
    return json.loads((out_dir / "run_manifest.json").read_text("utf-8"))


def test_cli_gen_data_writes_dataset_and_manifest(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["gen-data", str(cfg_path), "--seed", "3",
                 "--out-dir", str(out)]) == 0
    captured = capsys.readouterr()
    assert "wrote 2 sequences across 2 patterns" in captured.out

    manifest = _read_manifest(out)
    assert manifest["format"] == "run-manifest"
    assert manifest["version"] == 1
    assert manifest["verb"] == "gen-data"
    assert manifest["seed"] == 3
    assert manifest["numpy_version"] == np.__version__
    assert manifest["config_sha256"] == hashlib.sha256(
        cfg_path.read_bytes()).hexdigest()
    assert sorted(manifest["outputs"]) == ["manifest.json", "seq_00_00.csv",
                                           "seq_01_00.csv"]
    for name in manifest["outputs"]:
        assert (out / name).exists()
    # the written dataset matches an in-process build at the same seed
    loaded = load_dataset_dir(out)
    built = build_dataset(parse_config(_tiny_dict()), seed=3)
    assert np.array_equal(loaded[0].demos[0].frames, built[0].demos[0].frames)


def test_cli_train_is_byte_reproducible(tmp_path, capsys):
    obj = _tiny_dict()
    obj["training"]["presentation_orders"] = 1
    cfg_path = _write_cfg(tmp_path, obj)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["train", str(cfg_path), "--seed", "2",
                 "--out-dir", str(out1)]) == 0
    assert main(["train", str(cfg_path), "--seed", "2",
                 "--out-dir", str(out2)]) == 0
    capsys.readouterr()

    names1 = sorted(p.name for p in out1.iterdir())
    assert names1 == sorted(p.name for p in out2.iterdir())
    assert "hierarchy.gwrh" in names1
    assert "run_manifest.json" in names1
    for name in names1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    hier = load_hierarchy(out1 / "hierarchy.gwrh")
    assert hier.trained


def test_cli_train_custom_snapshot_path(tmp_path, capsys):
    obj = _tiny_dict()
    obj["training"]["presentation_orders"] = 1
    cfg_path = _write_cfg(tmp_path, obj)
    out = tmp_path / "run"
    snap = tmp_path / "elsewhere" / "model.gwrh"
    snap.parent.mkdir()
    assert main(["train", str(cfg_path), "--seed", "2", "--out-dir", str(out),
                 "--snapshot", str(snap)]) == 0
    capsys.readouterr()
    assert snap.exists()
    assert str(snap) in _read_manifest(out)["outputs"]
    assert load_hierarchy(snap).trained


@pytest.mark.parametrize("verb, table", [
    ("sweep-at", "sweep_at.csv"),
    ("sweep-horizon", "sweep_horizon.csv"),
    ("sweep-loss", "sweep_loss.csv"),
])
def test_cli_sweep_verbs_write_tables(tmp_path, capsys, verb, table):
    cfg_path = _write_cfg(tmp_path)
    out = tmp_path / verb
    assert main([verb, str(cfg_path), "--seed", "4", "--out-dir", str(out)]) == 0
    capsys.readouterr()
    assert (out / table).exists()
    manifest = _read_manifest(out)
    assert manifest["verb"] == verb
    assert manifest["outputs"] == [table]


def test_cli_delay_demo_writes_lag_files(tmp_path, capsys):
    obj = _tiny_dict()
    obj["dataset"]["repetitions"] = 2
    obj["dataset"]["holdout_repetitions"] = 1
    cfg_path = _write_cfg(tmp_path, obj)
    out = tmp_path / "delay"
    assert main(["delay-demo", str(cfg_path), "--seed", "4",
                 "--out-dir", str(out)]) == 0
    captured = capsys.readouterr()
    assert "mean mae" in captured.out
    assert (out / "delay_summary.csv").exists()
    lag_files = sorted(p.name for p in out.glob("lag_*.csv"))
    assert len(lag_files) == 6  # 2 patterns x 1 holdout rep x 3 modes
    assert set(_read_manifest(out)["outputs"]) == {"delay_summary.csv",
                                                   *lag_files}


def test_cli_reports_errors_with_exit_code_two(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["train", str(missing), "--out-dir", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{nope", encoding="utf-8")
    assert main(["train", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err

    unknown = _write_cfg(tmp_path, {"bogus": 1}, name="unknown.json")
    assert main(["train", str(unknown), "--out-dir", str(tmp_path)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_cli_requires_a_verb(capsys):
    with pytest.raises(SystemExit):
        main([])
    capsys.readouterr()
