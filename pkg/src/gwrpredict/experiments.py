"""Experiment harness: training protocols, metrics, sweeps, CSV output.

Runners are pure functions of (config, seed): every random choice is drawn
from a generator seeded by hashing the run seed with fixed role tags, so
reruns produce byte-identical tables. Floats in CSVs are written with repr
(round-trip exact); no timestamps or machine identifiers appear in any
output.

Metrics. Predictions live in second-level code space; the leading
frame_dim components of a code are the frame it stands for. Two errors are
tracked at the configured prediction horizon: the error against the true
future frame, and the error against the hierarchy's own quantized
reconstruction of that frame. The second removes the quantization error of
the two lower levels and isolates the predictive level's contribution,
which is why it generally sits below the first. Both average squared error
over frames, components, and sequences, with equal weight per sequence.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .data import (
    DEFAULT_PATTERNS,
    PATTERNS,
    SIDES,
    MotionSequence,
    corrupt_dropout,
    generate_synthetic,
    load_sequence,
    median_downsample,
    save_sequence,
    subject_style,
)
from .delay import DelayModel, LagReport, run_pipeline, write_lag_report
from .gwr import GwrParams
from .predictive import PredictiveGwrNetwork, RegressorSample, split_window
from .temporal import Hierarchy, HierarchyConfig

__all__ = [
    "DatasetConfig",
    "TrainingConfig",
    "SweepConfig",
    "DelayRunConfig",
    "ExperimentConfig",
    "PatternData",
    "parse_config",
    "load_config",
    "config_to_dict",
    "derive_seed",
    "build_dataset",
    "write_dataset_dir",
    "load_dataset_dir",
    "evaluate_demo",
    "evaluate_suite",
    "IncrementalEpochRecord",
    "PerSequenceRecord",
    "AdaptationRecord",
    "IncrementalResult",
    "run_incremental",
    "write_incremental",
    "SweepAtRow",
    "sweep_activation_threshold",
    "write_sweep_at",
    "SweepHorizonRow",
    "sweep_horizon",
    "write_sweep_horizon",
    "SweepLossRow",
    "sweep_data_loss",
    "write_sweep_loss",
    "DelayDemoRow",
    "run_delay_demo",
    "write_delay_demo",
]


# -- configuration -----------------------------------------------------------------

_DATASET_KINDS = ("synthetic", "files")
_DELAY_MODES = ("fixed", "variable", "baseline")


@dataclass(frozen=True)
class DatasetConfig:
    """Where demonstrations come from.

    kind "synthetic" generates them; kind "files" loads a directory written
    by write_dataset_dir (see its manifest schema). The trailing
    holdout_repetitions of every pattern are reserved for evaluation-only
    use (the delay demo) and never trained on.
    """

    kind: str = "synthetic"
    path: str | None = None
    patterns: tuple[tuple[str, str], ...] = DEFAULT_PATTERNS
    subject_count: int = 3
    repetitions: int = 10
    holdout_repetitions: int = 0
    duration_s: float = 10.0
    fps: float = 10.0
    noise_std: float = 0.0
    style_jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _DATASET_KINDS:
            raise ValueError(f"dataset kind must be one of {_DATASET_KINDS}")
        if self.kind == "files":
            if not self.path:
                raise ValueError("dataset kind 'files' requires a path")
            return
        if not self.patterns:
            raise ValueError("patterns must be nonempty")
        for entry in self.patterns:
            if len(entry) != 2 or entry[0] not in PATTERNS or entry[1] not in SIDES:
                raise ValueError(f"unknown pattern entry {entry!r}")
        if self.subject_count < 1:
            raise ValueError("subject_count must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0 <= self.holdout_repetitions < self.repetitions:
            raise ValueError("holdout_repetitions must leave at least one"
                             " training repetition")
        if self.duration_s < 1.0:
            raise ValueError("duration_s must be >= 1")
        if self.fps <= 0:
            raise ValueError("fps must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.style_jitter < 0:
            raise ValueError("style_jitter must be >= 0")


@dataclass(frozen=True)
class TrainingConfig:
    epochs_per_pattern: int = 50
    presentation_orders: int = 5
    median_downsample: bool = False

    def __post_init__(self) -> None:
        if self.epochs_per_pattern < 1:
            raise ValueError("epochs_per_pattern must be >= 1")
        if self.presentation_orders < 1:
            raise ValueError("presentation_orders must be >= 1")


@dataclass(frozen=True)
class SweepConfig:
    activation_thresholds: tuple[float, ...] = (0.5, 0.7, 0.9, 0.99)
    horizons: tuple[int, ...] = tuple(range(1, 21))
    loss_fractions: tuple[float, ...] = tuple(i / 10 for i in range(10)) + (0.95,)
    loss_chunk_frames: int = 10

    def __post_init__(self) -> None:
        for a in self.activation_thresholds:
            if not 0.0 < a < 1.0:
                raise ValueError("activation thresholds must lie in (0, 1)")
        for h in self.horizons:
            if h < 1:
                raise ValueError("horizons must be >= 1")
        for f in self.loss_fractions:
            if not 0.0 <= f < 1.0:
                raise ValueError("loss fractions must lie in [0, 1)")
        if self.loss_chunk_frames < 1:
            raise ValueError("loss_chunk_frames must be >= 1")


@dataclass(frozen=True)
class DelayRunConfig:
    latency_ms: float = 600.0
    jitter_ms: float = 0.0
    frame_period_ms: float = 100.0
    modes: tuple[str, ...] = ("fixed", "variable", "baseline")

    def __post_init__(self) -> None:
        DelayModel(self.latency_ms, self.jitter_ms, self.frame_period_ms)
        if not self.modes:
            raise ValueError("modes must be nonempty")
        for mode in self.modes:
            if mode not in _DELAY_MODES:
                raise ValueError(f"unknown delay mode {mode!r}")

    def model(self) -> DelayModel:
        return DelayModel(self.latency_ms, self.jitter_ms, self.frame_period_ms)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    sweeps: SweepConfig = field(default_factory=SweepConfig)
    delay: DelayRunConfig = field(default_factory=DelayRunConfig)


def _check_keys(obj: dict, allowed: Iterable[str], what: str) -> None:
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")


def _params_from_obj(obj: dict, base: GwrParams, what: str) -> GwrParams:
    if not isinstance(obj, dict):
        raise ValueError(f"{what} must be an object")
    names = [f.name for f in fields(GwrParams)]
    _check_keys(obj, names, what)
    kwargs = {}
    for name, value in obj.items():
        if name in ("max_edge_age", "max_epochs"):
            kwargs[name] = int(value)
        elif name == "max_neurons":
            kwargs[name] = None if value is None else int(value)
        else:
            kwargs[name] = float(value)
    return replace(base, **kwargs)


def _hierarchy_from_obj(obj: dict) -> HierarchyConfig:
    if not isinstance(obj, dict):
        raise ValueError("hierarchy section must be an object")
    allowed = ("frame_dim", "tau1", "tau2", "output_steps", "prediction_horizon",
               "layer1", "layer2", "layer3")
    _check_keys(obj, allowed, "hierarchy")
    base = HierarchyConfig()
    kwargs = {}
    for name in ("frame_dim", "tau1", "tau2", "output_steps", "prediction_horizon"):
        if name in obj:
            kwargs[name] = int(obj[name])
    for name in ("layer1", "layer2", "layer3"):
        if name in obj:
            kwargs[name] = _params_from_obj(obj[name], getattr(base, name), name)
    return replace(base, **kwargs)


def parse_config(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ValueError("config root must be an object")
    _check_keys(obj, ("dataset", "hierarchy", "training", "sweeps", "delay"), "config")
    kwargs: dict = {}
    if "dataset" in obj:
        section = obj["dataset"]
        if not isinstance(section, dict):
            raise ValueError("dataset section must be an object")
        names = [f.name for f in fields(DatasetConfig)]
        _check_keys(section, names, "dataset")
        section = dict(section)
        if "patterns" in section:
            section["patterns"] = tuple(
                tuple(entry) for entry in section["patterns"]
            )
        kwargs["dataset"] = DatasetConfig(**section)
    if "hierarchy" in obj:
        kwargs["hierarchy"] = _hierarchy_from_obj(obj["hierarchy"])
    if "training" in obj:
        section = obj["training"]
        names = [f.name for f in fields(TrainingConfig)]
        _check_keys(section, names, "training")
        kwargs["training"] = TrainingConfig(**section)
    if "sweeps" in obj:
        section = dict(obj["sweeps"])
        names = [f.name for f in fields(SweepConfig)]
        _check_keys(section, names, "sweeps")
        for name in ("activation_thresholds", "horizons", "loss_fractions"):
            if name in section:
                section[name] = tuple(section[name])
        kwargs["sweeps"] = SweepConfig(**section)
    if "delay" in obj:
        section = dict(obj["delay"])
        names = [f.name for f in fields(DelayRunConfig)]
        _check_keys(section, names, "delay")
        if "modes" in section:
            section["modes"] = tuple(section["modes"])
        kwargs["delay"] = DelayRunConfig(**section)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(Path(path), "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config is not valid JSON: {exc}") from exc
    return parse_config(obj)


def _params_to_dict(params: GwrParams) -> dict:
    return {f.name: getattr(params, f.name) for f in fields(GwrParams)}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-ready mirror of parse_config's input shape."""
    ds = {f.name: getattr(cfg.dataset, f.name) for f in fields(DatasetConfig)}
    ds["patterns"] = [list(entry) for entry in cfg.dataset.patterns]
    hc = cfg.hierarchy
    return {
        "dataset": ds,
        "hierarchy": {
            "frame_dim": hc.frame_dim,
            "tau1": hc.tau1,
            "tau2": hc.tau2,
            "output_steps": hc.output_steps,
            "prediction_horizon": hc.prediction_horizon,
            "layer1": _params_to_dict(hc.layer1),
            "layer2": _params_to_dict(hc.layer2),
            "layer3": _params_to_dict(hc.layer3),
        },
        "training": {f.name: getattr(cfg.training, f.name)
                     for f in fields(TrainingConfig)},
        "sweeps": {
            "activation_thresholds": list(cfg.sweeps.activation_thresholds),
            "horizons": list(cfg.sweeps.horizons),
            "loss_fractions": list(cfg.sweeps.loss_fractions),
            "loss_chunk_frames": cfg.sweeps.loss_chunk_frames,
        },
        "delay": {
            "latency_ms": cfg.delay.latency_ms,
            "jitter_ms": cfg.delay.jitter_ms,
            "frame_period_ms": cfg.delay.frame_period_ms,
            "modes": list(cfg.delay.modes),
        },
    }


# -- dataset construction ------------------------------------------------------------

@dataclass(frozen=True)
class PatternData:
    """All demonstrations of one movement pattern."""

    label: str
    demos: tuple[MotionSequence, ...]
    holdout: tuple[MotionSequence, ...] = ()


def derive_seed(*parts: int) -> int:
    """Stable child seed from integer parts; order-sensitive, collision-safe."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


# Role tags for derive_seed, so different random uses never share streams.
_TAG_STYLE = 0
_TAG_REP = 1
_TAG_ORDER = 2
_TAG_LOSS = 3
_TAG_DELAY = 4


def build_dataset(cfg: ExperimentConfig, seed: int) -> tuple[PatternData, ...]:
    ds = cfg.dataset
    if ds.kind == "files":
        patterns = load_dataset_dir(ds.path)
    else:
        styles = [
            subject_style(ds.style_jitter, seed=derive_seed(seed, _TAG_STYLE, s))
            for s in range(ds.subject_count)
        ]
        patterns = []
        for p, (pattern, side) in enumerate(ds.patterns):
            label = f"{pattern}/{side}"
            demos: list[MotionSequence] = []
            holdout: list[MotionSequence] = []
            for s in range(ds.subject_count):
                for r in range(ds.repetitions):
                    seq = generate_synthetic(
                        pattern, side,
                        duration_s=ds.duration_s, fps=ds.fps, style=styles[s],
                        noise_std=ds.noise_std,
                        seed=derive_seed(seed, _TAG_REP, p, s, r),
                        subject_id=f"s{s}", pattern_label=label,
                    )
                    target = (holdout
                              if r >= ds.repetitions - ds.holdout_repetitions
                              else demos)
                    target.append(seq)
            patterns.append(PatternData(label, tuple(demos), tuple(holdout)))
        patterns = tuple(patterns)
    if cfg.training.median_downsample:
        patterns = tuple(
            PatternData(
                pat.label,
                tuple(median_downsample(d) for d in pat.demos),
                tuple(median_downsample(d) for d in pat.holdout),
            )
            for pat in patterns
        )
    return tuple(patterns)


_DATASET_MAGIC = "motion-dataset"
_DATASET_VERSION = 1


def write_dataset_dir(patterns: Iterable[PatternData], out_dir) -> list[str]:
    """One CSV per demonstration plus manifest.json; returns file names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    names: list[str] = []
    for pi, pat in enumerate(patterns):
        all_reps = list(pat.demos) + list(pat.holdout)
        for ri, seq in enumerate(all_reps):
            name = f"seq_{pi:02d}_{ri:02d}.csv"
            save_sequence(seq, out_dir / name)
            names.append(name)
            entries.append({
                "file": name,
                "pattern_label": pat.label,
                "subject_id": seq.subject_id,
                "repetition": ri,
                "holdout": ri >= len(pat.demos),
            })
    manifest = {"format": _DATASET_MAGIC, "version": _DATASET_VERSION,
                "sequences": entries}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    names.append("manifest.json")
    return names


def load_dataset_dir(path) -> tuple[PatternData, ...]:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"no manifest.json in {path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if (not isinstance(manifest, dict)
            or manifest.get("format") != _DATASET_MAGIC):
        raise ValueError("manifest.json is not a motion-dataset manifest")
    if manifest.get("version") != _DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {manifest.get('version')!r}")
    groups: dict[str, tuple[list[MotionSequence], list[MotionSequence]]] = {}
    order: list[str] = []
    for entry in manifest.get("sequences", []):
        label = entry["pattern_label"]
        seq = load_sequence(path / entry["file"])
        if label not in groups:
            groups[label] = ([], [])
            order.append(label)
        groups[label][1 if entry.get("holdout") else 0].append(seq)
    if not order:
        raise ValueError("dataset manifest lists no sequences")
    return tuple(
        PatternData(label, tuple(groups[label][0]), tuple(groups[label][1]))
        for label in order
    )


# -- evaluation ---------------------------------------------------------------------

def evaluate_demo(hier: Hierarchy, demo: MotionSequence,
                  horizon: int) -> tuple[float, float] | None:
    """(vs-truth MSE, vs-reconstruction MSE) at `horizon`; None if no rows.

    A frame contributes when its segment provides both a full regressor
    window and a code `horizon` steps later.
    """
    order = hier.config.regressor_order
    sq_truth: list[np.ndarray] = []
    sq_recon: list[np.ndarray] = []
    enc = hier.encode_sequence(demo)
    for seg in enc.segments:
        x, ks = seg.regressor_matrix(order)
        m = seg.codes.shape[0]
        valid = ks + horizon <= m - 1
        if not np.any(valid):
            continue
        xv, kv = x[valid], ks[valid]
        pred = hier.predict_codes(xv, horizon)[:, horizon - 1, :]
        pred_frames = hier.frame_view(pred)
        truth = demo.frames[seg.first_frame + kv + horizon]
        recon = hier.frame_view(seg.codes[kv + horizon])
        sq_truth.append((pred_frames - truth) ** 2)
        sq_recon.append((pred_frames - recon) ** 2)
    if not sq_truth:
        return None
    return (float(np.mean(np.concatenate(sq_truth))),
            float(np.mean(np.concatenate(sq_recon))))


def evaluate_suite(hier: Hierarchy, patterns: Iterable[PatternData],
                   horizon: int) -> tuple[float, float, list[tuple[str, float]]]:
    """Suite error at `horizon`, equal weight per pattern.

    Returns (vs-truth MSE, vs-reconstruction MSE, per-pattern vs-truth
    rows). Patterns whose demos yield no evaluable frames are skipped.
    """
    per_truth: list[float] = []
    per_recon: list[float] = []
    rows: list[tuple[str, float]] = []
    for pat in patterns:
        demo_truth: list[float] = []
        demo_recon: list[float] = []
        for demo in pat.demos:
            result = evaluate_demo(hier, demo, horizon)
            if result is None:
                continue
            demo_truth.append(result[0])
            demo_recon.append(result[1])
        if not demo_truth:
            continue
        truth_mse = float(np.mean(demo_truth))
        per_truth.append(truth_mse)
        per_recon.append(float(np.mean(demo_recon)))
        rows.append((pat.label, truth_mse))
    if not per_truth:
        raise ValueError("no pattern produced evaluable frames")
    return float(np.mean(per_truth)), float(np.mean(per_recon)), rows


def _train_joint(cfg: ExperimentConfig,
                 patterns: Iterable[PatternData]) -> Hierarchy:
    """Plain repeated passes over the whole suite; used by the sweeps."""
    hier = Hierarchy(cfg.hierarchy)
    for _ in range(cfg.training.epochs_per_pattern):
        for pat in patterns:
            for demo in pat.demos:
                hier.train_on_sequence(demo, 1)
    return hier


# -- incremental protocol --------------------------------------------------------------

@dataclass(frozen=True)
class IncrementalEpochRecord:
    order: int
    global_epoch: int
    block_index: int
    pattern_label: str
    epoch_in_block: int
    cpe: float
    pe: float
    neuron_counts: tuple[int, int, int]
    step_counts: tuple[int, int, int]


@dataclass(frozen=True)
class PerSequenceRecord:
    order: int
    global_epoch: int
    pattern_label: str
    mse: float


@dataclass(frozen=True)
class AdaptationRecord:
    """How fast the predictive level settles on a newly introduced pattern.

    adaptation_steps counts predictive-level training steps in the block's
    first epoch until the step error first falls below twice the median
    step error of the block's last epoch; -1 means it never did.
    """

    order: int
    block_index: int
    pattern_label: str
    adaptation_steps: int
    threshold: float


@dataclass(frozen=True)
class IncrementalResult:
    records: tuple[IncrementalEpochRecord, ...]
    per_sequence: tuple[PerSequenceRecord, ...]
    adaptation: tuple[AdaptationRecord, ...]
    permutations: tuple[tuple[int, ...], ...]
    mean_rows: tuple[tuple[int, float, float], ...]
    hierarchy: Hierarchy


def _adaptation_record(order: int, block: int, label: str,
                       first_epoch: list[float],
                       last_epoch: list[float]) -> AdaptationRecord:
    if not first_epoch or not last_epoch:
        return AdaptationRecord(order, block, label, -1, float("nan"))
    threshold = 2.0 * float(np.median(last_epoch))
    steps = -1
    for i, err in enumerate(first_epoch):
        if err < threshold:
            steps = i
            break
    return AdaptationRecord(order, block, label, steps, threshold)


def run_incremental(cfg: ExperimentConfig, seed: int) -> IncrementalResult:
    """Patterns introduced one at a time, a fixed epoch budget each.

    Each presentation order is a seeded permutation of the patterns. After
    every epoch the suite error over all patterns introduced so far is
    recorded (both against truth and against the quantized reconstruction),
    along with per-pattern rows. The returned hierarchy is the one trained
    under the first presentation order.
    """
    patterns = build_dataset(cfg, seed)
    epochs = cfg.training.epochs_per_pattern
    horizon = cfg.hierarchy.prediction_horizon
    records: list[IncrementalEpochRecord] = []
    per_sequence: list[PerSequenceRecord] = []
    adaptation: list[AdaptationRecord] = []
    permutations: list[tuple[int, ...]] = []
    first_hierarchy: Hierarchy | None = None

    for order in range(cfg.training.presentation_orders):
        rng = np.random.default_rng(derive_seed(seed, _TAG_ORDER, order))
        perm = tuple(int(v) for v in rng.permutation(len(patterns)))
        permutations.append(perm)
        hier = Hierarchy(cfg.hierarchy)
        introduced: list[PatternData] = []
        global_epoch = 0
        for block, pat_index in enumerate(perm):
            pat = patterns[pat_index]
            introduced.append(pat)
            first_epoch_errors: list[float] = []
            last_epoch_errors: list[float] = []
            for epoch in range(epochs):
                steps = [0, 0, 0]
                epoch_errors: list[float] = []
                for demo in pat.demos:
                    report = hier.train_on_sequence(demo, 1)
                    stat = report.epochs[0]
                    for k in range(3):
                        steps[k] += stat.steps[k]
                    epoch_errors.extend(stat.output_sq_errors)
                if epoch == 0:
                    first_epoch_errors = epoch_errors
                if epoch == epochs - 1:
                    last_epoch_errors = epoch_errors
                cpe, pe, rows = evaluate_suite(hier, introduced, horizon)
                records.append(IncrementalEpochRecord(
                    order=order, global_epoch=global_epoch, block_index=block,
                    pattern_label=pat.label, epoch_in_block=epoch,
                    cpe=cpe, pe=pe,
                    neuron_counts=hier.neuron_counts(),
                    step_counts=(steps[0], steps[1], steps[2]),
                ))
                for label, mse in rows:
                    per_sequence.append(PerSequenceRecord(
                        order, global_epoch, label, mse))
                global_epoch += 1
            adaptation.append(_adaptation_record(
                order, block, pat.label, first_epoch_errors, last_epoch_errors))
        if order == 0:
            first_hierarchy = hier

    by_epoch: dict[int, list[IncrementalEpochRecord]] = {}
    for rec in records:
        by_epoch.setdefault(rec.global_epoch, []).append(rec)
    mean_rows = tuple(
        (epoch,
         float(np.mean([r.cpe for r in group])),
         float(np.mean([r.pe for r in group])))
        for epoch, group in sorted(by_epoch.items())
    )
    assert first_hierarchy is not None
    return IncrementalResult(
        records=tuple(records),
        per_sequence=tuple(per_sequence),
        adaptation=tuple(adaptation),
        permutations=tuple(permutations),
        mean_rows=mean_rows,
        hierarchy=first_hierarchy,
    )


# -- threshold sweep ---------------------------------------------------------------

@dataclass(frozen=True)
class SweepAtRow:
    activation_threshold: float
    neuron_count: int
    mse: float


def _encoded_sample_streams(hier: Hierarchy,
                            patterns: Iterable[PatternData]
                            ) -> list[list[RegressorSample]]:
    """Per-demo regressor/target streams from the frozen lower levels."""
    cfg = hier.config
    window = cfg.regressor_order + cfg.output_steps
    streams: list[list[RegressorSample]] = []
    for pat in patterns:
        for demo in pat.demos:
            samples: list[RegressorSample] = []
            enc = hier.encode_sequence(demo)
            for seg in enc.segments:
                codes = seg.codes
                for t in range(window - 1, codes.shape[0]):
                    stacked = np.concatenate([codes[t - j] for j in range(window)])
                    samples.append(split_window(
                        stacked, cfg.regressor_order, cfg.output_steps))
            if samples:
                streams.append(samples)
    return streams


def _train_predictive_on_streams(streams: list[list[RegressorSample]],
                                 cfg: HierarchyConfig, params: GwrParams,
                                 epochs: int) -> PredictiveGwrNetwork:
    net: PredictiveGwrNetwork | None = None
    pending: RegressorSample | None = None
    for _ in range(epochs):
        for stream in streams:
            for sample in stream:
                if net is None:
                    if pending is None:
                        pending = sample
                    else:
                        net = PredictiveGwrNetwork(
                            pending, sample,
                            regressor_order=cfg.regressor_order,
                            output_steps=cfg.output_steps,
                            params=params,
                        )
                        pending = None
                else:
                    net.train_step(sample)
    if net is None:
        raise ValueError("too few encoded samples to train the predictive level")
    return net


def sweep_activation_threshold(cfg: ExperimentConfig,
                               seed: int) -> tuple[SweepAtRow, ...]:
    """Retrain only the predictive level per threshold, lower levels frozen.

    The two quantization levels are trained once, their encodings of the
    suite are cached, and a fresh predictive network is trained per
    threshold on identical streams. mse is the one-step error in code
    space over those streams.
    """
    if not cfg.sweeps.activation_thresholds:
        raise ValueError("sweeps.activation_thresholds must be nonempty")
    patterns = build_dataset(cfg, seed)
    hier = _train_joint(cfg, patterns)
    streams = _encoded_sample_streams(hier, patterns)
    flat = [s for stream in streams for s in stream]
    if not flat:
        raise ValueError("the suite yields no encoded samples")
    rows = []
    for threshold in cfg.sweeps.activation_thresholds:
        params = replace(cfg.hierarchy.layer3, activation_threshold=threshold)
        net = _train_predictive_on_streams(
            streams, cfg.hierarchy, params, cfg.training.epochs_per_pattern)
        mse, _ = net.prediction_error(flat)
        rows.append(SweepAtRow(threshold, net.neuron_count, mse))
    return tuple(rows)


# -- horizon sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepHorizonRow:
    horizon: int
    mae: float
    mae_std: float
    frame_mae: float
    row_count: int


def sweep_horizon(cfg: ExperimentConfig, seed: int) -> tuple[SweepHorizonRow, ...]:
    """Multi-step error growth over the configured horizons.

    mae is measured in code space (matching prediction_error at horizon 1);
    frame_mae measures only the frame components against the true frames.
    mae_std is the standard deviation of per-frame mean absolute errors.
    """
    if not cfg.sweeps.horizons:
        raise ValueError("sweeps.horizons must be nonempty")
    hc = cfg.hierarchy
    if hc.output_steps > 1 and max(cfg.sweeps.horizons) > hc.output_steps:
        raise ValueError("a vector-mode hierarchy cannot sweep beyond its"
                         " output_steps")
    patterns = build_dataset(cfg, seed)
    hier = _train_joint(cfg, patterns)
    order = hc.regressor_order
    encoded = [(demo, hier.encode_sequence(demo))
               for pat in patterns for demo in pat.demos]
    rows = []
    for horizon in cfg.sweeps.horizons:
        code_abs: list[np.ndarray] = []
        frame_abs: list[np.ndarray] = []
        for demo, enc in encoded:
            for seg in enc.segments:
                x, ks = seg.regressor_matrix(order)
                valid = ks + horizon <= seg.codes.shape[0] - 1
                if not np.any(valid):
                    continue
                xv, kv = x[valid], ks[valid]
                pred = hier.predict_codes(xv, horizon)[:, horizon - 1, :]
                target = seg.codes[kv + horizon]
                code_abs.append(np.abs(pred - target).mean(axis=1))
                truth = demo.frames[seg.first_frame + kv + horizon]
                frame_abs.append(
                    np.abs(hier.frame_view(pred) - truth).mean(axis=1))
        if not code_abs:
            raise ValueError(f"no demo is long enough to evaluate horizon {horizon}")
        per_row = np.concatenate(code_abs)
        per_row_frames = np.concatenate(frame_abs)
        rows.append(SweepHorizonRow(
            horizon=horizon,
            mae=float(per_row.mean()),
            mae_std=float(per_row.std()),
            frame_mae=float(per_row_frames.mean()),
            row_count=int(per_row.shape[0]),
        ))
    return tuple(rows)


# -- data-loss sweep -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepLossRow:
    target_fraction: float
    achieved_fraction: float
    mse: float
    final_mse: float
    neuron_counts: tuple[int, int, int]


def sweep_data_loss(cfg: ExperimentConfig, seed: int) -> tuple[SweepLossRow, ...]:
    """Training robustness to missing chunks of frames.

    Per fraction, a fresh hierarchy trains for the full epoch budget with
    every presentation independently corrupted (fresh chunk placement each
    time); after each epoch the suite error on the clean demos at the
    configured prediction horizon is recorded. mse averages those per-epoch
    values; final_mse is the last epoch's. Epochs where the predictive
    level has not yet formed contribute nothing to the average.
    """
    if not cfg.sweeps.loss_fractions:
        raise ValueError("sweeps.loss_fractions must be nonempty")
    patterns = build_dataset(cfg, seed)
    chunk = cfg.sweeps.loss_chunk_frames
    horizon = cfg.hierarchy.prediction_horizon
    epochs = cfg.training.epochs_per_pattern
    rows = []
    for fi, fraction in enumerate(cfg.sweeps.loss_fractions):
        hier = Hierarchy(cfg.hierarchy)
        epoch_mse: list[float] = []
        achieved_all: list[float] = []
        for epoch in range(epochs):
            for pi, pat in enumerate(patterns):
                for di, demo in enumerate(pat.demos):
                    corrupted, achieved = corrupt_dropout(
                        demo, fraction, chunk_frames=chunk,
                        seed=derive_seed(seed, _TAG_LOSS, fi, epoch, pi, di),
                    )
                    achieved_all.append(achieved)
                    hier.train_on_sequence(corrupted, 1)
            if hier.trained:
                mse, _, _ = evaluate_suite(hier, patterns, horizon)
                epoch_mse.append(mse)
        if not epoch_mse:
            raise ValueError(
                f"fraction {fraction} left too little data to ever train"
                " the predictive level"
            )
        rows.append(SweepLossRow(
            target_fraction=fraction,
            achieved_fraction=float(np.mean(achieved_all)),
            mse=float(np.mean(epoch_mse)),
            final_mse=epoch_mse[-1],
            neuron_counts=hier.neuron_counts(),
        ))
    return tuple(rows)


# -- delay demo ---------------------------------------------------------------------

@dataclass(frozen=True)
class DelayDemoRow:
    pattern_label: str
    repetition: int
    mode: str
    report: LagReport

    @property
    def mean_chosen_index(self) -> float:
        return float(np.mean(self.report.chosen_index))

    @property
    def mean_actual_delay(self) -> float:
        return float(np.mean(self.report.actual_delay))


def run_delay_demo(cfg: ExperimentConfig, seed: int) -> tuple[DelayDemoRow, ...]:
    """Delayed-command simulation on held-out repetitions, per mode.

    All modes of one repetition share the same seed, hence the same drawn
    per-frame delays; only the command-selection rule differs.
    """
    patterns = build_dataset(cfg, seed)
    if not any(pat.holdout for pat in patterns):
        raise ValueError("the delay demo needs holdout_repetitions >= 1")
    hier = _train_joint(cfg, patterns)
    model = cfg.delay.model()
    rows = []
    for pi, pat in enumerate(patterns):
        for ri, demo in enumerate(pat.holdout):
            run_seed = derive_seed(seed, _TAG_DELAY, pi, ri)
            for mode in cfg.delay.modes:
                report = run_pipeline(hier, demo, model, mode=mode, seed=run_seed)
                rows.append(DelayDemoRow(pat.label, ri, mode, report))
    return tuple(rows)


# -- CSV emission -----------------------------------------------------------------

def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])


def write_incremental(result: IncrementalResult, out_dir) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names: list[str] = []
    orders = sorted({rec.order for rec in result.records})
    header = ["global_epoch", "block_index", "pattern_label", "epoch_in_block",
              "cpe", "pe", "neurons_frame", "neurons_window",
              "neurons_predictive", "steps_frame", "steps_window",
              "steps_predictive"]
    for order in orders:
        name = f"incremental_order_{order}.csv"
        _write_csv(out_dir / name, header, (
            [rec.global_epoch, rec.block_index, rec.pattern_label,
             rec.epoch_in_block, rec.cpe, rec.pe,
             rec.neuron_counts[0], rec.neuron_counts[1], rec.neuron_counts[2],
             rec.step_counts[0], rec.step_counts[1], rec.step_counts[2]]
            for rec in result.records if rec.order == order
        ))
        names.append(name)
    _write_csv(out_dir / "incremental_mean.csv",
               ["global_epoch", "cpe_mean", "pe_mean"],
               result.mean_rows)
    names.append("incremental_mean.csv")
    _write_csv(out_dir / "incremental_per_sequence.csv",
               ["order", "global_epoch", "pattern_label", "mse"],
               ([r.order, r.global_epoch, r.pattern_label, r.mse]
                for r in result.per_sequence))
    names.append("incremental_per_sequence.csv")
    _write_csv(out_dir / "adaptation.csv",
               ["order", "block_index", "pattern_label", "adaptation_steps",
                "threshold"],
               ([r.order, r.block_index, r.pattern_label, r.adaptation_steps,
                 r.threshold]
                for r in result.adaptation))
    names.append("adaptation.csv")
    return names


def write_sweep_at(rows: Iterable[SweepAtRow], out_dir) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "sweep_at.csv",
               ["activation_threshold", "neuron_count", "mse"],
               ([r.activation_threshold, r.neuron_count, r.mse] for r in rows))
    return ["sweep_at.csv"]


def write_sweep_horizon(rows: Iterable[SweepHorizonRow], out_dir) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "sweep_horizon.csv",
               ["horizon", "mae", "mae_std", "frame_mae", "row_count"],
               ([r.horizon, r.mae, r.mae_std, r.frame_mae, r.row_count]
                for r in rows))
    return ["sweep_horizon.csv"]


def write_sweep_loss(rows: Iterable[SweepLossRow], out_dir) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "sweep_loss.csv",
               ["target_fraction", "achieved_fraction", "mse", "final_mse",
                "neurons_frame", "neurons_window", "neurons_predictive"],
               ([r.target_fraction, r.achieved_fraction, r.mse, r.final_mse,
                 r.neuron_counts[0], r.neuron_counts[1], r.neuron_counts[2]]
                for r in rows))
    return ["sweep_loss.csv"]


def write_delay_demo(rows: Iterable[DelayDemoRow], out_dir) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names: list[str] = []
    summary = []
    for i, row in enumerate(rows):
        label = row.pattern_label.replace("/", "-")
        name = f"lag_{i:03d}_{label}_rep{row.repetition}_{row.mode}.csv"
        write_lag_report(row.report, out_dir / name)
        names.append(name)
        summary.append([row.pattern_label, row.repetition, row.mode,
                        row.report.row_count, row.report.mse, row.report.mae,
                        row.mean_chosen_index, row.mean_actual_delay])
    _write_csv(out_dir / "delay_summary.csv",
               ["pattern_label", "repetition", "mode", "row_count", "mse",
                "mae", "mean_chosen_index", "mean_actual_delay"],
               summary)
    names.append("delay_summary.csv")
    return names
