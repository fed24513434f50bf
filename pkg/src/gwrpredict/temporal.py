"""Sliding-window temporal encoding and the three-level predictive hierarchy.

The hierarchy chains two growing networks and one predictive network:
frames are quantized by the first network, windows of its winning
prototypes (newest first) are quantized by the second network, and windows
of second-level prototypes are split into regressor/target pairs that
train the predictive network. Each level therefore sees an increasingly
long span of time; with window sizes tau1 and tau2 a single top-level
sample covers tau1 + tau2 - 1 frames.

Window encoders emit nothing until their buffer has filled once
(the warm-up), and they are reset at the start of every sequence
presentation and at every gap inside a sequence, so no window ever spans a
discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from ._serial import LineReader, expect_header, parse_int, read_field
from .data import FRAME_DIM, MotionSequence
from .gwr import (
    GwrNetwork,
    GwrParams,
    StepReport,
    _as_matrix,
    _read_params,
    _write_params,
    read_network,
    write_network,
)
from .predictive import (
    PredictiveGwrNetwork,
    RegressorSample,
    read_predictive_network,
    split_window,
    write_predictive_network,
)

__all__ = [
    "WindowEncoder",
    "HierarchyConfig",
    "Hierarchy",
    "EpochStats",
    "TrainingReport",
    "EncodedSegment",
    "EncodedSequence",
    "save_hierarchy",
    "load_hierarchy",
    "write_hierarchy",
    "read_hierarchy",
]


class WindowEncoder:
    """Sliding window that concatenates the last `tau` vectors, newest first.

    push returns None until `tau` vectors have arrived since the last
    reset; afterwards it returns the concatenation of the buffered vectors
    with the newest at the front, once per push (stride 1).
    """

    def __init__(self, tau: int, element_dim: int):
        if tau < 1:
            raise ValueError("tau must be >= 1")
        if element_dim < 1:
            raise ValueError("element_dim must be >= 1")
        self._tau = tau
        self._dim = element_dim
        self._buf: list[np.ndarray] = []

    @property
    def tau(self) -> int:
        return self._tau

    @property
    def element_dim(self) -> int:
        return self._dim

    @property
    def output_dim(self) -> int:
        return self._tau * self._dim

    @property
    def fill(self) -> int:
        return len(self._buf)

    def reset(self) -> None:
        self._buf.clear()

    def push(self, element) -> np.ndarray | None:
        element = np.asarray(element, dtype=np.float64)
        if element.shape != (self._dim,):
            raise ValueError(
                f"element must have shape ({self._dim},), got {element.shape}"
            )
        if not np.all(np.isfinite(element)):
            raise ValueError("element contains non-finite values")
        self._buf.insert(0, element.copy())
        if len(self._buf) > self._tau:
            self._buf.pop()
        if len(self._buf) < self._tau:
            return None
        return np.concatenate(self._buf)


def _default_layer1() -> GwrParams:
    return GwrParams(max_edge_age=100)


def _default_layer2() -> GwrParams:
    return GwrParams(max_edge_age=200)


def _default_layer3() -> GwrParams:
    return GwrParams(max_edge_age=300)


@dataclass(frozen=True)
class HierarchyConfig:
    """Shape and training constants of the full hierarchy.

    tau2 = regressor_order + output_steps: the top-level window provides
    both the regressor and its prediction target(s). output_steps 1 selects
    recursive multi-step prediction; larger values make the predictive
    network emit several future elements from one lookup (vector mode), in
    which case prediction_horizon may not exceed output_steps.
    """

    frame_dim: int = FRAME_DIM
    tau1: int = 3
    tau2: int = 4
    output_steps: int = 1
    prediction_horizon: int = 6
    layer1: GwrParams = field(default_factory=_default_layer1)
    layer2: GwrParams = field(default_factory=_default_layer2)
    layer3: GwrParams = field(default_factory=_default_layer3)

    def __post_init__(self) -> None:
        if self.frame_dim < 1:
            raise ValueError("frame_dim must be >= 1")
        if self.tau1 < 1:
            raise ValueError("tau1 must be >= 1")
        if self.tau2 < 2:
            raise ValueError("tau2 must be >= 2")
        if self.output_steps < 1:
            raise ValueError("output_steps must be >= 1")
        if self.tau2 - self.output_steps < 1:
            raise ValueError("tau2 must exceed output_steps (regressor order >= 1)")
        if self.prediction_horizon < 1:
            raise ValueError("prediction_horizon must be >= 1")
        if self.output_steps > 1 and self.prediction_horizon > self.output_steps:
            raise ValueError(
                "in vector mode prediction_horizon cannot exceed output_steps"
            )
        for name in ("layer1", "layer2", "layer3"):
            if not isinstance(getattr(self, name), GwrParams):
                raise TypeError(f"{name} must be a GwrParams instance")

    @property
    def regressor_order(self) -> int:
        return self.tau2 - self.output_steps

    @property
    def code_dim(self) -> int:
        """Dimension of a second-level prototype (one temporal element)."""
        return self.tau1 * self.frame_dim

    @property
    def min_sequence_frames(self) -> int:
        """Frames needed before the top level receives its first sample."""
        return self.tau1 + self.tau2


class _GrowingLayer:
    """A lazily initialized growing network inside the hierarchy.

    The first two samples seed the network; afterwards every sample is a
    training step. feed returns the winner prototypes to hand downstream:
    both seeds are emitted when the network initializes, except that a seed
    from an earlier segment is withheld so no window mixes segments.
    """

    def __init__(self, dim: int, params: GwrParams):
        self.dim = dim
        self.params = params
        self.net: GwrNetwork | None = None
        self._pending: tuple[np.ndarray, int] | None = None

    def feed(self, x: np.ndarray, segment: int) -> tuple[list[np.ndarray], StepReport | None]:
        if self.net is None:
            if self._pending is None:
                self._pending = (np.array(x, dtype=np.float64), segment)
                return [], None
            first, first_segment = self._pending
            self.net = GwrNetwork(first, x, self.params)
            self._pending = None
            outs = [first.copy()] if first_segment == segment else []
            outs.append(np.array(x, dtype=np.float64))
            return outs, None
        report = self.net.train_step(x)
        return [report.bmu_weight], report


@dataclass(frozen=True)
class EpochStats:
    """Per-layer aggregates over one epoch of hierarchy training.

    Layer order in every tuple: first network, second network, predictive
    network. Quantization errors are means of the pre-update winner
    distances; layers that received no samples report nan.
    """

    epoch_index: int
    steps: tuple[int, int, int]
    mean_quantization_error: tuple[float, float, float]
    inserted: tuple[int, int, int]
    removed_neurons: tuple[int, int, int]
    removed_edges: tuple[int, int, int]
    neuron_counts: tuple[int, int, int]
    mean_output_sq_error: float
    output_sq_errors: tuple[float, ...]


@dataclass(frozen=True)
class TrainingReport:
    """Epoch-by-epoch record of one train_on_sequence call."""

    sequence_label: str
    epochs: tuple[EpochStats, ...]

    @property
    def final_neuron_counts(self) -> tuple[int, int, int]:
        return self.epochs[-1].neuron_counts


@dataclass(frozen=True)
class EncodedSegment:
    """Second-level codes of one contiguous frame segment.

    codes[k] is the second-level winner prototype for frame
    first_frame + k; its leading frame_dim components are that frame as
    represented by the two quantization levels.
    """

    first_frame: int
    codes: np.ndarray

    def regressor_matrix(self, order: int) -> tuple[np.ndarray, np.ndarray]:
        """All regressors of `order` consecutive codes, newest first.

        Returns (X, ks): X[i] is the regressor whose newest code is
        codes[ks[i]], so it stands at frame first_frame + ks[i].
        """
        m = self.codes.shape[0]
        if m < order:
            return (np.empty((0, order * self.codes.shape[1])),
                    np.empty(0, dtype=np.int64))
        cols = [self.codes[order - 1 - j: m - j] for j in range(order)]
        return np.hstack(cols), np.arange(order - 1, m, dtype=np.int64)


@dataclass(frozen=True)
class EncodedSequence:
    """Per-segment second-level encoding of a whole sequence."""

    frame_count: int
    segments: tuple[EncodedSegment, ...]

    @property
    def code_count(self) -> int:
        return sum(seg.codes.shape[0] for seg in self.segments)


@dataclass(frozen=True)
class _SequenceView:
    """Uniform access to frames/gaps whether given a MotionSequence or array."""

    frames: np.ndarray
    gap_before: np.ndarray
    pattern_label: str

    def __len__(self) -> int:
        return self.frames.shape[0]

    def segment_bounds(self) -> list[tuple[int, int]]:
        bounds: list[tuple[int, int]] = []
        start = 0
        for i in range(1, len(self)):
            if self.gap_before[i]:
                bounds.append((start, i))
                start = i
        bounds.append((start, len(self)))
        return bounds


def _frames_and_sequence(seq, frame_dim: int) -> _SequenceView:
    if isinstance(seq, MotionSequence):
        return _SequenceView(seq.frames, seq.gap_before, seq.pattern_label)
    frames = _as_matrix(seq, frame_dim, "frames")
    return _SequenceView(frames, np.zeros(frames.shape[0], dtype=bool), "")


class Hierarchy:
    """Three growing networks chained through sliding-window encoders."""

    def __init__(self, config: HierarchyConfig | None = None):
        self.config = config or HierarchyConfig()
        cfg = self.config
        self._layer1 = _GrowingLayer(cfg.frame_dim, cfg.layer1)
        self._layer2 = _GrowingLayer(cfg.code_dim, cfg.layer2)
        self._enc1 = WindowEncoder(cfg.tau1, cfg.frame_dim)
        self._enc2 = WindowEncoder(cfg.tau2, cfg.code_dim)
        self._pgwr: PredictiveGwrNetwork | None = None
        self._pgwr_pending: RegressorSample | None = None
        self._segment_serial = 0

    # -- layer access ---------------------------------------------------------

    @property
    def gwr1(self) -> GwrNetwork | None:
        return self._layer1.net

    @property
    def gwr2(self) -> GwrNetwork | None:
        return self._layer2.net

    @property
    def pgwr(self) -> PredictiveGwrNetwork | None:
        return self._pgwr

    @property
    def trained(self) -> bool:
        return (self._layer1.net is not None and self._layer2.net is not None
                and self._pgwr is not None)

    def neuron_counts(self) -> tuple[int, int, int]:
        return (
            self._layer1.net.neuron_count if self._layer1.net else 0,
            self._layer2.net.neuron_count if self._layer2.net else 0,
            self._pgwr.neuron_count if self._pgwr else 0,
        )

    # -- training ---------------------------------------------------------------

    def reset_encoders(self) -> None:
        """Clear both window buffers; windows never span this call."""
        self._enc1.reset()
        self._enc2.reset()
        self._segment_serial += 1

    def _feed_pgwr(self, sample: RegressorSample) -> StepReport | None:
        if self._pgwr is None:
            if self._pgwr_pending is None:
                self._pgwr_pending = sample
                return None
            self._pgwr = PredictiveGwrNetwork(
                self._pgwr_pending, sample,
                regressor_order=self.config.regressor_order,
                output_steps=self.config.output_steps,
                params=self.config.layer3,
            )
            self._pgwr_pending = None
            return None
        return self._pgwr.train_step(sample)

    def train_on_sequence(self, seq, epochs: int = 1) -> TrainingReport:
        """Train all three levels on one sequence for `epochs` passes.

        Every pass streams the frames in order, training each level as the
        stream reaches it. Encoders are reset at the start of each pass and
        at every gap flag, so windows stay within contiguous segments.
        """
        cfg = self.config
        seq = _frames_and_sequence(seq, cfg.frame_dim)
        if seq.frames.shape[1] != cfg.frame_dim:
            raise ValueError(
                f"sequence frames have dimension {seq.frames.shape[1]},"
                f" expected {cfg.frame_dim}"
            )
        if len(seq) < cfg.min_sequence_frames:
            raise ValueError(
                f"sequence has {len(seq)} frames; at least"
                f" {cfg.min_sequence_frames} are needed to reach the top level"
            )
        if epochs < 1:
            raise ValueError("epochs must be >= 1")

        stats: list[EpochStats] = []
        order = cfg.regressor_order
        steps_out = cfg.output_steps
        for epoch in range(epochs):
            self.reset_encoders()
            dist_sums = [0.0, 0.0, 0.0]
            counts = [0, 0, 0]
            inserted = [0, 0, 0]
            removed_n = [0, 0, 0]
            removed_e = [0, 0, 0]
            out_errors: list[float] = []
            for i in range(len(seq)):
                if i > 0 and seq.gap_before[i]:
                    self.reset_encoders()
                serial = self._segment_serial
                w1s, rep1 = self._layer1.feed(seq.frames[i], serial)
                self._tally(rep1, 0, dist_sums, counts, inserted, removed_n, removed_e)
                for w1 in w1s:
                    o1 = self._enc1.push(w1)
                    if o1 is None:
                        continue
                    w2s, rep2 = self._layer2.feed(o1, serial)
                    self._tally(rep2, 1, dist_sums, counts, inserted, removed_n, removed_e)
                    for w2 in w2s:
                        o2 = self._enc2.push(w2)
                        if o2 is None:
                            continue
                        sample = split_window(o2, order, steps_out)
                        rep3 = self._feed_pgwr(sample)
                        self._tally(rep3, 2, dist_sums, counts, inserted,
                                    removed_n, removed_e)
                        if rep3 is not None and rep3.output_sq_error is not None:
                            out_errors.append(rep3.output_sq_error)
            qe = tuple(
                dist_sums[k] / counts[k] if counts[k] else float("nan")
                for k in range(3)
            )
            stats.append(EpochStats(
                epoch_index=epoch,
                steps=tuple(counts),
                mean_quantization_error=qe,  # type: ignore[arg-type]
                inserted=tuple(inserted),
                removed_neurons=tuple(removed_n),
                removed_edges=tuple(removed_e),
                neuron_counts=self.neuron_counts(),
                mean_output_sq_error=(
                    float(np.mean(out_errors)) if out_errors else float("nan")
                ),
                output_sq_errors=tuple(out_errors),
            ))
        return TrainingReport(sequence_label=seq.pattern_label, epochs=tuple(stats))

    @staticmethod
    def _tally(report: StepReport | None, layer: int, dist_sums, counts,
               inserted, removed_n, removed_e) -> None:
        if report is None:
            return
        dist_sums[layer] += report.distance
        counts[layer] += 1
        inserted[layer] += int(report.inserted)
        removed_n[layer] += report.removed_neuron_count
        removed_e[layer] += report.removed_edge_count

    # -- read-only passes ---------------------------------------------------------

    def encode_sequence(self, seq) -> EncodedSequence:
        """Second-level codes for every frame reachable after warm-up.

        Read-only: both quantization levels must already exist. Within each
        contiguous segment, frames from index tau1 - 1 (relative to the
        segment start) onward receive one code each.
        """
        cfg = self.config
        seq = _frames_and_sequence(seq, cfg.frame_dim)
        if self._layer1.net is None or self._layer2.net is None:
            raise ValueError("hierarchy quantization levels are not initialized yet")
        if seq.frames.shape[1] != cfg.frame_dim:
            raise ValueError(
                f"sequence frames have dimension {seq.frames.shape[1]},"
                f" expected {cfg.frame_dim}"
            )
        tau1 = cfg.tau1
        segments: list[EncodedSegment] = []
        for start, end in seq.segment_bounds():
            m = end - start
            if m < tau1:
                continue
            w1 = self._layer1.net.quantize_batch(seq.frames[start:end])
            windows = np.hstack([w1[tau1 - 1 - j: m - j] for j in range(tau1)])
            codes = self._layer2.net.quantize_batch(windows)
            segments.append(EncodedSegment(first_frame=start + tau1 - 1, codes=codes))
        return EncodedSequence(frame_count=len(seq), segments=tuple(segments))

    def predict_codes(self, regressors, horizon: int) -> np.ndarray:
        """Predicted second-level codes, shape (m, horizon, code_dim)."""
        if self._pgwr is None:
            raise ValueError("predictive level is not initialized yet")
        return self._pgwr.predict_batch(regressors, horizon)

    def frame_view(self, coded) -> np.ndarray:
        """Leading frame_dim components: a code's newest frame content."""
        return np.asarray(coded)[..., : self.config.frame_dim]


# -- archive format ----------------------------------------------------------------

_MAGIC = "gwr-hierarchy"
_VERSION = 1


def write_hierarchy(hier: Hierarchy, fh: IO[str]) -> None:
    """One-file archive: config header plus each level's snapshot.

    Window buffers and any single buffered seed sample are transient and
    are not persisted; a reloaded hierarchy starts with empty windows.
    """
    cfg = hier.config
    fh.write(f"{_MAGIC} {_VERSION}\n")
    fh.write(f"frame_dim {cfg.frame_dim}\n")
    fh.write(f"tau1 {cfg.tau1}\n")
    fh.write(f"tau2 {cfg.tau2}\n")
    fh.write(f"output_steps {cfg.output_steps}\n")
    fh.write(f"prediction_horizon {cfg.prediction_horizon}\n")
    _write_params(fh, cfg.layer1, tag="param1")
    _write_params(fh, cfg.layer2, tag="param2")
    _write_params(fh, cfg.layer3, tag="param3")
    for name, net, writer in (
        ("gwr1", hier.gwr1, write_network),
        ("gwr2", hier.gwr2, write_network),
        ("pgwr", hier.pgwr, write_predictive_network),
    ):
        if net is None:
            fh.write(f"layer {name} none\n")
        else:
            fh.write(f"layer {name} present\n")
            writer(net, fh)
    fh.write("end\n")


def read_hierarchy(fh: IO[str]) -> Hierarchy:
    reader = LineReader(fh)
    version = expect_header(reader, _MAGIC)
    if version != _VERSION:
        raise ValueError(f"unsupported {_MAGIC} version {version}")
    frame_dim = parse_int(read_field(reader, "frame_dim"), "frame_dim")
    tau1 = parse_int(read_field(reader, "tau1"), "tau1")
    tau2 = parse_int(read_field(reader, "tau2"), "tau2")
    output_steps = parse_int(read_field(reader, "output_steps"), "output_steps")
    horizon = parse_int(read_field(reader, "prediction_horizon"), "prediction_horizon")
    p1 = _read_params(reader, tag="param1")
    p2 = _read_params(reader, tag="param2")
    p3 = _read_params(reader, tag="param3")
    config = HierarchyConfig(frame_dim=frame_dim, tau1=tau1, tau2=tau2,
                             output_steps=output_steps, prediction_horizon=horizon,
                             layer1=p1, layer2=p2, layer3=p3)
    hier = Hierarchy(config)
    for name in ("gwr1", "gwr2", "pgwr"):
        num, line = reader.next(f"layer {name}")
        parts = line.split()
        if len(parts) != 3 or parts[0] != "layer" or parts[1] != name:
            raise ValueError(f"line {num}: expected 'layer {name} ...', got {line!r}")
        state = parts[2]
        if state == "none":
            continue
        if state != "present":
            raise ValueError(f"line {num}: layer state must be present or none")
        if name == "pgwr":
            net = read_predictive_network(_ReaderTail(reader))
            if (net.element_dim != config.code_dim
                    or net.regressor_order != config.regressor_order
                    or net.output_steps != config.output_steps):
                raise ValueError("predictive level shape disagrees with the config")
            hier._pgwr = net
        else:
            net = read_network(_ReaderTail(reader))
            expected = frame_dim if name == "gwr1" else config.code_dim
            if net.input_dim != expected:
                raise ValueError(
                    f"layer {name} input_dim {net.input_dim} disagrees with"
                    f" the config ({expected})"
                )
            layer = hier._layer1 if name == "gwr1" else hier._layer2
            layer.net = net
    num, line = reader.next("end marker")
    if line != "end":
        raise ValueError(f"line {num}: expected 'end', got {line!r}")
    return hier


class _ReaderTail:
    """Adapts the remaining lines of a LineReader into a text iterable."""

    def __init__(self, reader: LineReader):
        self._reader = reader
        self._done = False

    def __iter__(self):
        return self

    def __next__(self) -> str:
        if self._done:
            raise StopIteration
        item = self._reader.next_or_none()
        if item is None:
            raise StopIteration
        num, line = item
        if line == "end":
            self._done = True
        return line + "\n"


def save_hierarchy(hier: Hierarchy, path) -> None:
    with open(Path(path), "w", encoding="ascii") as fh:
        write_hierarchy(hier, fh)


def load_hierarchy(path) -> Hierarchy:
    with open(Path(path), "r", encoding="ascii") as fh:
        return read_hierarchy(fh)
