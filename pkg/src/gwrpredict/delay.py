"""Delay-compensated command selection against a buffer of predictions.

A command computed from the pose at time t reaches the actuators some
frames later. Instead of sending the current pose estimate, the sender
keeps a buffer [P(t+0), P(t+1), ..., P(t+h)] of the current estimate plus
multi-step predictions and picks the entry matching when the command will
actually land. With a known constant delay that is simply the entry at the
delay depth; with fluctuating delay the entry is chosen by comparing the
buffer against the most recent joint feedback, which reflects the delay
the loop is currently experiencing.

run_pipeline simulates the loop on a recorded sequence under the
assumption that the plant tracks commands perfectly, so the feedback at
time t equals the buffer entry at the actual (drawn) delay depth. Errors
are measured between the sent command and the ground-truth frame at the
arrival time t + d_t.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gwr import _as_matrix, _as_vector
from .temporal import Hierarchy

__all__ = [
    "DelayModel",
    "PredictionBuffer",
    "select_command",
    "LagReport",
    "run_pipeline",
    "write_lag_report",
]

_MODES = ("fixed", "variable", "baseline")


@dataclass(frozen=True)
class DelayModel:
    """Constant latency plus uniform jitter, both in milliseconds."""

    latency_ms: float = 600.0
    jitter_ms: float = 0.0
    frame_period_ms: float = 100.0

    def __post_init__(self) -> None:
        if not (self.latency_ms >= 0.0 and math.isfinite(self.latency_ms)):
            raise ValueError("latency_ms must be finite and >= 0")
        if not (self.jitter_ms >= 0.0 and math.isfinite(self.jitter_ms)):
            raise ValueError("jitter_ms must be finite and >= 0")
        if not (self.frame_period_ms > 0.0 and math.isfinite(self.frame_period_ms)):
            raise ValueError("frame_period_ms must be finite and > 0")

    @property
    def fixed_frames(self) -> int:
        """Delay depth of the constant part alone, in whole frames."""
        return math.ceil(self.latency_ms / self.frame_period_ms)

    @property
    def horizon_frames(self) -> int:
        """Worst-case delay depth in whole frames; sizes the buffer."""
        return math.ceil((self.latency_ms + self.jitter_ms) / self.frame_period_ms)

    def draw_delay_frames(self, rng: np.random.Generator) -> int:
        """One actual delay in frames: latency plus a jitter sample."""
        if self.jitter_ms == 0.0:
            return self.fixed_frames
        spent = self.latency_ms + rng.uniform(0.0, self.jitter_ms)
        return math.ceil(spent / self.frame_period_ms)


class PredictionBuffer:
    """Pose now plus predictions for the next h frames, index = lookahead."""

    def __init__(self, frames):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("buffer must be a non-empty 2-d array")
        if not np.all(np.isfinite(frames)):
            raise ValueError("buffer contains non-finite values")
        self._frames = frames.copy()
        self._frames.setflags(write=False)

    @property
    def horizon(self) -> int:
        return self._frames.shape[0] - 1

    @property
    def frame_dim(self) -> int:
        return self._frames.shape[1]

    def as_array(self) -> np.ndarray:
        return self._frames

    def __len__(self) -> int:
        return self._frames.shape[0]

    def __getitem__(self, i: int) -> np.ndarray:
        return self._frames[i]


def select_command(feedback, buffer) -> tuple[np.ndarray, int]:
    """Buffer entry nearest the feedback pose, with its lookahead index.

    Ties go to the smallest lookahead. The feedback acts as an implicit
    delay estimate: whichever prediction the plant is currently executing
    is the depth the loop should command at.
    """
    frames = buffer.as_array() if isinstance(buffer, PredictionBuffer) else \
        _as_matrix(buffer, np.asarray(buffer).shape[-1], "buffer")
    feedback = _as_vector(feedback, frames.shape[1], "feedback")
    deltas = frames - feedback
    index = int(np.argmin(np.einsum("ij,ij->i", deltas, deltas)))
    return frames[index].copy(), index


@dataclass(frozen=True)
class LagReport:
    """Per-frame commands and errors from one simulated run."""

    mode: str
    delay: DelayModel
    frame_index: np.ndarray
    chosen_index: np.ndarray
    actual_delay: np.ndarray
    command: np.ndarray
    truth: np.ndarray

    @property
    def row_count(self) -> int:
        return self.frame_index.shape[0]

    @property
    def abs_error(self) -> np.ndarray:
        """Mean absolute command error per frame, over all components."""
        return np.mean(np.abs(self.command - self.truth), axis=1)

    @property
    def mse(self) -> float:
        return float(np.mean((self.command - self.truth) ** 2))

    @property
    def mae(self) -> float:
        return float(np.mean(np.abs(self.command - self.truth)))


def run_pipeline(hier: Hierarchy, seq, delay: DelayModel, mode: str = "variable",
                 seed: int = 0) -> LagReport:
    """Simulate delayed command sending over one sequence.

    mode selects what gets sent each frame:
      baseline  the current pose estimate P(t+0), ignoring the delay;
      fixed     the prediction at the constant delay depth;
      variable  the buffer entry chosen against simulated feedback.

    The actual per-frame delay d_t is drawn from the model (deterministic
    when jitter is zero); feedback is the buffer entry at depth d_t, and
    every mode's command is scored against the true frame at t + d_t.
    Frames whose arrival time falls outside the contiguous segment are
    skipped.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if not hier.trained:
        raise ValueError("hierarchy must be fully trained before simulation")
    cfg = hier.config
    horizon = delay.horizon_frames
    if cfg.output_steps > 1 and horizon > cfg.output_steps:
        raise ValueError(
            f"delay horizon {horizon} exceeds the {cfg.output_steps} future"
            " steps the predictive level emits per lookup"
        )

    encoded = hier.encode_sequence(seq)
    frames = seq.frames if hasattr(seq, "frames") else np.asarray(seq, dtype=np.float64)
    order = cfg.regressor_order
    rng = np.random.default_rng(seed)

    frame_rows: list[int] = []
    chosen_rows: list[int] = []
    delay_rows: list[int] = []
    command_rows: list[np.ndarray] = []
    truth_rows: list[np.ndarray] = []

    for seg in encoded.segments:
        x, ks = seg.regressor_matrix(order)
        if ks.shape[0] == 0:
            continue
        now = hier.frame_view(seg.codes[ks])
        if horizon >= 1:
            preds = hier.frame_view(hier.predict_codes(x, horizon))
            buffers = np.concatenate([now[:, None, :], preds], axis=1)
        else:
            buffers = now[:, None, :]
        seg_end = seg.first_frame + seg.codes.shape[0]
        for row, k in enumerate(ks):
            t = seg.first_frame + int(k)
            d = delay.draw_delay_frames(rng)
            if t + d >= seg_end:
                continue
            buffer = buffers[row]
            if mode == "baseline":
                index = 0
            elif mode == "fixed":
                index = delay.fixed_frames
            else:
                feedback = buffer[d]
                _, index = select_command(feedback, buffer)
            frame_rows.append(t)
            chosen_rows.append(index)
            delay_rows.append(d)
            command_rows.append(buffer[index])
            truth_rows.append(frames[t + d])

    if not frame_rows:
        raise ValueError(
            "no frame had both a full regressor window and in-segment truth"
            " at its arrival time"
        )
    dim = cfg.frame_dim
    return LagReport(
        mode=mode,
        delay=delay,
        frame_index=np.array(frame_rows, dtype=np.int64),
        chosen_index=np.array(chosen_rows, dtype=np.int64),
        actual_delay=np.array(delay_rows, dtype=np.int64),
        command=np.array(command_rows, dtype=np.float64).reshape(-1, dim),
        truth=np.array(truth_rows, dtype=np.float64).reshape(-1, dim),
    )


def write_lag_report(report: LagReport, path) -> None:
    """Per-frame CSV; floats are written with repr for reproducibility."""
    dim = report.command.shape[1]
    header = ["frame_index", "chosen_index", "actual_delay"]
    header += [f"cmd_{j}" for j in range(dim)]
    header += [f"truth_{j}" for j in range(dim)]
    header += ["abs_error"]
    abs_err = report.abs_error
    with open(Path(path), "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(report.row_count):
            row = [int(report.frame_index[i]), int(report.chosen_index[i]),
                   int(report.actual_delay[i])]
            row += [repr(float(v)) for v in report.command[i]]
            row += [repr(float(v)) for v in report.truth[i]]
            row.append(repr(float(abs_err[i])))
            writer.writerow(row)
