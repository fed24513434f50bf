"""Joint-angle motion sequences: containers, generators, and file formats.

A frame is a vector of 8 joint angles in radians, ordered
left arm then right arm, each arm as
(shoulder_pitch, shoulder_yaw, elbow_yaw, elbow_roll).

Angle conventions (used by angles_from_skeleton and the synthetic
generator; one convention of several possible, documented here so data are
reproducible):

* The torso frame has Z up (torso toward neck), X lateral (left shoulder
  toward right shoulder, orthogonalized against Z), Y forward = Z x X.
* shoulder_pitch is the upper arm's angle in the sagittal plane, 0 with
  the arm hanging straight down and +pi/2 pointing forward.
* shoulder_yaw is the upper arm's azimuth about the vertical, measured
  from forward, positive outward (away from the body on either side).
* elbow_yaw is the forearm's azimuth about the upper-arm axis, 0 when the
  forearm extends the upper arm.
* elbow_roll is the bend of the elbow: pi minus the interior angle at the
  elbow, so a straight arm gives 0 and a fully folded arm approaches pi.

All angles live in [-pi, pi].
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._serial import float_to_hex, hex_to_float

__all__ = [
    "FRAME_DIM",
    "JOINT_NAMES",
    "JOINT_LIMITS",
    "MotionSequence",
    "SkeletonFrame",
    "SubjectStyle",
    "PATTERNS",
    "SIDES",
    "DEFAULT_PATTERNS",
    "median_downsample",
    "angles_from_skeleton",
    "subject_style",
    "generate_synthetic",
    "corrupt_dropout",
    "save_sequence",
    "load_sequence",
]

FRAME_DIM = 8
JOINT_NAMES = (
    "l_shoulder_pitch",
    "l_shoulder_yaw",
    "l_elbow_yaw",
    "l_elbow_roll",
    "r_shoulder_pitch",
    "r_shoulder_yaw",
    "r_elbow_yaw",
    "r_elbow_roll",
)
# Symmetric stand-in limits for every joint, in radians.
JOINT_LIMITS = (-math.pi, math.pi)

_LIMIT_SLACK = 1e-9


@dataclass
class MotionSequence:
    """An ordered run of joint-angle frames at a fixed frame rate.

    gap_before[i] marks a discontinuity between frames i-1 and i (for
    example frames removed by corrupt_dropout); consumers that build
    temporal windows must not span such a boundary. Frame 0 always starts
    a segment whatever its flag says.
    """

    frames: np.ndarray
    fps: float = 10.0
    pattern_label: str = ""
    subject_id: str = ""
    gap_before: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != FRAME_DIM:
            raise ValueError(f"frames must have shape (n, {FRAME_DIM}), got {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("a motion sequence needs at least one frame")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite values")
        lo, hi = JOINT_LIMITS
        if frames.min() < lo - _LIMIT_SLACK or frames.max() > hi + _LIMIT_SLACK:
            raise ValueError("frames contain angles outside the joint limits")
        self.frames = frames
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        if self.gap_before is None:
            gaps = np.zeros(frames.shape[0], dtype=bool)
        else:
            gaps = np.asarray(self.gap_before, dtype=bool)
            if gaps.shape != (frames.shape[0],):
                raise ValueError("gap_before must have one flag per frame")
            gaps = gaps.copy()
        self.gap_before = gaps

    def __len__(self) -> int:
        return self.frames.shape[0]

    def segment_bounds(self) -> list[tuple[int, int]]:
        """Half-open [start, end) index ranges of contiguous segments."""
        n = len(self)
        starts = [0] + [i for i in range(1, n) if self.gap_before[i]]
        bounds = []
        for j, start in enumerate(starts):
            end = starts[j + 1] if j + 1 < len(starts) else n
            bounds.append((start, end))
        return bounds


def median_downsample(seq: MotionSequence) -> MotionSequence:
    """Reduce the frame rate by 3 using a component-wise median of triples.

    Output frame k is the per-angle median of input frames 3k, 3k+1, 3k+2;
    leftover frames at the end are dropped. A triple containing a gap flag
    yields a gap-flagged output frame.
    """
    n = len(seq)
    if n < 3:
        raise ValueError("need at least 3 frames to downsample")
    m = n // 3
    trimmed = seq.frames[: 3 * m].reshape(m, 3, FRAME_DIM)
    frames = np.median(trimmed, axis=1)
    gaps = seq.gap_before[: 3 * m].reshape(m, 3).any(axis=1)
    return MotionSequence(
        frames=frames,
        fps=seq.fps / 3.0,
        pattern_label=seq.pattern_label,
        subject_id=seq.subject_id,
        gap_before=gaps,
    )


# -- skeleton-to-angle conversion --------------------------------------------


@dataclass(frozen=True)
class SkeletonFrame:
    """3-D positions (meters, any fixed world frame) of the tracked joints."""

    torso: np.ndarray
    neck: np.ndarray
    l_shoulder: np.ndarray
    l_elbow: np.ndarray
    l_hand: np.ndarray
    r_shoulder: np.ndarray
    r_elbow: np.ndarray
    r_hand: np.ndarray

    def __post_init__(self):
        for name in ("torso", "neck", "l_shoulder", "l_elbow", "l_hand",
                     "r_shoulder", "r_elbow", "r_hand"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)


_EPS = 1e-9


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm < _EPS:
        raise ValueError(f"degenerate skeleton: {what} has zero length")
    return v / norm


def angles_from_skeleton(skel: SkeletonFrame) -> np.ndarray:
    """Convert one skeleton frame to the 8 joint angles (see module docs)."""
    up = _unit(skel.neck - skel.torso, "torso-to-neck axis")
    lat_raw = skel.r_shoulder - skel.l_shoulder
    lat = lat_raw - np.dot(lat_raw, up) * up
    lat = _unit(lat, "shoulder span (or span parallel to the torso axis)")
    forward = np.cross(up, lat)

    out = np.empty(FRAME_DIM)
    arms = (
        (skel.l_shoulder, skel.l_elbow, skel.l_hand, -1.0, 0),
        (skel.r_shoulder, skel.r_elbow, skel.r_hand, +1.0, 4),
    )
    for shoulder, elbow, hand, outward, base in arms:
        a = elbow - shoulder
        b = hand - elbow
        a_hat = _unit(a, "upper arm segment")
        b_norm = float(np.linalg.norm(b))
        if b_norm < _EPS:
            raise ValueError("degenerate skeleton: forearm segment has zero length")
        ax = float(np.dot(a, lat)) * outward  # positive away from the body
        ay = float(np.dot(a, forward))
        az = float(np.dot(a, up))
        pitch = math.atan2(ay, -az)
        yaw = math.atan2(ax, ay) if (abs(ax) > _EPS or abs(ay) > _EPS) else 0.0

        n1 = np.cross(a_hat, up)
        if np.linalg.norm(n1) < _EPS:
            n1 = np.cross(a_hat, forward)
        n1 = _unit(n1, "upper-arm reference direction")
        n2 = np.cross(a_hat, n1)
        c1 = float(np.dot(b, n1))
        c2 = float(np.dot(b, n2))
        elbow_yaw = math.atan2(c2, c1) if (abs(c1) > _EPS or abs(c2) > _EPS) else 0.0

        cross_ab = float(np.linalg.norm(np.cross(a, b)))
        elbow_roll = math.atan2(cross_ab, float(np.dot(a, b)))

        out[base: base + 4] = (pitch, yaw, elbow_yaw, elbow_roll)
    return out


# -- synthetic patterns -------------------------------------------------------

PATTERNS = ("raise-lateral", "raise-front", "wave", "circle-cw", "circle-ccw")
SIDES = ("left", "right", "both")

# The ten canonical pattern/side combinations used as the default suite.
DEFAULT_PATTERNS = (
    ("raise-lateral", "left"),
    ("raise-lateral", "right"),
    ("raise-lateral", "both"),
    ("raise-front", "left"),
    ("raise-front", "right"),
    ("raise-front", "both"),
    ("wave", "left"),
    ("wave", "right"),
    ("circle-cw", "both"),
    ("circle-ccw", "both"),
)

_REST_ARM = np.array([0.0, 0.0, 0.0, 0.1])
_BASE_FREQ = {
    "raise-lateral": 0.25,
    "raise-front": 0.25,
    "wave": 0.5,
    "circle-cw": 0.25,
    "circle-ccw": 0.25,
}


@dataclass(frozen=True)
class SubjectStyle:
    """Per-subject deviations applied to every sequence of that subject."""

    amp_scale: float = 1.0
    freq_scale: float = 1.0
    phase_offset: float = 0.0


def subject_style(jitter: float, seed: int) -> SubjectStyle:
    """Draw a subject's style; jitter 0 gives the neutral style."""
    if jitter < 0:
        raise ValueError("jitter must be >= 0")
    rng = np.random.default_rng(seed)
    return SubjectStyle(
        amp_scale=1.0 + jitter * float(rng.uniform(-0.3, 0.3)),
        freq_scale=1.0 + jitter * float(rng.uniform(-0.2, 0.2)),
        phase_offset=jitter * float(rng.uniform(-math.pi, math.pi)),
    )


def _arm_trajectory(pattern: str, t: np.ndarray, amp: float,
                    phase: float) -> np.ndarray:
    """(n, 4) trajectory (pitch, yaw, elbow_yaw, elbow_roll) for one arm."""
    ph = 2.0 * math.pi * _BASE_FREQ[pattern] * t + phase
    zeros = np.zeros_like(t)
    if pattern == "raise-lateral":
        lift = 0.5 * (1.0 - np.cos(ph))
        return np.stack([zeros, 1.3 * amp * lift, zeros,
                         0.1 + 0.15 * lift], axis=1)
    if pattern == "raise-front":
        lift = 0.5 * (1.0 - np.cos(ph))
        return np.stack([1.3 * amp * lift, zeros, zeros,
                         0.1 + 0.1 * lift], axis=1)
    if pattern == "wave":
        pitch = 1.5 * amp + 0.03 * np.sin(0.5 * ph)
        return np.stack([pitch,
                         0.3 * amp * np.sin(ph),
                         0.15 * amp * np.sin(ph + 0.25 * math.pi),
                         0.8 + 0.5 * amp * np.sin(ph)], axis=1)
    if pattern in ("circle-cw", "circle-ccw"):
        spin = np.sin(ph) if pattern == "circle-cw" else -np.sin(ph)
        return np.stack([0.9 + 0.45 * amp * np.cos(ph),
                         0.45 * amp * spin,
                         zeros,
                         np.full_like(t, 0.2)], axis=1)
    raise ValueError(f"unknown pattern {pattern!r}")


def generate_synthetic(pattern: str, side: str, *, duration_s: float = 10.0,
                       fps: float = 10.0, style: SubjectStyle | None = None,
                       noise_std: float = 0.0, seed: int = 0,
                       subject_id: str = "", pattern_label: str | None = None,
                       ) -> MotionSequence:
    """Generate one smooth periodic demonstration of a motion pattern.

    `style` carries per-subject variation; `seed` drives the repetition's
    starting phase and measurement noise. The same arguments always produce
    an identical sequence.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; options: {PATTERNS}")
    if side not in SIDES:
        raise ValueError(f"unknown side {side!r}; options: {SIDES}")
    if duration_s <= 0 or fps <= 0:
        raise ValueError("duration_s and fps must be > 0")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    style = style or SubjectStyle()
    rng = np.random.default_rng(seed)
    phase = style.phase_offset + float(rng.uniform(0.0, 2.0 * math.pi))
    n = max(1, round(duration_s * fps))
    t = np.arange(n) / fps * style.freq_scale

    active = _arm_trajectory(pattern, t, style.amp_scale, phase)
    rest = np.tile(_REST_ARM, (n, 1))
    left = active if side in ("left", "both") else rest
    right = active if side in ("right", "both") else rest
    frames = np.hstack([left, right])
    if noise_std > 0:
        frames = frames + rng.normal(0.0, noise_std, frames.shape)
        frames = np.clip(frames, JOINT_LIMITS[0], JOINT_LIMITS[1])
    label = pattern_label if pattern_label is not None else f"{pattern}/{side}"
    return MotionSequence(frames=frames, fps=fps, pattern_label=label,
                          subject_id=subject_id)


def corrupt_dropout(seq: MotionSequence, fraction: float, chunk_frames: int = 10,
                    seed: int = 0) -> tuple[MotionSequence, float]:
    """Remove whole chunks of frames to simulate sensor dropout.

    Removes ceil(fraction * n / chunk_frames) non-overlapping chunks of
    exactly `chunk_frames` consecutive frames, placed uniformly at random
    on chunk-aligned slots. The frame after each removed chunk is marked
    with a gap flag. Returns the corrupted sequence and the fraction of
    frames actually removed (at least `fraction`, up to one chunk's
    granularity above it).
    """
    n = len(seq)
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must lie in [0, 1)")
    if chunk_frames < 1:
        raise ValueError("chunk_frames must be >= 1")
    if chunk_frames > n:
        raise ValueError("chunk_frames exceeds the sequence length")
    slots = n // chunk_frames
    # The tiny slack keeps exact multiples (e.g. 0.95 * 200 frames) from
    # rounding up through float error.
    k = math.ceil(fraction * n / chunk_frames - 1e-9)
    if k > slots:
        raise ValueError(
            f"cannot remove {k} chunks of {chunk_frames} frames from {n} frames"
        )
    if k * chunk_frames >= n:
        raise ValueError("dropout fraction would remove every frame")
    if k == 0:
        return replace(seq, frames=seq.frames.copy(),
                       gap_before=seq.gap_before.copy()), 0.0
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(slots, size=k, replace=False))
    keep = np.ones(n, dtype=bool)
    gaps = seq.gap_before.copy()
    for slot in chosen:
        start = int(slot) * chunk_frames
        end = start + chunk_frames
        keep[start:end] = False
        if end < n:
            gaps[end] = True
    frames = seq.frames[keep]
    gaps = gaps[keep]
    out = MotionSequence(frames=frames, fps=seq.fps,
                         pattern_label=seq.pattern_label,
                         subject_id=seq.subject_id, gap_before=gaps)
    return out, k * chunk_frames / n


# -- sequence file format ------------------------------------------------------

_META_SUFFIX = ".meta.json"
_CSV_HEADER = ["t_index", *JOINT_NAMES, "gap"]


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + _META_SUFFIX)


def save_sequence(seq: MotionSequence, path) -> None:
    """Write a sequence as CSV (hex floats, bit-exact) plus a JSON sidecar."""
    path = Path(path)
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for i in range(len(seq)):
            row = [str(i)]
            row.extend(float_to_hex(v) for v in seq.frames[i])
            row.append("1" if seq.gap_before[i] else "0")
            writer.writerow(row)
    meta = {
        "format": "motion-sequence-meta",
        "version": 1,
        "fps": seq.fps,
        "pattern_label": seq.pattern_label,
        "subject_id": seq.subject_id,
    }
    with open(_meta_path(path), "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_sequence(path) -> MotionSequence:
    """Read a sequence written by save_sequence; exact round trip.

    A missing sidecar yields default metadata (10 fps, empty labels).
    """
    path = Path(path)
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header != _CSV_HEADER:
            missing = [c for c in _CSV_HEADER if c not in header]
            if missing:
                raise ValueError(f"{path}: missing column {missing[0]!r}")
            raise ValueError(f"{path}: unexpected column layout {header!r}")
        frames = []
        gaps = []
        for row_num, row in enumerate(reader):
            if len(row) != len(_CSV_HEADER):
                raise ValueError(f"{path}: row {row_num} has {len(row)} fields,"
                                 f" expected {len(_CSV_HEADER)}")
            t_index = int(row[0])
            if t_index != row_num:
                raise ValueError(f"{path}: t_index {t_index} out of order at row {row_num}")
            try:
                frames.append([hex_to_float(tok) for tok in row[1:-1]])
            except ValueError as err:
                raise ValueError(f"{path}: row {row_num}: {err}") from None
            if row[-1] not in ("0", "1"):
                raise ValueError(f"{path}: row {row_num}: gap flag must be 0 or 1")
            gaps.append(row[-1] == "1")
    if not frames:
        raise ValueError(f"{path}: no frames")

    fps = 10.0
    pattern_label = ""
    subject_id = ""
    meta_path = _meta_path(path)
    if meta_path.exists():
        with open(meta_path, "r", encoding="ascii") as fh:
            meta = json.load(fh)
        if meta.get("format") != "motion-sequence-meta":
            raise ValueError(f"{meta_path}: not a motion-sequence sidecar")
        fps = float(meta["fps"])
        pattern_label = str(meta.get("pattern_label", ""))
        subject_id = str(meta.get("subject_id", ""))
    return MotionSequence(frames=np.array(frames), fps=fps,
                          pattern_label=pattern_label, subject_id=subject_id,
                          gap_before=np.array(gaps, dtype=bool))
