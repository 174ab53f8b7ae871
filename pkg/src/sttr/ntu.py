"""NTU `.skeleton` text parsing and clip preprocessing.

File layout: line 1 holds the frame count; each frame starts with a body
count line; each body contributes a 10-value metadata line, a joint count
line (must be 25), and 25 lines of 12 reals whose first three fields are
the x, y, z coordinates in meters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO

import numpy as np

from .graph import SkeletonGraph

NTU_JOINTS = 25


class SkeletonParseError(ValueError):
    """Malformed `.skeleton` input; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class SkeletonClip:
    """Dense clip (C, T, V, M); frames beyond valid_frames are loop-padded."""

    data: np.ndarray
    label: int | None = None
    valid_frames: int | None = None

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ValueError(f"clip must be (C, T, V, M), got {self.data.shape}")
        if np.isnan(self.data).any():
            raise ValueError("clip contains NaN")
        if self.valid_frames is None:
            self.valid_frames = self.data.shape[1]


class _LineReader:
    def __init__(self, stream: IO[str]):
        self.stream = stream
        self.line_no = 0

    def next_line(self, what: str) -> str:
        line = self.stream.readline()
        self.line_no += 1
        if line == "":
            raise SkeletonParseError(self.line_no, f"unexpected end of file, expected {what}")
        return line.strip()

    def next_int(self, what: str) -> int:
        text = self.next_line(what)
        try:
            return int(text)
        except ValueError:
            raise SkeletonParseError(self.line_no, f"expected integer {what}, got {text!r}") from None

    def next_floats(self, count: int, what: str) -> list[float]:
        text = self.next_line(what)
        tokens = text.split()
        if len(tokens) != count:
            raise SkeletonParseError(
                self.line_no, f"expected {count} values for {what}, got {len(tokens)}")
        try:
            return [float(t) for t in tokens]
        except ValueError:
            raise SkeletonParseError(self.line_no, f"non-numeric token in {what}: {text!r}") from None


def parse_ntu_skeleton(stream: IO[str]) -> list[list[np.ndarray]]:
    """Parse a `.skeleton` stream into per-frame lists of (25, 3) joint arrays."""
    reader = _LineReader(stream)
    frame_count = reader.next_int("frame count")
    if frame_count < 1:
        raise SkeletonParseError(reader.line_no, f"frame count must be >= 1, got {frame_count}")
    frames: list[list[np.ndarray]] = []
    for _ in range(frame_count):
        body_count = reader.next_int("body count")
        bodies = []
        for _ in range(body_count):
            reader.next_floats(10, "body metadata")
            joint_count = reader.next_int("joint count")
            if joint_count != NTU_JOINTS:
                raise SkeletonParseError(
                    reader.line_no, f"joint count must be {NTU_JOINTS}, got {joint_count}")
            joints = np.empty((NTU_JOINTS, 3))
            for j in range(NTU_JOINTS):
                values = reader.next_floats(12, f"joint {j}")
                joints[j] = values[:3]
            bodies.append(joints)
        frames.append(bodies)
    return frames


def preprocess_clip(frames: list[list[np.ndarray]], target_t: int,
                    graph: SkeletonGraph, max_bodies: int = 2,
                    label: int | None = None) -> SkeletonClip:
    """Raw frames -> (3, target_t, V, max_bodies) clip.

    Bodies are tracked by slot index, ranked by motion energy (summed
    per-coordinate variance over the frames where present), and capped at
    `max_bodies`. All coordinates are translated so the primary body's
    center joint sits at the origin in its first frame. Time is loop-padded.
    """
    nonempty = [bodies for bodies in frames if bodies]
    if not nonempty:
        raise ValueError("all frames are empty")
    v = graph.num_joints
    slots = max(len(bodies) for bodies in nonempty)

    def energy(slot: int) -> float:
        stack = np.array([bodies[slot] for bodies in nonempty if len(bodies) > slot])
        if stack.shape[0] < 2:
            return 0.0
        return float(stack.var(axis=0).sum())

    ranked = sorted(range(slots), key=lambda s: (-energy(s), s))[:max_bodies]
    primary = ranked[0]
    first = next(bodies for bodies in nonempty if len(bodies) > primary)
    origin = first[primary][graph.center_joint].copy()

    t_valid = len(nonempty)
    data = np.zeros((3, target_t, v, max_bodies))
    for t in range(target_t):
        bodies = nonempty[t % t_valid]
        for m, slot in enumerate(ranked):
            if len(bodies) > slot:
                data[:, t, :, m] = (bodies[slot] - origin).T
    return SkeletonClip(data=data, label=label, valid_frames=min(t_valid, target_t))


def compute_bones(clip: SkeletonClip, graph: SkeletonGraph) -> SkeletonClip:
    """Append bone vectors (joint minus kinematic parent) as channels 3..5."""
    if clip.data.shape[0] != 3:
        raise ValueError(f"bones need a 3-channel clip, got {clip.data.shape[0]} channels")
    if graph.parents is None:
        raise ValueError("graph has no parent map")
    joints = clip.data
    bones = joints - joints[:, :, graph.parents, :]
    return SkeletonClip(data=np.concatenate([joints, bones], axis=0),
                        label=clip.label, valid_frames=clip.valid_frames)


def add_bone_channels(data: np.ndarray, graph: SkeletonGraph) -> np.ndarray:
    """Batch variant of compute_bones for (N, 3, T, V, M) arrays."""
    if data.shape[1] != 3:
        raise ValueError(f"bones need 3 channels, got {data.shape[1]}")
    bones = data - data[:, :, :, graph.parents, :]
    return np.concatenate([data, bones], axis=1)
