"""Parametric synthetic videos for the four manipulation actions.

Each action is a deterministic wrist trajectory around a fixed base pose:
cut is a fast vertical oscillation, stab a slow deep plunge with a dwell,
flip a circular arc that displaces the object at every apex pass, push a
wide lateral sweep with the object moving in tandem. Gaussian jitter and
occasional dropout of distal points (scaled by ``noise_level``) exercise
the carry-forward path downstream.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .actions import ActionClass
from .datasets import VideoRecord
from .frames import make_frame

DEFAULT_NUM_FRAMES = 150
DEFAULT_FPS = 20.0

# base pose, normalized image coordinates (y grows downward)
BASE_POSE = {
    11: (0.38, 0.30),
    12: (0.62, 0.30),
    14: (0.70, 0.48),
    16: (0.66, 0.62),
    18: (0.67, 0.70),
    20: (0.655, 0.71),
    22: (0.635, 0.68),
}
BASE_OBJECT = (0.64, 0.80)

# how strongly each landmark follows the wrist trajectory
FOLLOW = {11: 0.0, 12: 0.0, 14: 0.45, 16: 1.0, 18: 1.0, 20: 1.0, 22: 1.0}
DROPPABLE = (16, 18, 20, 22)

CUT_FREQ, CUT_AMP = 1.6, 0.05
STAB_FREQ, STAB_AMP = 0.4, 0.16
FLIP_FREQ, FLIP_RADIUS = 0.8, 0.07
PUSH_FREQ, PUSH_AMP = 0.27, 0.18
FLIP_OBJECT_SHIFT = 0.035
COORD_CLIP = (-0.2, 1.2)


def _triangle(phase: float) -> float:
    """Triangle wave in [-1, 1] with period 2*pi, zero at phase 0."""
    return 2.0 / math.pi * math.asin(math.sin(phase))


def _wrist_offset(action: ActionClass, phase: float) -> tuple[float, float]:
    if action == ActionClass.CUT:
        return 0.0, CUT_AMP * math.sin(phase)
    if action == ActionClass.STAB:
        # plunge downward for half the cycle, dwell at rest for the other half
        plunge = max(0.0, math.sin(phase))
        return 0.0, STAB_AMP * plunge * plunge
    if action == ActionClass.FLIP:
        return FLIP_RADIUS * math.sin(phase), -FLIP_RADIUS * (1.0 - math.cos(phase))
    if action == ActionClass.PUSH:
        return PUSH_AMP * _triangle(phase), 0.0
    raise ValueError(f"unknown action {action!r}")


def _object_point(action: ActionClass, phase: float, dx: float, dy: float
                  ) -> tuple[float, float]:
    ox, oy = BASE_OBJECT
    if action == ActionClass.FLIP:
        # the object is turned over (re-placed) each time the arc tops out
        apex_passes = int((phase + math.pi) // (2.0 * math.pi))
        side = 1.0 if apex_passes % 2 == 0 else -1.0
        return ox + side * FLIP_OBJECT_SHIFT, oy
    if action == ActionClass.PUSH:
        # moves in tandem with the hand
        return ox + dx, oy
    return ox, oy


def _frequency(action: ActionClass) -> float:
    return {
        ActionClass.CUT: CUT_FREQ,
        ActionClass.STAB: STAB_FREQ,
        ActionClass.FLIP: FLIP_FREQ,
        ActionClass.PUSH: PUSH_FREQ,
    }[action]


def generate_synthetic_video(
    action: ActionClass,
    seed: int,
    noise_level: float = 0.02,
    num_frames: int = DEFAULT_NUM_FRAMES,
    fps: float = DEFAULT_FPS,
) -> VideoRecord:
    """One deterministic clip: (action, seed, noise_level) fixes every byte."""
    if noise_level < 0:
        raise ValueError("noise_level must be >= 0")
    if num_frames < 1 or fps <= 0:
        raise ValueError("need num_frames >= 1 and fps > 0")
    action = ActionClass(action)
    rng = np.random.default_rng([int(seed), int(action)])
    freq = _frequency(action)
    drop_prob = min(0.06, 1.5 * noise_level)
    lo, hi = COORD_CLIP

    frames = []
    for i in range(num_frames):
        phase = 2.0 * math.pi * freq * i / fps
        dx, dy = _wrist_offset(action, phase)
        points = {}
        for lid, (bx, by) in BASE_POSE.items():
            f = FOLLOW[lid]
            jx, jy = rng.normal(0.0, noise_level, size=2) if noise_level else (0.0, 0.0)
            points[lid] = (
                min(max(bx + f * dx + jx, lo), hi),
                min(max(by + f * dy + jy, lo), hi),
            )
        ox, oy = _object_point(action, phase, dx, dy)
        jx, jy = rng.normal(0.0, noise_level, size=2) if noise_level else (0.0, 0.0)
        obj: Optional[tuple[float, float]] = (
            min(max(ox + jx, lo), hi),
            min(max(oy + jy, lo), hi),
        )

        if i > 0 and drop_prob > 0.0:  # frame 0 stays complete for carry-forward
            for lid in DROPPABLE:
                if rng.random() < drop_prob:
                    del points[lid]
            if rng.random() < drop_prob:
                obj = None

        frames.append(make_frame(i, (i + 1) / fps, points, obj))

    return VideoRecord(
        video_id=f"{action.name.lower()}-{int(seed):06d}",
        label=action,
        frames=tuple(frames),
        source="synthetic",
        seed=int(seed),
    )


def generate_corpus(
    videos_per_class: int,
    noise_level: float = 0.02,
    seed: int = 0,
    num_frames: int = DEFAULT_NUM_FRAMES,
    fps: float = DEFAULT_FPS,
) -> list[VideoRecord]:
    """Class-balanced corpus; every video gets its own derived seed."""
    videos = []
    for action in ActionClass:
        for k in range(videos_per_class):
            child = seed * 1_000_003 + int(action) * 9_973 + k
            videos.append(
                generate_synthetic_video(
                    action, child, noise_level, num_frames=num_frames, fps=fps
                )
            )
    return videos
