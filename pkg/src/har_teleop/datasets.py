"""Video records, sliding-window datasets, stratified splits, and disk IO.

A dataset on disk is a directory of per-video JSONL files plus a
``manifest.json`` mapping video ids to label, source, seed and split.
Windowed datasets keep one feature array per video and materialize
``WindowGraph`` objects on demand, so even single-frame windows over a
large corpus stay cheap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .actions import NUM_ACTIONS, ActionClass
from .frames import LandmarkFrame, fill_forward, frame_to_line, parse_frame_line
from .graphs import (
    NODES_PER_FRAME,
    WindowGraph,
    video_feature_array,
    window_edge_arrays,
)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
VIDEO_SOURCES = ("synthetic", "recorded")


@dataclass(frozen=True)
class VideoRecord:
    """One labeled clip: consecutive landmark frames sharing a single action."""

    video_id: str
    label: ActionClass
    frames: tuple[LandmarkFrame, ...]
    source: str = "synthetic"
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValueError("video_id must be non-empty")
        if self.source not in VIDEO_SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if len(self.frames) < 1:
            raise ValueError(f"video {self.video_id} has no frames")
        first = self.frames[0].frame_index
        for k, frame in enumerate(self.frames):
            if frame.frame_index != first + k:
                raise ValueError(
                    f"video {self.video_id}: frame indices not consecutive at {k}"
                )

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def feature_array(self) -> np.ndarray:
        """Per-frame node features (F, 8, 2) float32, carry-forward filled.

        Computed once and memoized on the record, so slicing the same
        videos at several window sizes shares the expensive pass.
        """
        cached = getattr(self, "_feature_cache", None)
        if cached is None:
            filled = list(fill_forward(self.frames))
            cached = video_feature_array(filled).astype(np.float32)
            cached.setflags(write=False)
            object.__setattr__(self, "_feature_cache", cached)
        return cached


@dataclass(frozen=True)
class WindowSample:
    """Provenance of one window: which video and where it starts."""

    video_id: str
    label: int
    start: int


class WindowedDataset:
    """Every contiguous window of every video, labeled by its source video."""

    def __init__(self, window_size: int, videos: Sequence[VideoRecord]) -> None:
        if window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not videos:
            raise ValueError("dataset needs at least one video")
        lengths = {v.num_frames for v in videos}
        if len(lengths) != 1:
            raise ValueError(f"videos have mixed frame counts {sorted(lengths)}")
        self.num_frames = lengths.pop()
        if window_size > self.num_frames:
            raise ValueError(
                f"window_size {window_size} exceeds video length {self.num_frames}"
            )
        self.window_size = window_size
        self.samples: list[WindowSample] = []
        self._features: list[np.ndarray] = []
        self._video_of: list[int] = []
        per_video = self.num_frames - window_size + 1
        for vi, video in enumerate(videos):
            self._features.append(video.feature_array())
            for start in range(per_video):
                self.samples.append(WindowSample(video.video_id, int(video.label), start))
                self._video_of.append(vi)
        self.labels = np.array([s.label for s in self.samples], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def nodes_per_graph(self) -> int:
        return self.window_size * NODES_PER_FRAME

    def sample_features(self, i: int) -> np.ndarray:
        """Node features of window i, shape (window_size * 8, 2), read-only view."""
        s = self.samples[i]
        arr = self._features[self._video_of[i]]
        return arr[s.start:s.start + self.window_size].reshape(-1, 2)

    def stacked_features(self, indices: Sequence[int]) -> np.ndarray:
        """Concatenated node features for a batch, shape (B * nodes, 2)."""
        return np.concatenate([self.sample_features(int(i)) for i in indices], axis=0)

    def __getitem__(self, i: int) -> tuple[WindowGraph, int]:
        s = self.samples[i]
        spatial, temporal = window_edge_arrays(self.window_size)
        graph = WindowGraph(
            window_size=self.window_size,
            node_features=self.sample_features(i),
            spatial_edges=spatial,
            temporal_edges=temporal,
            start_frame_index=s.start,
            label=s.label,
        )
        return graph, s.label

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=NUM_ACTIONS)


def window_dataset(videos: Sequence[VideoRecord], window_size: int) -> WindowedDataset:
    """Slice every video into all of its contiguous windows of this size."""
    return WindowedDataset(window_size, videos)


def window_count(num_videos: int, num_frames: int, window_size: int) -> int:
    """Closed form for the sample count of a windowed dataset."""
    if window_size > num_frames:
        raise ValueError("window_size exceeds video length")
    return num_videos * (num_frames - window_size + 1)


def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder split of n items into len(ratios) buckets."""
    raw = [n * r for r in ratios]
    counts = [math.floor(x) for x in raw]
    remainder = n - sum(counts)
    by_fraction = sorted(range(len(ratios)), key=lambda j: raw[j] - counts[j],
                         reverse=True)
    for j in by_fraction[:remainder]:
        counts[j] += 1
    return counts


def split_by_video(
    videos: Sequence[VideoRecord],
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> tuple[list[VideoRecord], list[VideoRecord], list[VideoRecord]]:
    """Stratified train/valid/test split at video granularity.

    Splitting whole videos (never windows) keeps overlapping windows of one
    clip inside a single split, preventing temporal leakage. Deterministic
    per seed; raises if any class would leave a split empty.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three values summing to 1, got {ratios}")
    if min(ratios) <= 0.0:
        raise ValueError("every split needs a positive ratio")
    by_class: dict[int, list[VideoRecord]] = {}
    for video in videos:
        by_class.setdefault(int(video.label), []).append(video)
    splits: tuple[list[VideoRecord], ...] = ([], [], [])
    split_names = ("train", "valid", "test")
    for label in sorted(by_class):
        group = sorted(by_class[label], key=lambda v: v.video_id)
        order = np.random.default_rng([seed, label]).permutation(len(group))
        counts = _allocate(len(group), ratios)
        for name, count in zip(split_names, counts):
            if count == 0:
                raise ValueError(
                    f"class {ActionClass(label).name.lower()} has no videos in {name}"
                )
        offset = 0
        for bucket, count in zip(splits, counts):
            bucket.extend(group[i] for i in order[offset:offset + count])
            offset += count
    return splits


# ---------------------------------------------------------------------------
# disk format


def save_video_jsonl(video: VideoRecord, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for frame in video.frames:
            fh.write(frame_to_line(frame) + "\n")


def load_video_jsonl(
    path: str | Path,
    video_id: str,
    label: ActionClass,
    source: str = "recorded",
    seed: Optional[int] = None,
) -> VideoRecord:
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                frames.append(parse_frame_line(line))
    return VideoRecord(video_id, label, tuple(frames), source=source, seed=seed)


def save_dataset(
    videos: Sequence[VideoRecord],
    directory: str | Path,
    split_of: Optional[Mapping[str, str]] = None,
) -> None:
    """Write per-video JSONL files and the manifest into ``directory``."""
    directory = Path(directory)
    video_dir = directory / "videos"
    video_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for video in videos:
        save_video_jsonl(video, video_dir / f"{video.video_id}.jsonl")
        entries[video.video_id] = {
            "label": ActionClass(video.label).name.lower(),
            "source": video.source,
            "seed": video.seed,
            "num_frames": video.num_frames,
            "split": (split_of or {}).get(video.video_id),
        }
    manifest = {"version": MANIFEST_VERSION, "videos": entries}
    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(directory: str | Path) -> tuple[list[VideoRecord], dict]:
    """Read a dataset directory back; returns (videos, manifest)."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {directory}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.get('version')!r}")
    videos = []
    for video_id in sorted(manifest["videos"]):
        entry = manifest["videos"][video_id]
        videos.append(
            load_video_jsonl(
                directory / "videos" / f"{video_id}.jsonl",
                video_id=video_id,
                label=ActionClass.from_name(entry["label"]),
                source=entry.get("source", "recorded"),
                seed=entry.get("seed"),
            )
        )
    return videos, manifest
