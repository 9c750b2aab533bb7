"""Spatio-temporal window graphs built from landmark frames.

Each frame contributes 8 nodes in a fixed order (7 pose landmarks then the
object) whose features are coordinates relative to the anchor landmark of
the same frame. Per frame there are 8 undirected spatial edges (7 skeleton
links plus finger-object), and each consecutive frame pair is joined by 8
undirected temporal edges, one per node role. Undirected edges are stored
as directed pairs in both directions so message passing is symmetric:
a window of F frames has 8F nodes, 16F directed spatial edges and
16(F-1) directed temporal edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .frames import (
    ANCHOR_LANDMARK,
    POSE_LANDMARK_IDS,
    AwaitingObservation,
    CarryForward,
    FrameError,
    LandmarkFrame,
)

OBJECT_NODE = "object"
NODE_ROLE_ORDER = POSE_LANDMARK_IDS + (OBJECT_NODE,)
NODES_PER_FRAME = len(NODE_ROLE_ORDER)  # 8

# Skeleton links between pose landmarks, plus the index finger to object link.
SKELETON_EDGES = ((11, 12), (12, 14), (14, 16), (16, 18), (16, 22), (16, 20), (18, 20))
FINGER_OBJECT_EDGE = (20, OBJECT_NODE)

_ROLE_INDEX = {role: i for i, role in enumerate(NODE_ROLE_ORDER)}
_FRAME_EDGE_ROLES = np.array(
    [(_ROLE_INDEX[a], _ROLE_INDEX[b]) for a, b in SKELETON_EDGES + (FINGER_OBJECT_EDGE,)],
    dtype=np.int64,
)


@dataclass(frozen=True)
class WindowGraph:
    """Immutable graph over a window of consecutive frames."""

    window_size: int
    node_features: np.ndarray  # (8 * window_size, 2)
    spatial_edges: np.ndarray  # (16 * window_size, 2) directed pairs
    temporal_edges: np.ndarray  # (16 * (window_size - 1), 2) directed pairs
    start_frame_index: int = 0
    label: Optional[int] = None

    def __post_init__(self) -> None:
        for arr in (self.node_features, self.spatial_edges, self.temporal_edges):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return self.window_size * NODES_PER_FRAME

    def all_edges(self) -> np.ndarray:
        return np.concatenate([self.spatial_edges, self.temporal_edges], axis=0)


def frame_node_features(frame: LandmarkFrame) -> np.ndarray:
    """8 feature vectors: each point minus the frame's anchor landmark.

    Node order is [11, 12, 14, 16, 18, 20, 22, object]; the anchor's own
    feature is exactly (0, 0).
    """
    anchor = frame.landmarks[ANCHOR_LANDMARK]
    if anchor is None:
        raise AwaitingObservation(
            f"frame {frame.frame_index}: anchor landmark never observed"
        )
    points = []
    for lid in POSE_LANDMARK_IDS:
        p = frame.landmarks[lid]
        if p is None:
            raise FrameError(f"frame {frame.frame_index}: landmark {lid} unpopulated")
        points.append(p)
    if frame.object_point is None:
        raise FrameError(f"frame {frame.frame_index}: object slot unpopulated")
    points.append(frame.object_point)
    feats = np.asarray(points, dtype=np.float64) - np.asarray(anchor, dtype=np.float64)
    feats[_ROLE_INDEX[ANCHOR_LANDMARK]] = 0.0
    return feats


def spatial_edge_array(n_frames: int) -> np.ndarray:
    """Directed spatial edges for ``n_frames`` stacked frames, (16*F, 2)."""
    base = np.concatenate([_FRAME_EDGE_ROLES, _FRAME_EDGE_ROLES[:, ::-1]], axis=0)
    offsets = np.arange(n_frames, dtype=np.int64)[:, None, None] * NODES_PER_FRAME
    return (base[None, :, :] + offsets).reshape(-1, 2)


def temporal_edge_array(n_frames: int) -> np.ndarray:
    """Directed temporal edges linking node k of frame i to frame i+1, (16*(F-1), 2)."""
    if n_frames < 2:
        return np.empty((0, 2), dtype=np.int64)
    roles = np.arange(NODES_PER_FRAME, dtype=np.int64)
    one_pair = np.stack([roles, roles + NODES_PER_FRAME], axis=1)
    one_pair = np.concatenate([one_pair, one_pair[:, ::-1]], axis=0)
    offsets = np.arange(n_frames - 1, dtype=np.int64)[:, None, None] * NODES_PER_FRAME
    return (one_pair[None, :, :] + offsets).reshape(-1, 2)


@lru_cache(maxsize=None)
def window_edge_arrays(n_frames: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached read-only (spatial, temporal) edge arrays shared across graphs."""
    spatial = spatial_edge_array(n_frames)
    temporal = temporal_edge_array(n_frames)
    spatial.setflags(write=False)
    temporal.setflags(write=False)
    return spatial, temporal


def build_window_graph(
    frames: Sequence[LandmarkFrame], label: Optional[int] = None
) -> WindowGraph:
    """Assemble the graph for exactly these consecutive frames."""
    n = len(frames)
    if n < 1:
        raise ValueError("window must contain at least one frame")
    indices = [f.frame_index for f in frames]
    for prev, cur in zip(indices, indices[1:]):
        if cur != prev + 1:
            raise ValueError(f"frames not consecutive: {prev} followed by {cur}")
    feats = np.concatenate([frame_node_features(f) for f in frames], axis=0)
    return WindowGraph(
        window_size=n,
        node_features=feats,
        spatial_edges=spatial_edge_array(n),
        temporal_edges=temporal_edge_array(n),
        start_frame_index=indices[0],
        label=label,
    )


def video_feature_array(frames: Sequence[LandmarkFrame]) -> np.ndarray:
    """Per-frame node features for a whole video, shape (F, 8, 2).

    Slicing ``arr[s:s+w].reshape(-1, 2)`` reproduces the node features of
    ``build_window_graph(frames[s:s+w])`` exactly.
    """
    return np.stack([frame_node_features(f) for f in frames], axis=0)


class WindowBuffer:
    """Single-writer sliding buffer emitting one graph per push once full.

    Frames are filled by carry-forward as they arrive. Frames preceding the
    first anchor observation are skipped (not buffered). Frame indices must
    be strictly increasing; gaps are rejected unless ``allow_gaps`` is set,
    in which case gapped frames are treated as consecutive.
    """

    def __init__(self, window_size: int, allow_gaps: bool = False) -> None:
        if window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {window_size}")
        self.window_size = window_size
        self.allow_gaps = allow_gaps
        self._filler = CarryForward()
        self._frames: list[LandmarkFrame] = []
        self._last_index: Optional[int] = None
        self.skipped_awaiting = 0

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def buffered_frames(self) -> tuple[LandmarkFrame, ...]:
        """Carry-forward-filled frames currently in the window."""
        return tuple(self._frames)

    def push(self, frame: LandmarkFrame) -> Optional[WindowGraph]:
        if self._last_index is not None:
            if frame.frame_index <= self._last_index:
                raise ValueError(
                    f"out-of-order frame index {frame.frame_index} "
                    f"after {self._last_index}"
                )
            if frame.frame_index != self._last_index + 1 and not self.allow_gaps:
                raise ValueError(
                    f"gap in frame indices: {self._last_index} "
                    f"followed by {frame.frame_index}"
                )
        try:
            filled = self._filler.apply(frame)
        except AwaitingObservation:
            self.skipped_awaiting += 1
            return None
        self._last_index = frame.frame_index
        self._frames.append(filled)
        if len(self._frames) > self.window_size:
            self._frames.pop(0)
        if len(self._frames) == self.window_size:
            window = self._frames
            if self.allow_gaps:
                # reindex so the graph builder sees consecutive frames
                base = window[0].frame_index
                window = [
                    LandmarkFrame(
                        frame_index=base + k,
                        timestamp=f.timestamp,
                        landmarks=f.landmarks,
                        object_point=f.object_point,
                        observed=f.observed,
                        object_observed=f.object_observed,
                    )
                    if f.frame_index != base + k
                    else f
                    for k, f in enumerate(window)
                ]
            return build_window_graph(window)
        return None
