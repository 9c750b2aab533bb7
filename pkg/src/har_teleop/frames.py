"""Landmark frames: validation, JSONL parsing, and carry-forward filling.

A frame holds normalized absolute 2D coordinates for 7 upper-body pose
landmarks plus an optional manipulated-object point. Coordinates are kept
absolute here; translation relative to the anchor landmark happens when
node features are built, so that carry-forward of lost points works across
frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Optional

# BlazePose-indexed upper body points: shoulders, right elbow/wrist/fingers.
POSE_LANDMARK_IDS = (11, 12, 14, 16, 18, 20, 22)
ANCHOR_LANDMARK = 11  # left shoulder; every node feature is relative to it

# Normalized coordinates may stray slightly off-frame for estimated points.
COORD_SLACK_MIN = -0.25
COORD_SLACK_MAX = 1.25

Point = tuple[float, float]


class FrameError(ValueError):
    """A landmark frame failed validation."""


class AwaitingObservation(FrameError):
    """The anchor landmark has not been observed yet; frame unusable."""


def _check_point(name: str, point: Point) -> None:
    x, y = point
    if not (math.isfinite(x) and math.isfinite(y)):
        raise FrameError(f"{name}: non-finite coordinate {point!r}")
    if not (COORD_SLACK_MIN <= x <= COORD_SLACK_MAX and COORD_SLACK_MIN <= y <= COORD_SLACK_MAX):
        raise FrameError(
            f"{name}: coordinate {point!r} outside "
            f"[{COORD_SLACK_MIN}, {COORD_SLACK_MAX}]"
        )


@dataclass(frozen=True)
class LandmarkFrame:
    """One timestamped frame of normalized coordinates.

    ``landmarks`` always has exactly the 7 pose ids as keys; a value of
    ``None`` means the point has not been observed in any frame so far.
    ``observed`` is True only for points measured in this very frame;
    carried-forward and never-seen points are False.
    """

    frame_index: int
    timestamp: float
    landmarks: Mapping[int, Optional[Point]]
    object_point: Optional[Point]
    observed: Mapping[int, bool]
    object_observed: bool

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise FrameError(f"frame_index must be >= 0, got {self.frame_index}")
        if not math.isfinite(self.timestamp):
            raise FrameError(f"non-finite timestamp {self.timestamp!r}")
        if set(self.landmarks) != set(POSE_LANDMARK_IDS):
            raise FrameError(
                f"expected landmark ids {sorted(POSE_LANDMARK_IDS)}, "
                f"got {sorted(self.landmarks)}"
            )
        for lid, point in self.landmarks.items():
            if point is not None:
                _check_point(f"landmark {lid}", point)
        if self.object_point is not None:
            _check_point("object", self.object_point)

    @property
    def anchor(self) -> Optional[Point]:
        return self.landmarks[ANCHOR_LANDMARK]

    def is_complete(self) -> bool:
        """True when every landmark slot and the object slot hold a value."""
        return (
            all(p is not None for p in self.landmarks.values())
            and self.object_point is not None
        )


def make_frame(
    frame_index: int,
    timestamp: float,
    landmarks: Mapping[int, Optional[Point]],
    object_point: Optional[Point],
    observed: Optional[Mapping[int, bool]] = None,
    object_observed: Optional[bool] = None,
) -> LandmarkFrame:
    """Build a validated frame; missing landmark keys become unobserved slots."""
    full = {lid: landmarks.get(lid) for lid in POSE_LANDMARK_IDS}
    if observed is None:
        obs = {lid: full[lid] is not None for lid in POSE_LANDMARK_IDS}
    else:
        obs = {lid: bool(observed.get(lid, False)) for lid in POSE_LANDMARK_IDS}
    if object_observed is None:
        object_observed = object_point is not None
    return LandmarkFrame(
        frame_index=frame_index,
        timestamp=timestamp,
        landmarks=full,
        object_point=object_point,
        observed=obs,
        object_observed=bool(object_observed),
    )


def normalize_frame(
    frame_index: int,
    timestamp: float,
    raw_points: Mapping[int, Point],
    frame_dims: tuple[float, float],
    raw_object: Optional[Point] = None,
) -> LandmarkFrame:
    """Divide pixel coordinates componentwise by the frame dimensions.

    ``raw_points`` maps pose landmark ids to pixel coordinates; points
    absent from the mapping are recorded as unobserved. Zero or negative
    frame dimensions are a configuration error, not a data error.
    """
    w, h = frame_dims
    if not (w > 0 and h > 0) or not (math.isfinite(w) and math.isfinite(h)):
        raise ValueError(f"frame_dims must be positive and finite, got {frame_dims!r}")

    def norm(name: str, p: Point) -> Point:
        x, y = p
        if not (math.isfinite(x) and math.isfinite(y)):
            raise FrameError(f"{name}: non-finite pixel coordinate {p!r}")
        return (x / w, y / h)

    landmarks = {
        lid: norm(f"landmark {lid}", raw_points[lid])
        for lid in POSE_LANDMARK_IDS
        if lid in raw_points
    }
    unknown = set(raw_points) - set(POSE_LANDMARK_IDS)
    if unknown:
        raise FrameError(f"unknown landmark ids {sorted(unknown)}")
    obj = norm("object", raw_object) if raw_object is not None else None
    return make_frame(frame_index, timestamp, landmarks, obj)


def parse_frame_obj(obj: Mapping) -> LandmarkFrame:
    """Validate one decoded JSONL frame object against the stream schema.

    Schema: ``{"i": int, "t": seconds, "lm": {"<id>": [x, y], ...},
    "obj": [x, y] | null}``. Landmark keys may be omitted (point lost in
    that frame); extra keys at the top level are ignored, unknown landmark
    ids are rejected.
    """
    if not isinstance(obj, Mapping):
        raise FrameError(f"frame must be an object, got {type(obj).__name__}")
    try:
        frame_index = obj["i"]
        timestamp = obj["t"]
        lm = obj["lm"]
    except KeyError as exc:
        raise FrameError(f"missing required field {exc.args[0]!r}") from None
    if not isinstance(frame_index, int) or isinstance(frame_index, bool):
        raise FrameError(f"'i' must be an integer, got {frame_index!r}")
    if not isinstance(timestamp, (int, float)) or isinstance(timestamp, bool):
        raise FrameError(f"'t' must be a number, got {timestamp!r}")
    if not isinstance(lm, Mapping):
        raise FrameError("'lm' must be an object")

    def as_point(name: str, value) -> Point:
        if (
            not isinstance(value, (list, tuple))
            or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        ):
            raise FrameError(f"{name}: expected [x, y], got {value!r}")
        return (float(value[0]), float(value[1]))

    landmarks: dict[int, Point] = {}
    for key, value in lm.items():
        try:
            lid = int(key)
        except (TypeError, ValueError):
            raise FrameError(f"landmark id {key!r} is not an integer") from None
        if lid not in POSE_LANDMARK_IDS:
            raise FrameError(f"unknown landmark id {lid}")
        landmarks[lid] = as_point(f"landmark {lid}", value)

    raw_obj = obj.get("obj")
    object_point = as_point("object", raw_obj) if raw_obj is not None else None
    return make_frame(int(frame_index), float(timestamp), landmarks, object_point)


def parse_frame_line(line: str) -> LandmarkFrame:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FrameError(f"unparseable frame line: {exc}") from None
    return parse_frame_obj(obj)


def frame_to_obj(frame: LandmarkFrame) -> dict:
    """Serialize to the stream schema. Only observed points are written,
    so a round trip through carry-forward reconstructs the frame."""
    lm = {
        str(lid): [frame.landmarks[lid][0], frame.landmarks[lid][1]]
        for lid in POSE_LANDMARK_IDS
        if frame.observed[lid] and frame.landmarks[lid] is not None
    }
    obj = None
    if frame.object_observed and frame.object_point is not None:
        obj = [frame.object_point[0], frame.object_point[1]]
    return {"i": frame.frame_index, "t": frame.timestamp, "lm": lm, "obj": obj}


def frame_to_line(frame: LandmarkFrame) -> str:
    return json.dumps(frame_to_obj(frame), separators=(",", ":"))


class CarryForward:
    """Fills unobserved points with the last observed coordinate.

    Points never observed are filled with (0, 0) and flagged invalid,
    except the anchor landmark: frames arriving before its first
    observation cannot be translated and raise ``AwaitingObservation``.
    """

    def __init__(self) -> None:
        self._last: dict[int, Point] = {}
        self._last_object: Optional[Point] = None

    def apply(self, frame: LandmarkFrame) -> LandmarkFrame:
        landmarks: dict[int, Optional[Point]] = {}
        observed: dict[int, bool] = {}
        for lid in POSE_LANDMARK_IDS:
            point = frame.landmarks[lid] if frame.observed[lid] else None
            if point is not None:
                self._last[lid] = point
                landmarks[lid] = point
                observed[lid] = True
            else:
                landmarks[lid] = self._last.get(lid, (0.0, 0.0))
                observed[lid] = False
        obj = frame.object_point if frame.object_observed else None
        if obj is not None:
            self._last_object = obj
            object_observed = True
        else:
            obj = self._last_object if self._last_object is not None else (0.0, 0.0)
            object_observed = False
        if ANCHOR_LANDMARK not in self._last:
            # caches above still take the frame's observations
            raise AwaitingObservation(
                f"frame {frame.frame_index}: anchor landmark {ANCHOR_LANDMARK} "
                "never observed, awaiting first full observation"
            )
        return LandmarkFrame(
            frame_index=frame.frame_index,
            timestamp=frame.timestamp,
            landmarks=landmarks,
            object_point=obj,
            observed=observed,
            object_observed=object_observed,
        )


def fill_forward(frames: Iterable[LandmarkFrame]) -> Iterator[LandmarkFrame]:
    """Apply carry-forward over a whole frame sequence."""
    filler = CarryForward()
    for frame in frames:
        yield filler.apply(frame)
