"""Simulated robot arm driven by preset waypoint trajectories.

Each action maps to a fixed trajectory: a polyline of 3-D waypoints with
per-segment durations. The simulator linearly interpolates the endpoint
along the active trajectory; every trajectory starts and ends at a shared
home pose so the endpoint path stays continuous across executions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .actions import ActionClass

Point = tuple[float, float, float]

# absorbs float accumulation when many small ticks sum to the total duration
_TIME_EPS = 1e-9


def _as_point(values: object) -> Point:
    if not isinstance(values, (list, tuple)) or len(values) != 3:
        raise ValueError(f"waypoint must have 3 coordinates, got {values!r}")
    point = tuple(float(v) for v in values)
    if not all(math.isfinite(v) for v in point):
        raise ValueError(f"waypoint coordinates must be finite, got {values!r}")
    return point


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear endpoint path for one action."""

    action: ActionClass
    waypoints: tuple[Point, ...]
    durations: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "action", ActionClass(self.action))
        waypoints = tuple(_as_point(p) for p in self.waypoints)
        durations = tuple(float(d) for d in self.durations)
        object.__setattr__(self, "waypoints", waypoints)
        object.__setattr__(self, "durations", durations)
        if len(waypoints) < 2:
            raise ValueError("trajectory needs at least 2 waypoints")
        if len(durations) != len(waypoints) - 1:
            raise ValueError(
                f"expected {len(waypoints) - 1} segment durations, got {len(durations)}"
            )
        if any(not math.isfinite(d) or d <= 0.0 for d in durations):
            raise ValueError("segment durations must be positive")

    @property
    def total_duration(self) -> float:
        return sum(self.durations)

    def segment_speeds(self) -> tuple[float, ...]:
        speeds = []
        for (a, b), dur in zip(zip(self.waypoints, self.waypoints[1:]), self.durations):
            speeds.append(math.dist(a, b) / dur)
        return tuple(speeds)

    def endpoint_at(self, elapsed: float) -> Point:
        """Linearly interpolated endpoint after `elapsed` seconds, clamped."""
        if elapsed <= 0.0:
            return self.waypoints[0]
        for (a, b), dur in zip(zip(self.waypoints, self.waypoints[1:]), self.durations):
            if elapsed <= dur:
                t = elapsed / dur
                return (
                    a[0] + (b[0] - a[0]) * t,
                    a[1] + (b[1] - a[1]) * t,
                    a[2] + (b[2] - a[2]) * t,
                )
            elapsed -= dur
        return self.waypoints[-1]


def load_trajectory_library(
    path: Optional[Union[str, Path]] = None
) -> dict[ActionClass, Trajectory]:
    """Load and validate the action -> trajectory map (bundled file by default).

    Rejects unknown actions, missing actions, malformed geometry, and
    trajectories that do not share a single home pose as both first and
    last waypoint.
    """
    if path is None:
        text = (resources.files("har_teleop") / "data" / "trajectories.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"trajectory library is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError("trajectory library must be a JSON object keyed by action")

    library: dict[ActionClass, Trajectory] = {}
    for name, entry in raw.items():
        try:
            action = ActionClass.from_name(name)
        except ValueError as exc:
            raise ValueError(f"unknown action {name!r} in trajectory library") from exc
        if not isinstance(entry, dict) or set(entry) != {"waypoints", "durations"}:
            raise ValueError(f"trajectory for {name!r} must map waypoints and durations")
        library[action] = Trajectory(
            action=action,
            waypoints=tuple(entry["waypoints"]),
            durations=tuple(entry["durations"]),
        )

    missing = [a.name.lower() for a in ActionClass if a not in library]
    if missing:
        raise ValueError(f"trajectory library is missing actions: {', '.join(missing)}")

    home = library[ActionClass.CUT].waypoints[0]
    for action, traj in library.items():
        if traj.waypoints[0] != home or traj.waypoints[-1] != home:
            raise ValueError(
                f"trajectory for {action.name.lower()} must start and end at home {home}"
            )
    return library


def library_home(library: dict[ActionClass, Trajectory]) -> Point:
    """Shared home pose of a validated library."""
    return next(iter(library.values())).waypoints[0]


def trajectory_for(
    action: ActionClass, library: dict[ActionClass, Trajectory]
) -> Trajectory:
    return library[ActionClass(action)]


class RobotSim:
    """Time-stepped endpoint simulator; one trajectory at a time."""

    def __init__(self, home: Point, max_speed: float = 1.5):
        if not (math.isfinite(max_speed) and max_speed > 0.0):
            raise ValueError("max_speed must be positive")
        self.home = _as_point(home)
        self.max_speed = float(max_speed)
        self.endpoint: Point = self.home
        self._active: Optional[Trajectory] = None
        self._elapsed = 0.0

    @property
    def is_idle(self) -> bool:
        return self._active is None

    @property
    def active_action(self) -> Optional[ActionClass]:
        return self._active.action if self._active is not None else None

    @property
    def progress(self) -> float:
        """Fraction of the active trajectory already elapsed (0 when idle)."""
        if self._active is None:
            return 0.0
        return min(self._elapsed / self._active.total_duration, 1.0)

    def start(self, trajectory: Trajectory) -> None:
        if self._active is not None:
            raise RuntimeError("robot is already executing a trajectory")
        if trajectory.waypoints[0] != self.endpoint:
            raise ValueError(
                f"trajectory starts at {trajectory.waypoints[0]}, "
                f"endpoint is at {self.endpoint}"
            )
        fastest = max(trajectory.segment_speeds())
        if fastest > self.max_speed + 1e-12:
            raise ValueError(
                f"segment speed {fastest:.3f} m/s exceeds limit {self.max_speed} m/s"
            )
        self._active = trajectory
        self._elapsed = 0.0

    def tick(self, dt: float) -> bool:
        """Advance time by dt seconds; True exactly on the completing tick."""
        if not (math.isfinite(dt) and dt > 0.0):
            raise ValueError("dt must be positive")
        if self._active is None:
            return False
        self._elapsed += dt
        if self._elapsed >= self._active.total_duration - _TIME_EPS:
            self.endpoint = self._active.waypoints[-1]
            self._active = None
            self._elapsed = 0.0
            return True
        self.endpoint = self._active.endpoint_at(self._elapsed)
        return False
