"""Online recognition pipeline: landmark frames in, event stream out.

One pipeline serves one session. Frames are validated and enqueued by
`ingest_frame`; `pipeline_tick` drains one frame through the sliding
window, the classifier, the debouncing FSM, and the robot simulator,
emitting immutable events along the way. Replay mode runs the identical
code path on a virtual clock derived from recorded frame timestamps, so
live and replay decisions coincide for the same frame sequence.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .actions import ActionClass
from .frames import FrameError, LandmarkFrame, frame_to_obj, parse_frame_obj
from .fsm import FsmConfig, FsmState, fsm_complete, fsm_step
from .gcn import ModelParams, NumericalError, model_forward
from .graphs import WindowBuffer
from .robot import RobotSim, Trajectory, library_home, load_trajectory_library, trajectory_for

PROTOCOL_VERSION = 1

EVENT_KINDS = ("recognition", "fsm_transition", "robot_command", "robot_state",
               "error", "metrics")

# replay-file annotation key marking when the operator finished a gesture
OPERATOR_DONE_KEY = "op_done"


@dataclass(frozen=True)
class PipelineConfig:
    window_size: int = 40
    fps: float = 20.0
    k_consecutive: int = 5
    queue_capacity: int = 64
    max_speed: float = 1.5
    metrics_every: int = 0  # emit a metrics event every N processed frames; 0 = off

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        if self.metrics_every < 0:
            raise ValueError("metrics_every must be >= 0")


@dataclass(frozen=True)
class EventMessage:
    kind: str
    frame_index: int
    payload: Mapping

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

    def to_obj(self) -> dict:
        return {"kind": self.kind, "i": self.frame_index, "payload": dict(self.payload)}

    def to_line(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class IngestResult:
    accepted: bool
    reason: Optional[str]
    events: tuple[EventMessage, ...]


@dataclass(frozen=True)
class LatencyMetrics:
    """Pipeline-internal timing summary for one session.

    `fill_delay_seconds` counts frames processed until the first
    recognition, divided by the configured rate, so a gap-free stream
    reports exactly window_size / fps. Command delays need operator
    ground truth and therefore exist only when replay annotations mark
    gesture completion; live sessions carry command timestamps only.
    """

    fill_delay_seconds: Optional[float]
    update_rate_hz: Optional[float]
    command_delays_seconds: tuple[float, ...]
    command_timestamps: tuple[float, ...]
    frames_ingested: int
    frames_processed: int
    recognitions: int
    dropped_frames: int
    partial: bool

    def to_obj(self) -> dict:
        return {
            "fill_delay_seconds": self.fill_delay_seconds,
            "update_rate_hz": self.update_rate_hz,
            "command_delays_seconds": list(self.command_delays_seconds),
            "command_timestamps": list(self.command_timestamps),
            "frames_ingested": self.frames_ingested,
            "frames_processed": self.frames_processed,
            "recognitions": self.recognitions,
            "dropped_frames": self.dropped_frames,
            "partial": self.partial,
        }


def _error_event(frame_index: int, code: str, text: str) -> EventMessage:
    return EventMessage("error", frame_index, {"code": code, "text": text})


def _fsm_payload(state: FsmState) -> dict:
    def name(a: Optional[ActionClass]) -> Optional[str]:
        return a.name.lower() if a is not None else None

    return {
        "mode": state.mode.value,
        "executing": name(state.executing),
        "candidate": name(state.candidate),
        "count": state.count,
        "pending": name(state.pending),
    }


class SessionPipeline:
    """Single-session loop: bounded ingest queue, one frame per tick.

    The robot clock is driven by frame timestamps, so the same frames
    produce the same decisions whether they arrive live or from a file.
    A trajectory completing between two frames is handed to the FSM
    before the newer frame's recognition is processed.
    """

    def __init__(
        self,
        params: ModelParams,
        config: PipelineConfig = PipelineConfig(),
        library: Optional[dict[ActionClass, Trajectory]] = None,
    ):
        self.params = params
        self.config = config
        if library is None:
            library = load_trajectory_library()
        self.library = library
        self._buffer = WindowBuffer(config.window_size, allow_gaps=True)
        self._fsm_config = FsmConfig(k_consecutive=config.k_consecutive)
        self._fsm = FsmState()
        self._robot = RobotSim(library_home(library), max_speed=config.max_speed)
        for traj in library.values():  # fail at construction, not mid-session
            fastest = max(traj.segment_speeds())
            if fastest > config.max_speed:
                raise ValueError(
                    f"trajectory for {traj.action.name.lower()} needs "
                    f"{fastest:.3f} m/s, limit is {config.max_speed} m/s"
                )
        self._queue: deque[LandmarkFrame] = deque()
        self._last_ingested_index: Optional[int] = None
        self._last_robot_time: Optional[float] = None
        self._operator_done: dict[ActionClass, float] = {}
        self.frames_ingested = 0
        self.frames_processed = 0
        self.recognitions = 0
        self.dropped_frames = 0
        self._first_recognition_at: Optional[tuple[int, float]] = None  # (count, t)
        self._last_recognition_time: Optional[float] = None
        self._command_delays: list[float] = []
        self._command_timestamps: list[float] = []

    @property
    def queue_depth(self) -> int:
        return len(self._queue)

    @property
    def fsm_state(self) -> FsmState:
        return self._fsm

    @property
    def robot(self) -> RobotSim:
        return self._robot

    def ingest_frame(self, raw: Union[str, Mapping]) -> IngestResult:
        """Validate and enqueue one frame; never raises on bad input."""
        try:
            obj = json.loads(raw) if isinstance(raw, str) else raw
            frame = parse_frame_obj(obj)
        except (FrameError, json.JSONDecodeError) as exc:
            event = _error_event(-1, "parse", str(exc))
            return IngestResult(False, "parse", (event,))
        if (
            self._last_ingested_index is not None
            and frame.frame_index <= self._last_ingested_index
        ):
            event = _error_event(
                frame.frame_index,
                "out_of_order",
                f"frame index {frame.frame_index} after {self._last_ingested_index}",
            )
            return IngestResult(False, "out_of_order", (event,))
        self._last_ingested_index = frame.frame_index
        self.frames_ingested += 1
        self._queue.append(frame)
        events: tuple[EventMessage, ...] = ()
        if len(self._queue) > self.config.queue_capacity:
            dropped = self._queue.popleft()
            self.dropped_frames += 1
            events = (
                _error_event(
                    dropped.frame_index,
                    "overflow",
                    f"queue full, dropped oldest frame "
                    f"(total dropped: {self.dropped_frames})",
                ),
            )
        if isinstance(obj, Mapping) and OPERATOR_DONE_KEY in obj:
            try:
                action = ActionClass.from_name(str(obj[OPERATOR_DONE_KEY]))
                self.mark_operator_done(action, frame.timestamp)
            except ValueError:
                events = events + (
                    _error_event(frame.frame_index, "annotation",
                                 f"unknown action in {OPERATOR_DONE_KEY!r}"),
                )
        return IngestResult(True, None, events)

    def mark_operator_done(self, action: ActionClass, timestamp: float) -> None:
        """Record ground-truth gesture completion (replay annotations)."""
        self._operator_done[ActionClass(action)] = float(timestamp)

    def pipeline_tick(self) -> list[EventMessage]:
        """Drain one queued frame; returns the events it produced."""
        if not self._queue:
            return []
        frame = self._queue.popleft()
        self.frames_processed += 1
        events: list[EventMessage] = []
        events.extend(self._advance_robot(frame))
        events.extend(self._recognize(frame))
        events.append(self._robot_state_event(frame))
        if (
            self.config.metrics_every
            and self.frames_processed % self.config.metrics_every == 0
        ):
            events.append(self.metrics_event(frame.frame_index))
        return events

    def process_available(self) -> list[EventMessage]:
        """Tick until the ingest queue is empty."""
        events: list[EventMessage] = []
        while self._queue:
            events.extend(self.pipeline_tick())
        return events

    def _advance_robot(self, frame: LandmarkFrame) -> list[EventMessage]:
        events: list[EventMessage] = []
        if self._last_robot_time is not None:
            dt = frame.timestamp - self._last_robot_time
            if dt > 0 and not self._robot.is_idle:
                completed = self._robot.tick(dt)
                if completed:
                    self._fsm, started = fsm_complete(self._fsm)
                    events.append(
                        EventMessage("fsm_transition", frame.frame_index,
                                     _fsm_payload(self._fsm))
                    )
                    if started is not None:
                        events.append(self._start_robot(started, frame))
        self._last_robot_time = frame.timestamp
        return events

    def _recognize(self, frame: LandmarkFrame) -> list[EventMessage]:
        events: list[EventMessage] = []
        graph = self._buffer.push(frame)
        if graph is None:
            return events
        try:
            probs, _ = model_forward(graph, self.params, mode="inference")
        except NumericalError as exc:
            events.append(_error_event(frame.frame_index, "inference", str(exc)))
            return events
        action = ActionClass(int(np.argmax(probs)))
        self.recognitions += 1
        if self._first_recognition_at is None:
            self._first_recognition_at = (self.frames_processed, frame.timestamp)
        self._last_recognition_time = frame.timestamp
        events.append(
            EventMessage(
                "recognition",
                frame.frame_index,
                {
                    "action": action.name.lower(),
                    "probs": [float(p) for p in probs],
                    "t": frame.timestamp,
                },
            )
        )
        before = self._fsm
        self._fsm, started = fsm_step(self._fsm, action, self._fsm_config)
        if self._fsm != before:
            events.append(
                EventMessage("fsm_transition", frame.frame_index,
                             _fsm_payload(self._fsm))
            )
        if started is not None:
            events.append(self._start_robot(started, frame))
        return events

    def _start_robot(self, action: ActionClass, frame: LandmarkFrame) -> EventMessage:
        self._robot.start(trajectory_for(action, self.library))
        self._command_timestamps.append(frame.timestamp)
        done = self._operator_done.get(action)
        if done is not None and done <= frame.timestamp:
            self._command_delays.append(frame.timestamp - done)
        return EventMessage(
            "robot_command", frame.frame_index,
            {"action": action.name.lower(), "t": frame.timestamp},
        )

    def _robot_state_event(self, frame: LandmarkFrame) -> EventMessage:
        action = self._robot.active_action
        return EventMessage(
            "robot_state",
            frame.frame_index,
            {
                "endpoint": list(self._robot.endpoint),
                "action": action.name.lower() if action is not None else None,
                "progress": self._robot.progress,
                "t": frame.timestamp,
            },
        )

    def metrics_snapshot(self) -> LatencyMetrics:
        fill = None
        if self._first_recognition_at is not None:
            fill = self._first_recognition_at[0] / self.config.fps
        rate = None
        if (
            self.recognitions >= 2
            and self._last_recognition_time is not None
            and self._first_recognition_at is not None
        ):
            span = self._last_recognition_time - self._first_recognition_at[1]
            if span > 0:
                rate = (self.recognitions - 1) / span
        return LatencyMetrics(
            fill_delay_seconds=fill,
            update_rate_hz=rate,
            command_delays_seconds=tuple(self._command_delays),
            command_timestamps=tuple(self._command_timestamps),
            frames_ingested=self.frames_ingested,
            frames_processed=self.frames_processed,
            recognitions=self.recognitions,
            dropped_frames=self.dropped_frames,
            partial=self.recognitions == 0,
        )

    def metrics_event(self, frame_index: int = -1) -> EventMessage:
        return EventMessage("metrics", frame_index, self.metrics_snapshot().to_obj())


def replay(
    path: Union[str, Path],
    params: ModelParams,
    config: PipelineConfig = PipelineConfig(),
    library: Optional[dict[ActionClass, Trajectory]] = None,
    speed: float = 0.0,
    out_path: Optional[Union[str, Path]] = None,
) -> tuple[list[str], LatencyMetrics]:
    """Run a recorded JSONL stream through the full pipeline offline.

    Decisions follow the virtual clock in the frame timestamps; `speed`
    only paces emission in real time (0 disables pacing, 2.0 plays twice
    as fast). The returned log lines end with one metrics event and are
    byte-identical across runs for the same file, parameters, and config.
    """
    if speed < 0:
        raise ValueError("speed must be >= 0")
    pipeline = SessionPipeline(params, config, library)
    lines: list[str] = []
    last_t: Optional[float] = None
    with open(path, "r") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            result = pipeline.ingest_frame(raw)
            events = list(result.events)
            if result.accepted:
                if speed > 0:
                    t = pipeline._queue[-1].timestamp
                    if last_t is not None and t > last_t:
                        time.sleep((t - last_t) / speed)
                    last_t = t
                events.extend(pipeline.process_available())
            lines.extend(e.to_line() for e in events)
    final = pipeline.metrics_event()
    lines.append(final.to_line())
    if out_path is not None:
        Path(out_path).write_text("".join(line + "\n" for line in lines))
    return lines, pipeline.metrics_snapshot()


def drive_frames(
    pipeline: SessionPipeline, frames: Iterable[LandmarkFrame]
) -> list[EventMessage]:
    """Feed already-validated frames through a pipeline (live-mode helper)."""
    events: list[EventMessage] = []
    for frame in frames:
        result = pipeline.ingest_frame(frame_to_obj(frame))
        events.extend(result.events)
        events.extend(pipeline.process_available())
    return events
