"""Debounce recognized actions into robot start commands.

A command fires only when the same action has been recognized K times in a
row, and only at the moment the run reaches exactly K; longer runs do not
re-trigger. While a trajectory is executing, a newly debounced action is
parked in a depth-1 pending slot (latest wins) and starts when the current
trajectory completes: non-preemptive, complete-then-switch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .actions import ActionClass


class FsmMode(str, Enum):
    IDLE = "idle"
    EXECUTING = "executing"


@dataclass(frozen=True)
class FsmConfig:
    k_consecutive: int = 5

    def __post_init__(self) -> None:
        if self.k_consecutive < 1:
            raise ValueError("k_consecutive must be >= 1")


@dataclass(frozen=True)
class FsmState:
    mode: FsmMode = FsmMode.IDLE
    executing: Optional[ActionClass] = None
    candidate: Optional[ActionClass] = None
    count: int = 0
    pending: Optional[ActionClass] = None

    def __post_init__(self) -> None:
        if (self.mode == FsmMode.EXECUTING) != (self.executing is not None):
            raise ValueError("executing action must be set exactly in executing mode")
        if self.pending is not None and self.mode != FsmMode.EXECUTING:
            raise ValueError("pending action only exists while executing")
        if self.count < 0:
            raise ValueError("count must be >= 0")


def fsm_step(
    state: FsmState, recognized: ActionClass, config: FsmConfig
) -> tuple[FsmState, Optional[ActionClass]]:
    """Consume one recognition; returns the new state and an optional start.

    Total function: every input merely updates the run-length counter
    unless it completes a fresh run of exactly K.
    """
    k = config.k_consecutive
    recognized = ActionClass(recognized)
    if recognized == state.candidate:
        if state.count >= k:  # saturated: the run already triggered
            return state, None
        count = state.count + 1
    else:
        count = 1
    triggered = count == k
    state = replace(state, candidate=recognized, count=count)
    if not triggered:
        return state, None
    if state.mode == FsmMode.IDLE:
        started = replace(state, mode=FsmMode.EXECUTING, executing=recognized)
        return started, recognized
    return replace(state, pending=recognized), None


def fsm_complete(state: FsmState) -> tuple[FsmState, Optional[ActionClass]]:
    """The running trajectory finished; hand over to the pending action if any."""
    if state.mode != FsmMode.EXECUTING:
        raise ValueError("no trajectory is executing")
    if state.pending is None:
        return replace(state, mode=FsmMode.IDLE, executing=None), None
    nxt = state.pending
    return replace(state, executing=nxt, pending=None), nxt
