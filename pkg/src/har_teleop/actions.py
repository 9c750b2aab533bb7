"""Action classes recognized by the classifier and executed by the robot."""

from __future__ import annotations

from enum import IntEnum


class ActionClass(IntEnum):
    CUT = 0
    STAB = 1
    FLIP = 2
    PUSH = 3

    @classmethod
    def from_name(cls, name: str) -> "ActionClass":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown action {name!r}") from None


ACTION_NAMES = tuple(a.name.lower() for a in ActionClass)
NUM_ACTIONS = len(ActionClass)
