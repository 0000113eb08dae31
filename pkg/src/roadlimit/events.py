"""Shared domain types and the event model.

Every timestamp in the system is an integer count of milliseconds from
scenario start; there are no floating-point clocks anywhere, so traces are
bit-reproducible. A speed limit is either a positive integer in km/h or the
distinguished "unknown", represented as ``None`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

# None means "unknown": no limit is currently known / applicable.
SpeedLimit = Optional[int]

# Legal numeric limits: multiples of 5 between 5 and 130 km/h inclusive.
VALID_LIMITS = frozenset(range(5, 131, 5))


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"


class SubSign(Enum):
    """Supplementary panel under a main speed sign restricting its scope."""

    NONE = "none"
    EXIT_ARROW = "exit_arrow"
    END_OF_LIMIT = "end_of_limit"
    VEHICLE_CLASS = "vehicle_class"
    WEATHER = "weather"


def is_valid_limit(limit: SpeedLimit) -> bool:
    """True for unknown or a legal numeric limit."""
    return limit is None or limit in VALID_LIMITS


def format_limit(limit: SpeedLimit) -> str:
    return "unknown" if limit is None else str(limit)


def _check_limit(limit: SpeedLimit) -> None:
    if not is_valid_limit(limit):
        raise ValueError(f"invalid speed limit {limit!r}: must be a multiple of 5 in 5..130")


@dataclass(frozen=True)
class VisionEvent:
    """A traffic-sign detection: main limit plus optional sub-sign attribute.

    The limit is unknown exactly when the sub-sign is END_OF_LIMIT; an
    end-of-limit sign cancels a restriction and carries no numeric value.
    """

    limit: SpeedLimit
    sub_sign: SubSign = SubSign.NONE
    side: Side = Side.RIGHT

    def __post_init__(self):
        _check_limit(self.limit)
        if (self.limit is None) != (self.sub_sign is SubSign.END_OF_LIMIT):
            raise ValueError(
                "vision limit must be unknown exactly when sub_sign is end_of_limit"
            )


@dataclass(frozen=True)
class CartoEvent:
    """A static-map speed-limit reading for the matched road segment.

    ``ambiguous`` is an input attribute set by the upstream map matcher when
    a very close road with a different limit exists; it is never computed
    here.
    """

    limit: SpeedLimit
    ambiguous: bool = False

    def __post_init__(self):
        _check_limit(self.limit)


@dataclass(frozen=True)
class LaneChangeEvent:
    direction: Side


@dataclass(frozen=True)
class TruthAnnotation:
    """Ground-truth limit used only for scoring; invisible to both engines."""

    limit: SpeedLimit

    def __post_init__(self):
        _check_limit(self.limit)


Payload = Union[VisionEvent, CartoEvent, LaneChangeEvent, TruthAnnotation]

# Fixed rank for events sharing a timestamp. Lane changes sort first so lane
# state is current before any sign arriving at the same instant is
# interpreted; truth sorts last so scoring sees the post-event limit.
_PAYLOAD_RANK = {
    LaneChangeEvent: 0,
    VisionEvent: 1,
    CartoEvent: 2,
    TruthAnnotation: 3,
}


def payload_rank(payload: Payload) -> int:
    return _PAYLOAD_RANK[type(payload)]


def payload_kind(payload: Payload) -> str:
    """Short event-kind name used in traces and reports."""
    if isinstance(payload, VisionEvent):
        return "vision"
    if isinstance(payload, CartoEvent):
        return "carto"
    if isinstance(payload, LaneChangeEvent):
        return "lane_change"
    return "truth"


@dataclass(frozen=True)
class SensorEvent:
    t: int
    payload: Payload

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"event timestamp must be non-negative, got {self.t}")


def order_events(events: list[SensorEvent]) -> list[SensorEvent]:
    """Stable sort by (t, payload rank); equal keys keep their input order."""
    return sorted(events, key=lambda e: (e.t, payload_rank(e.payload)))


def describe_payload(payload: Payload) -> str:
    """Canonical one-line event description used in trace detail columns."""
    if isinstance(payload, VisionEvent):
        return (
            f"limit={format_limit(payload.limit)}"
            f" sub={payload.sub_sign.value} side={payload.side.value}"
        )
    if isinstance(payload, CartoEvent):
        return f"limit={format_limit(payload.limit)} ambiguous={int(payload.ambiguous)}"
    if isinstance(payload, LaneChangeEvent):
        return f"dir={payload.direction.value}"
    return f"limit={format_limit(payload.limit)}"
