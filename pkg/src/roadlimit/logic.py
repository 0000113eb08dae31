"""Rule-based joint interpretation of vision, cartography, and lane changes.

The engine is a three-state machine over an ordered event stream:

* ``STANDARD``: any plain vision limit (no sub-sign) is validated directly.
* ``EXIT_SIGN_DETECTED``: an exit-arrow sign has armed a pending limit that
  applies only if the vehicle later changes lane toward the sign's side.
  Plain vision limits are still validated as in STANDARD.
* ``EXIT_LANE``: the vehicle took the exit; only *decreasing* limits are
  accepted from vision, which is what lets the engine hold a correct lower
  limit even when vision and cartography both report the same wrong higher
  one.

A general rule applies in every state: when the currently validated limit is
older than ``stale_after_ms`` and the map reading carries no ambiguity flag,
the cartographic limit is adopted. A carto adoption while on the exit lane
additionally returns the engine to STANDARD, since the road network has
re-localized the vehicle.

The engine is a pure state-transition function: ``step`` consumes an
immutable state and event and returns a new state, so runs are trivially
deterministic and scenario replays are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .events import (
    CartoEvent,
    LaneChangeEvent,
    SensorEvent,
    Side,
    SpeedLimit,
    SubSign,
    VisionEvent,
    describe_payload,
    format_limit,
    payload_kind,
)
from .trace import Trace, TraceRow


class ClockError(ValueError):
    """Event timestamps fed to one engine instance must be non-decreasing."""


class ConfigError(ValueError):
    pass


class EngineMode(Enum):
    STANDARD = "standard"
    EXIT_SIGN_DETECTED = "exit_sign_detected"
    EXIT_LANE = "exit_lane"


@dataclass(frozen=True)
class EngineConfig:
    """Tunable durations; the rule set itself is fixed.

    stale_after_ms: age past which the validated limit counts as "too old"
        and an unambiguous carto reading may replace it.
    exit_pending_ttl_ms: how long an exit-arrow limit stays armed awaiting a
        lane change; an unbounded arm would misfire on lane changes far
        downstream.
    exit_mode_ttl_ms: fallback exit from EXIT_LANE mode when no carto
        adoption re-localizes the vehicle.
    ignore_left_side: optionally drop all vision events detected on the left
        road side before interpretation. Off by default; the decreasing-only
        rule already survives wrong left-side detections.
    """

    stale_after_ms: int = 30_000
    exit_pending_ttl_ms: int = 20_000
    exit_mode_ttl_ms: int = 60_000
    ignore_left_side: bool = False

    def __post_init__(self):
        for name in ("stale_after_ms", "exit_pending_ttl_ms", "exit_mode_ttl_ms"):
            value = getattr(self, name)
            if value <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class EngineState:
    """Engine state between events.

    ``pending_*`` fields are present exactly in EXIT_SIGN_DETECTED mode and
    ``exit_entered_at`` exactly in EXIT_LANE mode. ``clock`` records the last
    stepped event time and only enforces the monotone-clock precondition.
    """

    mode: EngineMode = EngineMode.STANDARD
    validated: SpeedLimit = None
    validated_at: int = 0
    pending_exit_limit: Optional[int] = None
    pending_since: Optional[int] = None
    pending_exit_side: Optional[Side] = None
    exit_entered_at: Optional[int] = None
    clock: int = 0

    def check_invariants(self) -> None:
        """Raise AssertionError unless the state-field coupling holds."""
        pending = (self.pending_exit_limit, self.pending_since, self.pending_exit_side)
        if self.mode is EngineMode.EXIT_SIGN_DETECTED:
            assert all(f is not None for f in pending), "pending fields must be set"
        else:
            assert all(f is None for f in pending), "pending fields must be absent"
        if self.mode is EngineMode.EXIT_LANE:
            assert self.exit_entered_at is not None, "exit_entered_at must be set"
        else:
            assert self.exit_entered_at is None, "exit_entered_at must be absent"
        assert self.validated_at <= self.clock or self.clock == 0


def init(config: EngineConfig) -> EngineState:
    """Initial state: STANDARD mode, no validated limit."""
    if not isinstance(config, EngineConfig):
        raise ConfigError(f"expected EngineConfig, got {type(config).__name__}")
    return EngineState()


def _limit_order(limit: SpeedLimit) -> float:
    # Unknown compares as +inf so any numeric limit counts as a decrease.
    return float("inf") if limit is None else float(limit)


def _clear_pending(state: EngineState) -> EngineState:
    return replace(
        state,
        pending_exit_limit=None,
        pending_since=None,
        pending_exit_side=None,
    )


def _expire_timeouts(state: EngineState, t: int, config: EngineConfig) -> EngineState:
    if state.mode is EngineMode.EXIT_SIGN_DETECTED:
        if t - state.pending_since > config.exit_pending_ttl_ms:
            return _clear_pending(replace(state, mode=EngineMode.STANDARD))
    elif state.mode is EngineMode.EXIT_LANE:
        if t - state.exit_entered_at > config.exit_mode_ttl_ms:
            return replace(state, mode=EngineMode.STANDARD, exit_entered_at=None)
    return state


def _apply_vision(state: EngineState, ev: VisionEvent, t: int, config: EngineConfig) -> EngineState:
    if config.ignore_left_side and ev.side is Side.LEFT:
        return state

    if ev.sub_sign is SubSign.END_OF_LIMIT:
        # The restriction is cancelled; only cartography knows the default
        # rules, so invalidate and let the general rule take over. On the
        # exit lane this also ends the decreasing-only regime.
        state = replace(state, validated=None, validated_at=t)
        if state.mode is EngineMode.EXIT_LANE:
            state = replace(state, mode=EngineMode.STANDARD, exit_entered_at=None)
        return state

    if ev.sub_sign in (SubSign.VEHICLE_CLASS, SubSign.WEATHER):
        # Limit does not apply to this vehicle; interpretation of these
        # panels is out of scope, so the event never changes the limit.
        return state

    if ev.sub_sign is SubSign.EXIT_ARROW:
        if state.mode is EngineMode.EXIT_LANE:
            # Already on an exit lane; a further exit-only limit belongs to
            # another lane and the single pending slot stays unused.
            return state
        return replace(
            state,
            mode=EngineMode.EXIT_SIGN_DETECTED,
            pending_exit_limit=ev.limit,
            pending_since=t,
            pending_exit_side=ev.side,
        )

    # Plain sign.
    if state.mode is EngineMode.EXIT_LANE:
        if _limit_order(ev.limit) < _limit_order(state.validated):
            return replace(state, validated=ev.limit, validated_at=t)
        return state
    return replace(state, validated=ev.limit, validated_at=t)


def _apply_lane_change(state: EngineState, ev: LaneChangeEvent, t: int) -> EngineState:
    if state.mode is EngineMode.EXIT_SIGN_DETECTED and ev.direction is state.pending_exit_side:
        state = replace(
            state,
            mode=EngineMode.EXIT_LANE,
            validated=state.pending_exit_limit,
            validated_at=t,
            exit_entered_at=t,
        )
        return _clear_pending(state)
    return state


def _apply_carto(state: EngineState, ev: CartoEvent, t: int, config: EngineConfig) -> EngineState:
    if t - state.validated_at > config.stale_after_ms and not ev.ambiguous:
        state = replace(state, validated=ev.limit, validated_at=t)
        if state.mode is EngineMode.EXIT_LANE:
            state = replace(state, mode=EngineMode.STANDARD, exit_entered_at=None)
    return state


def step(
    state: EngineState, event: SensorEvent, config: EngineConfig
) -> tuple[EngineState, SpeedLimit]:
    """Advance the engine by one event; return (new state, validated limit)."""
    if event.t < state.clock:
        raise ClockError(
            f"event at t={event.t} arrived after engine clock {state.clock}"
        )

    state = _expire_timeouts(state, event.t, config)

    payload = event.payload
    if isinstance(payload, VisionEvent):
        state = _apply_vision(state, payload, event.t, config)
    elif isinstance(payload, LaneChangeEvent):
        state = _apply_lane_change(state, payload, event.t)
    elif isinstance(payload, CartoEvent):
        state = _apply_carto(state, payload, event.t, config)
    # TruthAnnotation: scoring-only, invisible to the engine.

    state = replace(state, clock=event.t)
    return state, state.validated


def run(events: list[SensorEvent], config: EngineConfig) -> Trace:
    """Fold ``step`` over an ordered event list, logging one row per event."""
    state = init(config)
    rows = []
    for event in events:
        mode_before = state.mode.value
        state, validated = step(state, event, config)
        rows.append(
            TraceRow(
                t=event.t,
                event_kind=payload_kind(event.payload),
                detail=describe_payload(event.payload),
                mode_before=mode_before,
                mode_after=state.mode.value,
                validated=format_limit(validated),
            )
        )
    return Trace(rows=tuple(rows))
