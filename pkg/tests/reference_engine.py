"""Straight-line reference interpreter for the three-state fusion rules.

Written independently of roadlimit.logic and kept deliberately flat: one
function, local variables for the whole engine state, if/elif chains, and
its own CSV writer. It shares only the event vocabulary with the package.
Used as the dual-implementation oracle: traces from this interpreter must be
byte-identical to the production engine's.
"""

from roadlimit.events import (
    CartoEvent,
    LaneChangeEvent,
    SensorEvent,
    Side,
    SubSign,
    TruthAnnotation,
    VisionEvent,
    format_limit,
)


def reference_rows(
    events,
    stale_after_ms=30_000,
    exit_pending_ttl_ms=20_000,
    exit_mode_ttl_ms=60_000,
    ignore_left_side=False,
):
    """Interpret an ordered event list; return trace rows as plain tuples.

    Each row is (t, kind, detail, mode_before, mode_after, validated_str).
    """
    mode = "standard"
    validated = None  # None = unknown
    validated_at = 0
    pending_limit = None
    pending_since = None
    pending_side = None
    exit_entered_at = None
    clock = 0

    rows = []
    for ev in events:
        if ev.t < clock:
            raise ValueError("non-monotone timestamp")
        t = ev.t
        p = ev.payload
        mode_before = mode

        # Timeouts are evaluated against the incoming event time before the
        # event itself is processed.
        if mode == "exit_sign_detected" and t - pending_since > exit_pending_ttl_ms:
            mode = "standard"
            pending_limit = pending_since = pending_side = None
        elif mode == "exit_lane" and t - exit_entered_at > exit_mode_ttl_ms:
            mode = "standard"
            exit_entered_at = None

        if isinstance(p, VisionEvent):
            if ignore_left_side and p.side is Side.LEFT:
                pass
            elif p.sub_sign is SubSign.END_OF_LIMIT:
                validated = None
                validated_at = t
                if mode == "exit_lane":
                    mode = "standard"
                    exit_entered_at = None
            elif p.sub_sign is SubSign.VEHICLE_CLASS or p.sub_sign is SubSign.WEATHER:
                pass
            elif p.sub_sign is SubSign.EXIT_ARROW:
                if mode == "standard" or mode == "exit_sign_detected":
                    mode = "exit_sign_detected"
                    pending_limit = p.limit
                    pending_since = t
                    pending_side = p.side
            else:  # plain sign
                if mode == "standard" or mode == "exit_sign_detected":
                    validated = p.limit
                    validated_at = t
                else:  # exit lane: decreasing limits only, unknown acts as +inf
                    current = float("inf") if validated is None else validated
                    if p.limit < current:
                        validated = p.limit
                        validated_at = t
        elif isinstance(p, LaneChangeEvent):
            if mode == "exit_sign_detected" and p.direction is pending_side:
                mode = "exit_lane"
                validated = pending_limit
                validated_at = t
                exit_entered_at = t
                pending_limit = pending_since = pending_side = None
        elif isinstance(p, CartoEvent):
            if t - validated_at > stale_after_ms and not p.ambiguous:
                validated = p.limit
                validated_at = t
                if mode == "exit_lane":
                    mode = "standard"
                    exit_entered_at = None
        elif isinstance(p, TruthAnnotation):
            pass

        clock = t

        if isinstance(p, VisionEvent):
            kind = "vision"
            detail = (
                f"limit={format_limit(p.limit)}"
                f" sub={p.sub_sign.value} side={p.side.value}"
            )
        elif isinstance(p, CartoEvent):
            kind = "carto"
            detail = f"limit={format_limit(p.limit)} ambiguous={int(p.ambiguous)}"
        elif isinstance(p, LaneChangeEvent):
            kind = "lane_change"
            detail = f"dir={p.direction.value}"
        else:
            kind = "truth"
            detail = f"limit={format_limit(p.limit)}"
        rows.append((t, kind, detail, mode_before, mode, format_limit(validated)))

    return rows


def reference_csv(rows):
    """Serialize reference rows in the trace CSV format (own writer)."""
    out = ["t_ms,event,detail,mode_before,mode_after,validated"]
    for t, kind, detail, mode_before, mode_after, validated in rows:
        out.append(f"{t},{kind},{detail},{mode_before},{mode_after},{validated}")
    return "\n".join(out) + "\n"
