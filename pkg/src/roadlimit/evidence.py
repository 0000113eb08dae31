"""Dempster-Shafer two-sensor fusion baseline.

Treats vision and cartography as complementary sensors of different
reliability: each reading puts a simple-support mass on its own singleton
and the remainder on the whole frame, the two masses are combined with
Dempster's rule, and the retained limit is the one with maximum
plausibility. Lane-change events are ignored; the baseline exists to show
where a purely evidential decision fails on event streams the rule engine
handles.

Subsets of the frame are encoded as bitmasks over hypothesis indices, so
exhaustive iteration is trivial at the supported frame sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .events import (
    CartoEvent,
    SensorEvent,
    SpeedLimit,
    TruthAnnotation,
    VisionEvent,
    describe_payload,
    format_limit,
    payload_kind,
)
from .trace import Trace, TraceRow

MAX_FRAME_SIZE = 16
MASS_SUM_TOL = 1e-9
CONFLICT_TOL = 1e-12


class FrameError(ValueError):
    pass


class ConflictError(ArithmeticError):
    """Total conflict: the combined sources rule out every hypothesis."""


@dataclass(frozen=True)
class Frame:
    """Frame of discernment: the ordered candidate limits."""

    hypotheses: tuple[int, ...]

    def __post_init__(self):
        if not self.hypotheses:
            raise FrameError("frame must be non-empty")
        if len(set(self.hypotheses)) != len(self.hypotheses):
            raise FrameError("frame hypotheses must be distinct")
        if any(h is None for h in self.hypotheses):
            raise FrameError("frame may not contain the unknown limit")
        if len(self.hypotheses) > MAX_FRAME_SIZE:
            raise FrameError(
                f"frame limited to {MAX_FRAME_SIZE} hypotheses, got {len(self.hypotheses)}"
            )

    @property
    def size(self) -> int:
        return len(self.hypotheses)

    @property
    def full_mask(self) -> int:
        return (1 << self.size) - 1

    def singleton(self, hypothesis: int) -> int:
        try:
            return 1 << self.hypotheses.index(hypothesis)
        except ValueError:
            raise FrameError(f"hypothesis {hypothesis} not in frame {self.hypotheses}") from None


@dataclass(frozen=True)
class MassFunction:
    """Normalized basic belief assignment over bitmask-encoded subsets."""

    frame: Frame
    masses: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        total = 0.0
        for subset, weight in self.masses.items():
            if not 0 <= subset <= self.frame.full_mask:
                raise FrameError(f"subset {subset:#b} outside frame of size {self.frame.size}")
            if subset == 0 and weight != 0.0:
                raise FrameError("empty subset must carry zero mass")
            if weight < 0:
                raise FrameError(f"negative mass {weight} on subset {subset:#b}")
            total += weight
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise FrameError(f"masses must sum to 1, got {total!r}")

    def mass(self, subset: int) -> float:
        return self.masses.get(subset, 0.0)


@dataclass(frozen=True)
class ReliabilityModel:
    """Per-sensor trust fractions in (0, 1]."""

    vision_trust: float = 0.9
    carto_trust: float = 0.8

    def __post_init__(self):
        for name in ("vision_trust", "carto_trust"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")


def vacuous(frame: Frame) -> MassFunction:
    return MassFunction(frame, {frame.full_mask: 1.0})


def mass_from_reading(frame: Frame, reading: SpeedLimit, trust: float) -> MassFunction:
    """Simple-support mass: ``trust`` on the reading, remainder on the frame.

    An unknown reading contributes no evidence and yields the vacuous mass.
    """
    if reading is None:
        return vacuous(frame)
    singleton = frame.singleton(reading)
    if trust >= 1.0:
        return MassFunction(frame, {singleton: 1.0})
    return MassFunction(frame, {singleton: trust, frame.full_mask: 1.0 - trust})


def combine(a: MassFunction, b: MassFunction) -> MassFunction:
    """Dempster's rule: normalized product-intersection of two masses."""
    if a.frame != b.frame:
        raise FrameError(f"frame mismatch: {a.frame.hypotheses} vs {b.frame.hypotheses}")
    products: dict[int, float] = {}
    conflict = 0.0
    for sa, wa in sorted(a.masses.items()):
        for sb, wb in sorted(b.masses.items()):
            inter = sa & sb
            w = wa * wb
            if inter == 0:
                conflict += w
            else:
                products[inter] = products.get(inter, 0.0) + w
    if 1.0 - conflict <= CONFLICT_TOL:
        raise ConflictError(f"total conflict between sources (K={conflict!r})")
    scale = 1.0 / (1.0 - conflict)
    combined = {subset: w * scale for subset, w in sorted(products.items())}
    return MassFunction(a.frame, combined)


def plausibility(m: MassFunction, hypothesis: int) -> float:
    """Pl(h): total mass on subsets intersecting the singleton {h}."""
    singleton = m.frame.singleton(hypothesis)
    return sum(w for subset, w in m.masses.items() if subset & singleton)


def ds_decide(
    vision: SpeedLimit, carto: SpeedLimit, frame: Frame, rel: ReliabilityModel
) -> SpeedLimit:
    """Combine both sensor masses; return the maximum-plausibility limit.

    Ties break toward the lower limit (safety-conservative).
    """
    m = combine(
        mass_from_reading(frame, vision, rel.vision_trust),
        mass_from_reading(frame, carto, rel.carto_trust),
    )
    best = None
    best_pl = -1.0
    for h in sorted(frame.hypotheses):
        pl = plausibility(m, h)
        if pl > best_pl:
            best, best_pl = h, pl
    return best


def ds_run(events: list[SensorEvent], frame: Frame, rel: ReliabilityModel) -> Trace:
    """Replay an ordered event stream through the baseline.

    Holds the last-seen vision and carto readings and re-decides after every
    event. Lane changes and ground truth never touch the readings; the carto
    ambiguity flag and vision sub-signs are likewise invisible to this
    two-sensor model.
    """
    last_vision: SpeedLimit = None
    last_carto: SpeedLimit = None
    rows = []
    clock = 0
    for event in events:
        if event.t < clock:
            raise ValueError(f"event at t={event.t} arrived after clock {clock}")
        clock = event.t
        payload = event.payload
        if isinstance(payload, VisionEvent):
            last_vision = payload.limit
        elif isinstance(payload, CartoEvent):
            last_carto = payload.limit
        decision = ds_decide(last_vision, last_carto, frame, rel)
        rows.append(
            TraceRow(
                t=event.t,
                event_kind=payload_kind(payload),
                detail=describe_payload(payload),
                mode_before="ds",
                mode_after="ds",
                validated=format_limit(decision),
            )
        )
    return Trace(rows=tuple(rows))


def frame_for_events(events: list[SensorEvent]) -> Frame:
    """Frame spanning every numeric limit mentioned by a scenario's events.

    Falls back to a canonical set of common road limits when the scenario
    mentions none, so the baseline always has a non-empty frame to decide
    over.
    """
    limits = set()
    for event in events:
        payload = event.payload
        if isinstance(payload, (VisionEvent, CartoEvent, TruthAnnotation)):
            if payload.limit is not None:
                limits.add(payload.limit)
    if not limits:
        return Frame((30, 50, 70, 80, 90, 110, 130))
    return Frame(tuple(sorted(limits)))
