"""Hough-transform lane detection over synthetic gradient images.

Lines are parameterized as (rho, theta) with rho the signed normal distance
from the image center in pixels and theta in degrees in [0, 180); theta 0 is
a vertical line, so for near-vertical lane markings rho reads directly as a
vehicle-relative lateral position. Votes are magnitude-weighted and
quantized to integers, which keeps the accumulator exactly reproducible.

A bounded FIFO of per-frame nearest-marking lateral offsets feeds the
lane-change detector: a monotone zero-crossing of the offset with enough
total traversal means a marking passed under the vehicle center, i.e. the
vehicle changed lane. An offset moving from positive to negative is a
marking sweeping right-to-left, so the vehicle moved Right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .events import LaneChangeEvent, Side

DEFAULT_RHO_RES = 1.0
DEFAULT_THETA_RES = 1.0
DEFAULT_THRESHOLD = 30
DEFAULT_MEMORY_CAPACITY = 15
DEFAULT_MIN_SPAN = 20.0

# Only near-vertical lines qualify as lane markings; a forward-facing camera
# sees markings within this angle of vertical.
LANE_MAX_TILT_DEG = 30.0


class ParameterError(ValueError):
    pass


class GeometryError(ValueError):
    pass


class RasterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GradientImage:
    """Row-major grid of non-negative gradient magnitudes."""

    width: int
    height: int
    magnitudes: np.ndarray  # shape (height, width), float64

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        if self.magnitudes.shape != (self.height, self.width):
            raise ParameterError(
                f"magnitude grid shape {self.magnitudes.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if np.any(self.magnitudes < 0):
            raise ParameterError("gradient magnitudes must be non-negative")

    @classmethod
    def from_flat(cls, width: int, height: int, values: Sequence[float]) -> "GradientImage":
        if len(values) != width * height:
            raise ParameterError(
                f"expected {width * height} magnitudes, got {len(values)}"
            )
        grid = np.asarray(values, dtype=np.float64).reshape(height, width)
        return cls(width, height, grid)

    @classmethod
    def zeros(cls, width: int, height: int) -> "GradientImage":
        return cls(width, height, np.zeros((height, width), dtype=np.float64))


@dataclass(frozen=True)
class HoughLine:
    rho: float  # signed pixels from image center
    theta: float  # degrees in [0, 180)
    score: int  # accumulator votes

    def __post_init__(self):
        if self.score <= 0:
            raise ParameterError(f"line score must be positive, got {self.score}")
        if not 0 <= self.theta < 180:
            raise ParameterError(f"theta must be in [0, 180), got {self.theta}")


@dataclass(frozen=True)
class HoughAccumulator:
    """Vote grid plus the bin geometry needed to read (rho, theta) back out."""

    votes: np.ndarray  # shape (n_theta, n_rho), int64
    rho_res: float
    theta_res: float
    rho_offset: int  # bin index of rho == 0

    def rho_of(self, rho_idx: int) -> float:
        return (rho_idx - self.rho_offset) * self.rho_res

    def theta_of(self, theta_idx: int) -> float:
        return theta_idx * self.theta_res


def _quantize(values: np.ndarray) -> np.ndarray:
    # Round half up; np.round would round half to even, which is harder to
    # reproduce by hand.
    return np.floor(values + 0.5).astype(np.int64)


def hough_accumulator(
    img: GradientImage,
    rho_res: float = DEFAULT_RHO_RES,
    theta_res: float = DEFAULT_THETA_RES,
) -> HoughAccumulator:
    """Build the voting accumulator for an image.

    Every pixel with positive magnitude votes in every theta bin, in the one
    rho bin its center-relative normal distance falls into, with weight equal
    to its magnitude rounded to the nearest integer.
    """
    if rho_res <= 0 or theta_res <= 0:
        raise ParameterError(f"resolutions must be positive, got {rho_res}, {theta_res}")

    n_theta = int(math.ceil(180.0 / theta_res))
    max_rho = math.hypot(img.width / 2.0, img.height / 2.0)
    half_bins = int(math.ceil(max_rho / rho_res))
    n_rho = 2 * half_bins + 1

    votes = np.zeros((n_theta, n_rho), dtype=np.int64)
    ys, xs = np.nonzero(img.magnitudes)
    if len(xs) == 0:
        return HoughAccumulator(votes, rho_res, theta_res, half_bins)

    weights = _quantize(img.magnitudes[ys, xs])
    keep = weights > 0
    xs, ys, weights = xs[keep], ys[keep], weights[keep]
    if len(xs) == 0:
        return HoughAccumulator(votes, rho_res, theta_res, half_bins)

    cx = img.width / 2.0
    cy = img.height / 2.0
    dx = xs.astype(np.float64) - cx
    dy = ys.astype(np.float64) - cy
    for theta_idx in range(n_theta):
        theta = math.radians(theta_idx * theta_res)
        rho = dx * math.cos(theta) + dy * math.sin(theta)
        bins = _quantize(rho / rho_res) + half_bins
        np.add.at(votes[theta_idx], bins, weights)
    return HoughAccumulator(votes, rho_res, theta_res, half_bins)


def hough_transform(
    img: GradientImage,
    rho_res: float = DEFAULT_RHO_RES,
    theta_res: float = DEFAULT_THETA_RES,
    threshold: int = DEFAULT_THRESHOLD,
) -> list[HoughLine]:
    """Detect lines as local accumulator maxima with score >= threshold.

    A bin is a local maximum when no 8-neighbor in (theta, rho) beats it.
    Results are sorted by descending score, then (theta, rho) for
    determinism.
    """
    if threshold < 1:
        raise ParameterError(f"threshold must be >= 1, got {threshold}")
    acc = hough_accumulator(img, rho_res, theta_res)
    votes = acc.votes
    n_theta, n_rho = votes.shape

    candidates = np.argwhere(votes >= threshold)
    lines = []
    for theta_idx, rho_idx in candidates:
        score = votes[theta_idx, rho_idx]
        t0, t1 = max(theta_idx - 1, 0), min(theta_idx + 2, n_theta)
        r0, r1 = max(rho_idx - 1, 0), min(rho_idx + 2, n_rho)
        if votes[t0:t1, r0:r1].max() > score:
            continue
        lines.append(
            HoughLine(
                rho=acc.rho_of(int(rho_idx)),
                theta=acc.theta_of(int(theta_idx)),
                score=int(score),
            )
        )
    lines.sort(key=lambda ln: (-ln.score, ln.theta, ln.rho))
    return lines


@dataclass(frozen=True)
class LaneMemory:
    """Bounded FIFO of per-frame nearest-marking lateral offsets.

    An entry of None marks a frame where no qualifying marking was seen.
    """

    window: tuple[Optional[float], ...] = ()
    capacity: int = DEFAULT_MEMORY_CAPACITY

    def __post_init__(self):
        if self.capacity < 1:
            raise ParameterError(f"capacity must be >= 1, got {self.capacity}")
        if len(self.window) > self.capacity:
            raise ParameterError("window longer than capacity")

    @property
    def latest(self) -> Optional[float]:
        return self.window[-1] if self.window else None


def push_offset(memory: LaneMemory, offset: Optional[float]) -> LaneMemory:
    window = memory.window + (offset,)
    if len(window) > memory.capacity:
        window = window[-memory.capacity:]
    return LaneMemory(window=window, capacity=memory.capacity)


def nearest_lane_offset(lines: Iterable[HoughLine], image_height: int) -> Optional[float]:
    """Lateral offset at the bottom image row of the marking nearest center.

    Only lines within LANE_MAX_TILT_DEG of vertical qualify; returns None
    when no line qualifies.
    """
    bottom = (image_height - 1) - image_height / 2.0
    best = None
    for line in lines:
        tilt = min(line.theta, 180.0 - line.theta)
        if tilt > LANE_MAX_TILT_DEG:
            continue
        theta = math.radians(line.theta)
        # Solve (x - cx)cos(theta) + (y - cy)sin(theta) = rho at the bottom row.
        offset = (line.rho - bottom * math.sin(theta)) / math.cos(theta)
        if best is None or abs(offset) < abs(best):
            best = offset
    return best


def update_memory(
    memory: LaneMemory, lines: Iterable[HoughLine], image_height: int
) -> LaneMemory:
    """Push the current frame's nearest-marking offset (or a missing marker)."""
    return push_offset(memory, nearest_lane_offset(lines, image_height))


def detect_lane_change(memory: LaneMemory, min_span: float = DEFAULT_MIN_SPAN) -> Optional[LaneChangeEvent]:
    """Detect a completed monotone zero-crossing of the offset window.

    Fires when the newest offset sits clearly on one side (outside the
    +-min_span/4 dead band), the window holds a clear sample on the opposite
    side, the samples between passed through the dead band monotonically, and
    the total traversal is at least min_span. The dead band both suppresses
    jitter around zero and rejects sign flips caused by the nearest marking
    jumping to a different marking without passing under the vehicle.
    """
    if min_span <= 0:
        raise ParameterError(f"min_span must be positive, got {min_span}")
    vals = [v for v in memory.window if v is not None]
    if len(vals) < 2:
        return None
    band = min_span / 4.0

    newest = vals[-1]
    if abs(newest) <= band:
        return None
    new_side = 1.0 if newest > 0 else -1.0

    # Last sample clearly on the old side.
    start = None
    for i in range(len(vals) - 2, -1, -1):
        if vals[i] * new_side < 0 and abs(vals[i]) > band:
            start = i
            break
    if start is None:
        return None

    # Between the old-side anchor and the newest sample the offset must move
    # monotonically toward the new side, and the hand-off across zero must
    # pass through the dead band (no inter-marking jumps).
    crossed_inside_band = False
    for i in range(start, len(vals) - 1):
        a, b = vals[i], vals[i + 1]
        if (b - a) * new_side < 0:
            return None
        if abs(a) <= band or abs(b) <= band:
            crossed_inside_band = True
    if not crossed_inside_band:
        return None

    # Extend backward over the monotone approach to measure full traversal.
    first = start
    while first > 0 and (vals[first - 1] - vals[first]) * new_side <= 0:
        first -= 1
    traversal = abs(newest - vals[first])
    if traversal < min_span:
        return None

    direction = Side.RIGHT if new_side < 0 else Side.LEFT
    return LaneChangeEvent(direction=direction)


def track_offsets(
    offsets: Iterable[Optional[float]],
    capacity: int = DEFAULT_MEMORY_CAPACITY,
    min_span: float = DEFAULT_MIN_SPAN,
) -> list[tuple[int, LaneChangeEvent]]:
    """Run the detector over an offset stream, one push per frame.

    Emits at most one event per zero-crossing: after an emission the window
    is cleared, so the same crossing cannot fire again as it slides through.
    Returns (frame index, event) pairs.
    """
    memory = LaneMemory(capacity=capacity)
    events = []
    for idx, offset in enumerate(offsets):
        memory = push_offset(memory, offset)
        event = detect_lane_change(memory, min_span)
        if event is not None:
            events.append((idx, event))
            memory = LaneMemory(capacity=capacity)
    return events


def track_frames(
    frames: Iterable[GradientImage],
    rho_res: float = DEFAULT_RHO_RES,
    theta_res: float = DEFAULT_THETA_RES,
    threshold: int = DEFAULT_THRESHOLD,
    capacity: int = DEFAULT_MEMORY_CAPACITY,
    min_span: float = DEFAULT_MIN_SPAN,
) -> tuple[list[Optional[float]], list[tuple[int, LaneChangeEvent]]]:
    """Full pipeline: Hough per frame, offset memory, change detection.

    Returns the per-frame offsets and the emitted (frame index, event) pairs.
    """
    offsets = []
    for img in frames:
        lines = hough_transform(img, rho_res, theta_res, threshold)
        offsets.append(nearest_lane_offset(lines, img.height))
    return offsets, track_offsets(offsets, capacity, min_span)


def render_synthetic_road(
    width: int, height: int, markings: Sequence[tuple[float, float]]
) -> GradientImage:
    """Render lane markings as unit-magnitude lines from top row to bottom.

    Each marking is (column at top row, column at bottom row); intermediate
    rows interpolate linearly. Deterministic for a given geometry.
    """
    grid = np.zeros((height, width), dtype=np.float64)
    for x_top, x_bottom in markings:
        for y in range(height):
            frac = y / (height - 1) if height > 1 else 0.0
            x = x_top + (x_bottom - x_top) * frac
            col = int(math.floor(x + 0.5))
            if not 0 <= col < width:
                raise GeometryError(
                    f"marking ({x_top}, {x_bottom}) leaves the {width}x{height} image at row {y}"
                )
            grid[y, col] = 1.0
    return GradientImage(width, height, grid)


def render_line_image(width: int, height: int, rho: float, theta: float) -> GradientImage:
    """Render one unit-magnitude line given center-relative (rho, theta).

    Rasterizes along the dominant axis; pixels falling outside the image are
    skipped, so lines may be partially visible.
    """
    if not 0 <= theta < 180:
        raise GeometryError(f"theta must be in [0, 180), got {theta}")
    grid = np.zeros((height, width), dtype=np.float64)
    cx, cy = width / 2.0, height / 2.0
    rad = math.radians(theta)
    cos_t, sin_t = math.cos(rad), math.sin(rad)
    drawn = False
    if abs(cos_t) >= abs(sin_t):
        for y in range(height):
            x = cx + (rho - (y - cy) * sin_t) / cos_t
            col = int(math.floor(x + 0.5))
            if 0 <= col < width:
                grid[y, col] = 1.0
                drawn = True
    else:
        for x in range(width):
            y = cy + (rho - (x - cx) * cos_t) / sin_t
            row = int(math.floor(y + 0.5))
            if 0 <= row < height:
                grid[row, x] = 1.0
                drawn = True
    if not drawn:
        raise GeometryError(f"line (rho={rho}, theta={theta}) misses the image entirely")
    return GradientImage(width, height, grid)


def write_raster_sequence(frames: Sequence[GradientImage]) -> str:
    """Serialize frames in the plain-text raster format.

    Header line "width height frames", then height rows of width integer
    magnitudes per frame. LF endings.
    """
    if not frames:
        raise RasterError("cannot serialize an empty frame sequence")
    width, height = frames[0].width, frames[0].height
    lines = [f"{width} {height} {len(frames)}"]
    for img in frames:
        if img.width != width or img.height != height:
            raise RasterError("all frames must share the same dimensions")
        quantized = _quantize(img.magnitudes)
        for y in range(height):
            lines.append(" ".join(str(int(v)) for v in quantized[y]))
    return "\n".join(lines) + "\n"


def read_raster_sequence(text: str) -> list[GradientImage]:
    """Parse the plain-text raster format; blank lines are ignored."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise RasterError("empty raster file")
    header = lines[0].split()
    if len(header) != 3:
        raise RasterError(f"malformed header {lines[0]!r}: expected 'width height frames'")
    try:
        width, height, n_frames = (int(h) for h in header)
    except ValueError:
        raise RasterError(f"malformed header {lines[0]!r}: non-integer field") from None
    if width < 1 or height < 1 or n_frames < 1:
        raise RasterError(f"header values must be >= 1, got {lines[0]!r}")
    expected = 1 + n_frames * height
    if len(lines) != expected:
        raise RasterError(
            f"expected {expected - 1} data rows for {n_frames} frames, got {len(lines) - 1}"
        )
    frames = []
    row_iter = iter(lines[1:])
    for _ in range(n_frames):
        grid = np.zeros((height, width), dtype=np.float64)
        for y in range(height):
            row = next(row_iter)
            parts = row.split()
            if len(parts) != width:
                raise RasterError(f"row {row!r} has {len(parts)} values, expected {width}")
            try:
                grid[y] = [float(int(p)) for p in parts]
            except ValueError:
                raise RasterError(f"non-integer magnitude in row {row!r}") from None
        frames.append(GradientImage(width, height, grid))
    return frames
