"""Per-event engine-output traces and their golden-file CSV serialization."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class TraceRow:
    t: int
    event_kind: str
    detail: str
    mode_before: str
    mode_after: str
    validated: str


@dataclass(frozen=True)
class Trace:
    """Row-per-event log of an engine run; rows are in non-decreasing t."""

    rows: tuple[TraceRow, ...] = field(default_factory=tuple)


CSV_HEADER = "t_ms,event,detail,mode_before,mode_after,validated"


def write_trace(trace: Trace) -> str:
    """Render a trace as CSV with LF line endings.

    The format is bit-exact by construction: no locale-dependent formatting,
    no quoting (detail fields never contain commas), one trailing newline.
    """
    lines = [CSV_HEADER]
    for row in trace.rows:
        lines.append(
            f"{row.t},{row.event_kind},{row.detail},"
            f"{row.mode_before},{row.mode_after},{row.validated}"
        )
    return "\n".join(lines) + "\n"
