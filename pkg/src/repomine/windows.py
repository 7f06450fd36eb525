"""Calendar windows over a project history."""

from __future__ import annotations

import bisect
import calendar
import math
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Optional, Sequence, Union

MONTHS = "months"
WEEKS = "weeks"
DAYS = "days"
UNITS = (MONTHS, WEEKS, DAYS)

WINDOWS_HEADER = ("index", "start_iso8601", "end_iso8601")


@dataclass(frozen=True)
class Span:
    amount: float
    unit: str

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unknown window unit {self.unit!r}")
        if self.amount <= 0:
            raise ValueError("window length must be positive")

    def __str__(self) -> str:
        amount = int(self.amount) if float(self.amount).is_integer() else self.amount
        return f"{amount}{self.unit[0].upper()}"

    def scaled(self, k: float) -> "Span":
        return Span(self.amount * k, self.unit)


_SPAN_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([A-Za-z]+)\s*$")
_UNIT_ALIASES = {"m": MONTHS, "month": MONTHS, "months": MONTHS,
                 "w": WEEKS, "week": WEEKS, "weeks": WEEKS,
                 "d": DAYS, "day": DAYS, "days": DAYS}


def parse_span(spec: Union[str, Span]) -> Span:
    """Parse "3M", "1.5 months", "2W" or "14d"."""
    if isinstance(spec, Span):
        return spec
    m = _SPAN_RE.match(str(spec))
    unit = _UNIT_ALIASES.get(m.group(2).lower()) if m else None
    if unit is None:
        raise ValueError(f"cannot parse window length {spec!r}")
    return Span(float(m.group(1)), unit)


@dataclass(frozen=True)
class TimeWindow:
    index: int
    start: int
    end: int
    length_spec: Span
    partial: bool = False

    def contains(self, t: int) -> bool:
        return self.start <= t < self.end

    def row(self) -> tuple:
        return (self.index, iso(self.start), iso(self.end))


def iso(t: int) -> str:
    return datetime.fromtimestamp(t, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def to_epoch(value: Union[int, float, str, datetime]) -> int:
    if isinstance(value, datetime):
        if value.tzinfo is None:
            value = value.replace(tzinfo=timezone.utc)
        return int(value.timestamp())
    if isinstance(value, str):
        return to_epoch(datetime.fromisoformat(value.replace("Z", "+00:00")))
    return int(value)


def add_span(t: int, span: Span) -> int:
    """Shift epoch seconds by a span; months use calendar arithmetic with day clamping.

    A fractional month is that fraction of the month reached after the whole
    months were added.
    """
    if span.unit == WEEKS:
        return t + round(span.amount * 7 * 86400)
    if span.unit == DAYS:
        return t + round(span.amount * 86400)
    dt = datetime.fromtimestamp(t, timezone.utc)
    whole = math.floor(span.amount)
    frac = span.amount - whole
    month0 = dt.month - 1 + whole
    year, month = dt.year + month0 // 12, month0 % 12 + 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    shifted = dt.replace(year=year, month=month, day=day)
    if frac:
        shifted += timedelta(days=frac * calendar.monthrange(year, month)[1])
    return round(shifted.timestamp())


def subtract_span(t: int, span: Span) -> int:
    """Inverse of :func:`add_span` for whole months; fractions use the month reached."""
    if span.unit != MONTHS:
        return t - (add_span(t, span) - t)
    dt = datetime.fromtimestamp(t, timezone.utc)
    whole = math.floor(span.amount)
    month0 = dt.month - 1 - whole
    year, month = dt.year + month0 // 12, month0 % 12 + 1
    day = min(dt.day, calendar.monthrange(year, month)[1])
    shifted = dt.replace(year=year, month=month, day=day)
    frac = span.amount - whole
    if frac:
        shifted -= timedelta(days=frac * calendar.monthrange(year, month)[1])
    return round(shifted.timestamp())


def split_windows(start, end, length_spec, overlap_step=None) -> list[TimeWindow]:
    """Windows from ``start`` until ``end``; each start is origin + k·step.

    The last window is clipped to ``end`` and flagged partial when it does
    not fit completely.
    """
    start, end = to_epoch(start), to_epoch(end)
    if end <= start:
        raise ValueError("window range end must be after its start")
    length = parse_span(length_spec)
    step = length if overlap_step is None else parse_span(overlap_step)
    if step.unit != length.unit:
        raise ValueError("overlap step must use the window length's unit")
    if step.amount > length.amount:
        raise ValueError("overlap step must not exceed the window length")
    windows = []
    k = 0
    while True:
        w_start = add_span(start, step.scaled(k)) if k else start
        if w_start >= end:
            break
        w_end = add_span(start, Span(step.amount * k + length.amount, length.unit))
        partial = w_end > end
        windows.append(TimeWindow(k, w_start, min(w_end, end), length, partial))
        k += 1
    return windows


def assign(fact_time: int, windows: Sequence[TimeWindow]) -> list[int]:
    """Indices of every window containing ``fact_time`` (half-open)."""
    return WindowIndex(windows)(fact_time)


def _overlapping(windows: Sequence[TimeWindow]) -> bool:
    return any(a.end > b.start for a, b in zip(windows, windows[1:]))


class WindowIndex:
    """Repeated assignment against a fixed window list."""

    def __init__(self, windows: Sequence[TimeWindow]):
        self.windows = list(windows)
        self._starts = [w.start for w in self.windows]
        self._overlap = _overlapping(self.windows)

    def __call__(self, t: int) -> list[int]:
        k = bisect.bisect_right(self._starts, t)
        if not self._overlap:
            return [k - 1] if k and self.windows[k - 1].contains(t) else []
        return sorted(w.index for w in self.windows[:k] if w.contains(t))


def history_windows(times: Sequence[int], length_spec, overlap_step=None,
                    origin: Optional[int] = None, until: Optional[int] = None) -> list[TimeWindow]:
    """Windows covering a fact series, anchored at its earliest time by default."""
    if not times:
        return []
    first = min(times) if origin is None else to_epoch(origin)
    last = (max(times) + 1) if until is None else to_epoch(until)
    if last <= first:
        last = first + 1
    return split_windows(first, last, length_spec, overlap_step)
