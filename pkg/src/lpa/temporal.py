"""Posting-rate profiles, burst flags and the Activemap treemap."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timezone
from typing import Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import InputError, ProfileError
from .ingest import EntityDocument


@dataclass(frozen=True)
class ActivityProfile:
    entity_id: str
    daily_counts: dict[date, int] = field(default_factory=dict)

    @property
    def active_days(self) -> int:
        return sum(1 for c in self.daily_counts.values() if c >= 1)

    @property
    def max_posts_per_day(self) -> int:
        return max(self.daily_counts.values(), default=0)

    @property
    def total_posts(self) -> int:
        return sum(self.daily_counts.values())

    @property
    def span_days(self) -> int:
        """Calendar days from the first to the last active day, both included."""
        if not self.daily_counts:
            return 0
        days = sorted(self.daily_counts)
        return (days[-1] - days[0]).days + 1


def activity_profile(docs: Sequence[EntityDocument], entity_id: str | None = None) -> ActivityProfile:
    """Posts per UTC calendar day; days without posts are left out."""
    ids = {d.entity_id for d in docs}
    if len(ids) > 1:
        raise ProfileError(f"documents belong to {len(ids)} entities; a profile covers one")
    eid = next(iter(ids)) if ids else (entity_id or "")
    if entity_id is not None and ids and entity_id != eid:
        raise ProfileError(f"documents belong to {eid!r}, not {entity_id!r}")
    counts: dict[date, int] = {}
    for d in docs:
        if d.timestamp is None:
            raise ProfileError(f"document {d.entity_id}/{d.doc_id} has no timestamp")
        day = d.timestamp.astimezone(timezone.utc).date()
        counts[day] = counts.get(day, 0) + 1
    return ActivityProfile(eid, dict(sorted(counts.items())))


def activity_profiles(docs: Iterable[EntityDocument]) -> list[ActivityProfile]:
    """One profile per entity, ordered by entity id."""
    grouped: dict[str, list[EntityDocument]] = {}
    for d in docs:
        grouped.setdefault(d.entity_id, []).append(d)
    return [activity_profile(grouped[e]) for e in sorted(grouped)]


@dataclass(frozen=True)
class BurstFlags:
    extreme_peak: bool
    metronomic: bool


def flag_bursts(profile: ActivityProfile, peak_threshold: int = 50, consistency_fraction: float = 0.95,
                min_span_days: int = 7, max_variance: float = 0.5) -> BurstFlags:
    """Flag implausible posting rates.

    ``metronomic`` needs posts on at least ``consistency_fraction`` of the
    calendar days between the first and last post, a daily-count variance
    (zero days included) below ``max_variance``, and a span of at least
    ``min_span_days`` so that a couple of posts cannot qualify.
    """
    if peak_threshold < 1 or not 0 < consistency_fraction <= 1 or min_span_days < 1:
        raise InputError("burst thresholds must be positive")
    peak = profile.max_posts_per_day >= peak_threshold
    span = profile.span_days
    if span < min_span_days:
        return BurstFlags(peak, False)
    series = np.zeros(span)
    first = min(profile.daily_counts)
    for day, c in profile.daily_counts.items():
        series[(day - first).days] = c
    steady = profile.active_days >= consistency_fraction * span and float(series.var()) < max_variance
    return BurstFlags(peak, bool(steady))


# -- treemap layout ---------------------------------------------------------

Rect = tuple[float, float, float, float]  # x, y, width, height


def _worst(row: Sequence[float], side: float) -> float:
    s = sum(row)
    return max(max(side * side * r / (s * s), (s * s) / (side * side * r)) for r in row)


def squarify(values: Sequence[float], rect: Rect) -> list[Rect]:
    """Squarified treemap of positive ``values`` (in the given order) filling ``rect``.

    Rows are laid along the shorter side, starting at the top-left corner,
    and a row is closed as soon as adding the next value would worsen its
    worst aspect ratio.
    """
    if any(v <= 0 for v in values):
        raise InputError("treemap values must be positive")
    x, y, w, h = rect
    if not values:
        return []
    scale = w * h / float(sum(values))
    areas = [v * scale for v in values]
    out: list[Rect] = []
    i = 0
    while i < len(areas):
        side = min(w, h)
        row = [areas[i]]
        j = i + 1
        while j < len(areas) and _worst(row + [areas[j]], side) <= _worst(row, side):
            row.append(areas[j])
            j += 1
        s = sum(row)
        if w >= h:
            # column on the left edge
            cw = s / h if h else 0.0
            cy = y
            for a in row:
                ch = a / cw if cw else 0.0
                out.append((x, cy, cw, ch))
                cy += ch
            x, w = x + cw, w - cw
        else:
            # row along the top edge
            rh = s / w if w else 0.0
            cx = x
            for a in row:
                cw = a / rh if rh else 0.0
                out.append((cx, y, cw, rh))
                cx += cw
            y, h = y + rh, h - rh
        i = j
    return out


def _shrink(r: Rect, pad: float) -> Rect:
    x, y, w, h = r
    pad = min(pad, w / 2, h / 2)
    return (x + pad, y + pad, w - 2 * pad, h - 2 * pad)


def _gray(count: int, lo: int, hi: int) -> str:
    # light gray for the smallest qualifying count, near black for the largest
    t = 1.0 if hi == lo else (count - lo) / (hi - lo)
    level = int(round(215 - t * 195))
    return f"#{level:02x}{level:02x}{level:02x}"


def _f(v: float) -> str:
    return f"{v:.2f}"


def activemap_svg(profiles: Sequence[ActivityProfile], min_posts_day: int = 5, width: int = 1600,
                  height: int = 900, entity_border: float = 4.0, day_border: float = 0.75) -> str:
    """Static Activemap: one branch per entity, one leaf per day with at least ``min_posts_day`` posts.

    Leaf area and darkness both grow with the day's count. Entities are
    ordered by active days (descending, then id) from the top-left, and
    days within an entity by count (descending, then date).
    """
    if min_posts_day < 1:
        raise InputError("min_posts_day must be >= 1")
    if width <= 0 or height <= 0:
        raise InputError("canvas size must be positive")
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    lines = [head, f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>']
    branches = []
    for p in profiles:
        days = sorted(((d, c) for d, c in p.daily_counts.items() if c >= min_posts_day), key=lambda t: (-t[1], t[0]))
        if days:
            branches.append((p, days))
    if not branches:
        lines.append(f'<text x="{width / 2:.0f}" y="{height / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="20" fill="#555555">no day with at least {min_posts_day} posts</text>')
        lines.append("</svg>")
        return "\n".join(lines) + "\n"
    branches.sort(key=lambda b: (-b[0].active_days, b[0].entity_id))
    counts = [c for _, days in branches for _, c in days]
    lo, hi = min(counts), max(counts)
    outer = squarify([sum(c for _, c in days) for _, days in branches], (0.0, 0.0, float(width), float(height)))
    for (profile, days), box in zip(branches, outer):
        eid = quoteattr(profile.entity_id)
        lines.append(f"<g data-entity={eid}>")
        inner = _shrink(box, entity_border / 2)
        for (day, c), leaf in zip(days, squarify([c for _, c in days], inner)):
            x, y, w, h = leaf
            lines.append(f'<rect data-entity={eid} data-day="{day.isoformat()}" data-count="{c}" '
                         f'x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{_gray(c, lo, hi)}" '
                         f'stroke="#ffffff" stroke-width="{_f(day_border)}"/>')
        x, y, w, h = box
        lines.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="none" '
                     f'stroke="#ffffff" stroke-width="{_f(entity_border)}"/>')
        if w > 80 and h > 24:
            lines.append(f'<text x="{_f(x + 6)}" y="{_f(y + 16)}" font-family="sans-serif" font-size="12" '
                         f'fill="#d62728">{escape(profile.entity_id)}</text>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
