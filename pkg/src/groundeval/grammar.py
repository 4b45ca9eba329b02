"""Tagged coordinate grammar: parsing and canonical emission.

Grounded model outputs carry spatial targets inside XML-ish tags, e.g.::

    <affordance> <frame 3>: handle; (450, 320) </affordance>
    <trajectory> (100, 200), (300, 400), (500, 600) </trajectory>

Five kinds exist (object, area, affordance, trajectory, grasp pose).
Coordinates are integers on a 1001-bin grid: unit image coordinates
quantized to [0, 1000].
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

COORD_MIN = 0
COORD_MAX = 1000

TRAJECTORY_MIN_POINTS = 2
TRAJECTORY_MAX_POINTS = 10
OBJECT_POINTS = 2
GRASP_POINTS = 4


class SpanError(ValueError):
    """Base for everything this module raises."""


class InvariantViolation(SpanError):
    """A GroundedSpan breaks a structural rule (emit-side umbrella)."""


class CardinalityViolation(InvariantViolation):
    pass


class CoordinateOutOfRange(InvariantViolation):
    pass


class MalformedFrame(InvariantViolation):
    pass


class ParseError(SpanError):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class UnclosedTag(ParseError):
    pass


class MalformedSpan(ParseError):
    """Body text that fits no production (junk before coords, bad pair syntax)."""


class OutOfRange(SpanError):
    """quantize/dequantize input outside the legal domain."""


class GroundingKind(enum.Enum):
    OBJECT = "object"
    AREA = "area"
    AFFORDANCE = "affordance"
    TRAJECTORY = "trajectory"
    GRASP_POSE = "grasp pose"

    @property
    def tag(self) -> str:
        return self.value

    @classmethod
    def from_tag(cls, tag: str) -> "GroundingKind":
        for kind in cls:
            if kind.value == tag:
                return kind
        raise ValueError(f"unknown tag {tag!r}")


def _check_cardinality(kind: GroundingKind, n: int, framed: bool) -> str | None:
    # Returns a complaint string, or None when the count is legal.
    if kind is GroundingKind.OBJECT and n != OBJECT_POINTS:
        return f"object span needs exactly {OBJECT_POINTS} corner pairs, got {n}"
    if kind is GroundingKind.AREA and n < 1:
        return "area span needs at least 1 point"
    if kind is GroundingKind.AFFORDANCE:
        if framed and n != 1:
            return f"framed affordance span needs exactly 1 point, got {n}"
        if not framed and n < 1:
            return "affordance span needs at least 1 point"
    if kind is GroundingKind.TRAJECTORY and not (
        TRAJECTORY_MIN_POINTS <= n <= TRAJECTORY_MAX_POINTS
    ):
        return (
            f"trajectory span needs {TRAJECTORY_MIN_POINTS}-{TRAJECTORY_MAX_POINTS}"
            f" points, got {n}"
        )
    if kind is GroundingKind.GRASP_POSE and n != GRASP_POINTS:
        return f"grasp pose span needs exactly {GRASP_POINTS} corner pairs, got {n}"
    return None


@dataclass(frozen=True)
class GroundedSpan:
    """One tagged region: kind, optional frame/label, integer coordinates.

    source_range holds char offsets into the parsed text and is excluded
    from equality so parse(emit(s)).spans == [s] holds.
    """

    kind: GroundingKind
    coords: tuple[tuple[int, int], ...]
    frame: int | None = None
    label: str | None = None
    source_range: tuple[int, int] | None = field(default=None, compare=False)

    def validate(self) -> None:
        if self.frame is not None:
            if not isinstance(self.frame, int) or isinstance(self.frame, bool) or self.frame < 0:
                raise MalformedFrame(f"frame must be a non-negative integer, got {self.frame!r}")
        if self.label is not None:
            if (
                not self.label
                or self.label != self.label.strip()
                or "(" in self.label
                or "<" in self.label
            ):
                raise InvariantViolation(f"label {self.label!r} cannot round-trip")
        for pair in self.coords:
            for c in pair:
                if not isinstance(c, int) or isinstance(c, bool):
                    raise CoordinateOutOfRange(f"coordinate {c!r} is not an integer")
                if not (COORD_MIN <= c <= COORD_MAX):
                    raise CoordinateOutOfRange(
                        f"coordinate {c} outside [{COORD_MIN}, {COORD_MAX}]"
                    )
        complaint = _check_cardinality(self.kind, len(self.coords), self.frame is not None)
        if complaint:
            raise CardinalityViolation(complaint)


@dataclass(frozen=True)
class ParseReport:
    spans: tuple[GroundedSpan, ...]
    residual_text: str
    diagnostics: tuple[tuple[int, str], ...]


_OPEN_TAG = re.compile(r"<(object|area|affordance|trajectory|grasp pose)>")
_FRAME_OK = re.compile(r"<frame\s+(\d+)\s*>\s*:")
_FRAME_ANY = re.compile(r"<frame\b[^>]*>\s*:?")
_PAIR = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")


def _parse_body(
    body: str, kind: GroundingKind, base: int, strict: bool, diagnostics: list
) -> tuple[int | None, str | None, tuple[tuple[int, int], ...]]:
    """Parse the text between the opening and closing tags.

    Raises on anything malformed; out-of-range coordinates are the one
    recoverable defect (clamped + diagnostic when strict is off).
    """
    frame = None
    rest = body.lstrip()
    off = base + (len(body) - len(rest))
    if rest.startswith("<frame"):
        m = _FRAME_OK.match(rest)
        if not m:
            bad = _FRAME_ANY.match(rest)
            shown = bad.group(0) if bad else rest.split(">", 1)[0] + ">"
            raise MalformedFrame(f"malformed frame marker {shown!r}")
        frame = int(m.group(1))
        rest = rest[m.end():]

    paren = rest.find("(")
    if paren < 0:
        prefix, pairs_text = rest, ""
    else:
        prefix, pairs_text = rest[:paren], rest[paren:]

    label = None
    if prefix.strip():
        semi = prefix.rfind(";")
        if semi < 0:
            raise MalformedSpan(f"text before coordinates lacks a ';': {prefix.strip()!r}", off)
        if prefix[semi + 1:].strip():
            raise MalformedSpan(
                f"unexpected text between ';' and '(': {prefix[semi + 1:].strip()!r}", off
            )
        label = prefix[:semi].strip() or None

    coords: list[tuple[int, int]] = []
    pos = 0
    n = len(pairs_text)
    while pos < n:
        m = _PAIR.match(pairs_text, pos)
        if not m:
            raise MalformedSpan(f"bad coordinate syntax near {pairs_text[pos:pos + 20]!r}", off)
        x, y = int(m.group(1)), int(m.group(2))
        cx = min(max(x, COORD_MIN), COORD_MAX)
        cy = min(max(y, COORD_MIN), COORD_MAX)
        if (cx, cy) != (x, y):
            if strict:
                raise CoordinateOutOfRange(
                    f"coordinate ({x}, {y}) outside [{COORD_MIN}, {COORD_MAX}]"
                )
            diagnostics.append((base, f"clamped out-of-range coordinate ({x}, {y})"))
        coords.append((cx, cy))
        pos = m.end()
        while pos < n and pairs_text[pos].isspace():
            pos += 1
        if pos < n:
            if pairs_text[pos] != ",":
                raise MalformedSpan(f"expected ',' between pairs near {pairs_text[pos:pos + 20]!r}", off)
            pos += 1
            while pos < n and pairs_text[pos].isspace():
                pos += 1
            if pos >= n:
                raise MalformedSpan("trailing ',' after last pair", off)

    complaint = _check_cardinality(kind, len(coords), frame is not None)
    if complaint:
        raise CardinalityViolation(complaint)
    return frame, label, tuple(coords)


def parse_spans(text: str, strict: bool = False) -> ParseReport:
    """Extract every grounded span from free text.

    strict=True raises on the first defect; otherwise malformed regions are
    skipped with a diagnostic (out-of-range coordinates are clamped instead,
    also with a diagnostic) and scanning resumes just past the opening tag so
    later or nested well-formed spans still surface.
    """
    spans: list[GroundedSpan] = []
    diagnostics: list[tuple[int, str]] = []
    covered: list[tuple[int, int]] = []
    pos = 0
    while True:
        m = _OPEN_TAG.search(text, pos)
        if not m:
            break
        tag = m.group(1)
        kind = GroundingKind.from_tag(tag)
        closing = f"</{tag}>"
        close_at = text.find(closing, m.end())
        if close_at < 0:
            if strict:
                raise UnclosedTag(f"<{tag}> at offset {m.start()} is never closed", m.start())
            diagnostics.append((m.start(), f"unclosed <{tag}> tag"))
            pos = m.end()
            continue
        body = text[m.end():close_at]
        try:
            frame, label, coords = _parse_body(body, kind, m.end(), strict, diagnostics)
        except (ParseError, InvariantViolation) as exc:
            if strict:
                raise
            diagnostics.append((m.start(), f"skipped malformed <{tag}> span: {exc}"))
            pos = m.end()
            continue
        end = close_at + len(closing)
        spans.append(
            GroundedSpan(
                kind=kind,
                coords=coords,
                frame=frame,
                label=label,
                source_range=(m.start(), end),
            )
        )
        covered.append((m.start(), end))
        pos = end

    residual_parts = []
    prev = 0
    for start, end in covered:
        residual_parts.append(text[prev:start])
        prev = end
    residual_parts.append(text[prev:])
    return ParseReport(
        spans=tuple(spans),
        residual_text="".join(residual_parts),
        diagnostics=tuple(diagnostics),
    )


def emit_span(span: GroundedSpan) -> str:
    """Canonical single-space form, e.g. '<area> <frame 1>: (10, 10) </area>'."""
    span.validate()
    parts = [f"<{span.kind.tag}>"]
    if span.frame is not None:
        parts.append(f"<frame {span.frame}>:")
    if span.label is not None:
        parts.append(f"{span.label};")
    parts.append(", ".join(f"({x}, {y})" for x, y in span.coords))
    parts.append(f"</{span.kind.tag}>")
    return " ".join(parts)


def quantize(x: float) -> int:
    # Round half away from zero; banker's rounding would send 0.0005 to 0.
    if not (0.0 <= x <= 1.0):
        raise OutOfRange(f"expected a unit-interval coordinate, got {x!r}")
    return int(math.floor(x * 1000.0 + 0.5))


def dequantize(k: int) -> float:
    if not isinstance(k, int) or isinstance(k, bool) or not (COORD_MIN <= k <= COORD_MAX):
        raise OutOfRange(f"expected an integer in [{COORD_MIN}, {COORD_MAX}], got {k!r}")
    return k / 1000.0
