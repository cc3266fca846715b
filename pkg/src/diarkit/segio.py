"""Domain types and I/O for time-stamped speaker segments and transcripts.

Three immutable value types (`Segment`, `Annotation`, `Transcript`) plus
parsers/writers for NIST RTTM and the toolkit's JSON schemas:

* segments JSON: ``{"recording_id": str, "segments": [{"start", "end", "speaker"}, ...]}``
* transcript JSON: ``{"recording_id": str, "entries": [{"start", "end", "text"}, ...]}``

All parsers are pure functions of their input text: every input either
yields a value or raises :class:`ParseError` with a location.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import IO, Iterable, Union

RTTM_TIME_DECIMALS = 3
JSON_TIME_DECIMALS = 6

TextSource = Union[str, IO[str]]


class ParseError(ValueError):
    """Input violates the RTTM or JSON segment/transcript schema.

    ``line`` is set for line-oriented formats, ``path`` (e.g. ``segments[3]``)
    for JSON documents.
    """

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        if line is not None:
            message = f"line {line}: {message}"
        elif path:
            message = f"{path}: {message}"
        super().__init__(message)


class SkippedLinesWarning(UserWarning):
    """A line-oriented parser skipped records of an unknown type."""


def _check_label(value: str, what: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValueError(f"{what} must be a non-empty string")
    if any(ch.isspace() for ch in value):
        raise ValueError(f"{what} must not contain whitespace: {value!r}")
    return value


@dataclass(frozen=True, order=True)
class Segment:
    """A labeled time interval on an audio timeline, in seconds.

    Invariants: ``0 <= start < end``, finite times, and a non-empty
    whitespace-free speaker label. Ordering is (start, end, speaker).
    """

    start: float
    end: float
    speaker: str

    def __post_init__(self):
        start = float(self.start)
        end = float(self.end)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise ValueError(f"segment times must be finite, got [{start}, {end}]")
        if start < 0:
            raise ValueError(f"segment start must be >= 0, got {start}")
        if end <= start:
            raise ValueError(f"segment must have positive duration, got [{start}, {end}]")
        _check_label(self.speaker, "speaker label")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Annotation:
    """All segments of one recording, in canonical (start, end, speaker) order.

    The constructor sorts; overlapping segments are permitted (overlapped
    speech is real). Instances are immutable and hashable.
    """

    recording_id: str
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        _check_label(self.recording_id, "recording id")
        object.__setattr__(self, "segments", tuple(sorted(self.segments)))

    def __iter__(self):
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def speakers(self) -> tuple[str, ...]:
        """Distinct speaker labels, sorted."""
        return tuple(sorted({s.speaker for s in self.segments}))

    @property
    def total_speech(self) -> float:
        """Sum of segment durations (overlap counted per segment)."""
        return sum(s.duration for s in self.segments)


@dataclass(frozen=True, order=True)
class TranscriptEntry:
    """One transcribed window: ``0 <= start < end``, text may be empty (silence)."""

    start: float
    end: float
    text: str

    def __post_init__(self):
        start = float(self.start)
        end = float(self.end)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise ValueError(f"entry times must be finite, got [{start}, {end}]")
        if start < 0:
            raise ValueError(f"entry start must be >= 0, got {start}")
        if end <= start:
            raise ValueError(f"entry must have positive duration, got [{start}, {end}]")
        if not isinstance(self.text, str):
            raise ValueError("entry text must be a string")
        # lone surrogates slip through str but are not encodable Unicode
        try:
            self.text.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise ValueError(f"entry text is not valid Unicode: {exc}") from None


@dataclass(frozen=True)
class Transcript:
    """Ordered transcribed windows for one recording."""

    recording_id: str
    entries: tuple[TranscriptEntry, ...] = ()

    def __post_init__(self):
        _check_label(self.recording_id, "recording id")
        object.__setattr__(self, "entries", tuple(sorted(self.entries)))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def text(self) -> str:
        """All entry texts joined with single spaces, empty entries skipped."""
        return " ".join(e.text for e in self.entries if e.text)


def _read_text(source: TextSource) -> str:
    if hasattr(source, "read"):
        return source.read()
    return source


# ---------------------------------------------------------------------------
# RTTM


def parse_rttm(source: TextSource) -> list[Annotation]:
    """Parse RTTM text into one Annotation per recording id.

    Only ``SPEAKER`` records are consumed (10 space-separated fields; fields
    2/4/5/8 are recording id, onset, duration, speaker). Records of other
    types are skipped and reported once via :class:`SkippedLinesWarning`.
    Returned annotations are sorted by recording id.

    Raises:
        ParseError: wrong field count, non-numeric or non-finite times,
            duration <= 0, or negative onset; carries the line number.
    """
    by_recording: dict[str, list[Segment]] = {}
    skipped = 0
    for lineno, raw in enumerate(_read_text(source).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] != "SPEAKER":
            skipped += 1
            continue
        if len(fields) != 10:
            raise ParseError(f"expected 10 fields, got {len(fields)}", line=lineno)
        recording_id = fields[1]
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError:
            raise ParseError(
                f"non-numeric onset/duration: {fields[3]!r} {fields[4]!r}", line=lineno
            ) from None
        if not (math.isfinite(onset) and math.isfinite(duration)):
            raise ParseError(f"non-finite onset/duration: {onset} {duration}", line=lineno)
        if duration <= 0:
            raise ParseError(f"duration must be > 0, got {duration}", line=lineno)
        try:
            segment = Segment(onset, onset + duration, fields[7])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        by_recording.setdefault(recording_id, []).append(segment)
    if skipped:
        warnings.warn(f"skipped {skipped} non-SPEAKER line(s)", SkippedLinesWarning, stacklevel=2)
    return [Annotation(rid, segs) for rid, segs in sorted(by_recording.items())]


def write_rttm(annotations: Iterable[Annotation]) -> str:
    """Serialize annotations as RTTM ``SPEAKER`` records, times at 3 decimals.

    Inverse of :func:`parse_rttm` up to millisecond rounding. Annotations are
    emitted sorted by recording id, segments in canonical order; channel is
    written as 1.
    """
    lines = []
    for ann in sorted(annotations, key=lambda a: a.recording_id):
        for seg in ann.segments:
            lines.append(
                f"SPEAKER {ann.recording_id} 1 {seg.start:.3f} {seg.duration:.3f} "
                f"<NA> <NA> {seg.speaker} <NA> <NA>\n"
            )
    return "".join(lines)


# ---------------------------------------------------------------------------
# JSON schemas


def _reject_constant(name: str):
    raise ParseError(f"non-finite number {name} is not allowed")


def _load_json_object(source: TextSource) -> dict:
    try:
        document = json.loads(_read_text(source), parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ParseError(f"expected a JSON object, got {type(document).__name__}")
    return document


def _get_number(obj: dict, key: str, path: str) -> float:
    if key not in obj:
        raise ParseError(f"missing key {key!r}", path=path)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{key!r} must be a number, got {value!r}", path=path)
    return float(value)


def _get_string(obj: dict, key: str, path: str) -> str:
    if key not in obj:
        raise ParseError(f"missing key {key!r}", path=path)
    value = obj[key]
    if not isinstance(value, str):
        raise ParseError(f"{key!r} must be a string, got {value!r}", path=path)
    return value


def _get_recording_id(document: dict) -> str:
    rid = _get_string(document, "recording_id", "$")
    try:
        _check_label(rid, "recording id")
    except ValueError as exc:
        raise ParseError(str(exc), path="recording_id") from None
    return rid


def parse_segments_json(source: TextSource) -> Annotation:
    """Parse one segments-JSON document into an Annotation (canonical order).

    Raises:
        ParseError: schema violation, naming the offending ``segments[i]``.
    """
    document = _load_json_object(source)
    rid = _get_recording_id(document)
    raw_segments = document.get("segments")
    if not isinstance(raw_segments, list):
        raise ParseError("'segments' must be an array", path="segments")
    segments = []
    for i, item in enumerate(raw_segments):
        path = f"segments[{i}]"
        if not isinstance(item, dict):
            raise ParseError("segment must be an object", path=path)
        start = _get_number(item, "start", path)
        end = _get_number(item, "end", path)
        speaker = _get_string(item, "speaker", path)
        try:
            segments.append(Segment(start, end, speaker))
        except ValueError as exc:
            raise ParseError(str(exc), path=path) from None
    return Annotation(rid, segments)


def _json_time(t: float):
    """Shortest numeric form at 6-decimal precision (ints stay ints)."""
    r = round(float(t), JSON_TIME_DECIMALS)
    return int(r) if r == int(r) else r


def write_segments_json(annotation: Annotation) -> str:
    """Serialize an Annotation as segments JSON; byte-deterministic."""
    document = {
        "recording_id": annotation.recording_id,
        "segments": [
            {"start": _json_time(s.start), "end": _json_time(s.end), "speaker": s.speaker}
            for s in annotation.segments
        ],
    }
    return json.dumps(document, ensure_ascii=False, indent=2) + "\n"


def parse_transcript_json(source: TextSource) -> Transcript:
    """Parse one transcript-JSON document; errors name ``entries[i]``."""
    document = _load_json_object(source)
    rid = _get_recording_id(document)
    raw_entries = document.get("entries")
    if not isinstance(raw_entries, list):
        raise ParseError("'entries' must be an array", path="entries")
    entries = []
    for i, item in enumerate(raw_entries):
        path = f"entries[{i}]"
        if not isinstance(item, dict):
            raise ParseError("entry must be an object", path=path)
        start = _get_number(item, "start", path)
        end = _get_number(item, "end", path)
        text = _get_string(item, "text", path)
        try:
            entries.append(TranscriptEntry(start, end, text))
        except ValueError as exc:
            raise ParseError(str(exc), path=path) from None
    return Transcript(rid, entries)


def write_transcript_json(transcript: Transcript) -> str:
    """Serialize a Transcript as transcript JSON; byte-deterministic."""
    document = {
        "recording_id": transcript.recording_id,
        "entries": [
            {"start": _json_time(e.start), "end": _json_time(e.end), "text": e.text}
            for e in transcript.entries
        ],
    }
    return json.dumps(document, ensure_ascii=False, indent=2) + "\n"
