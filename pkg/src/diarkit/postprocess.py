"""Deterministic diarization segment cleanup.

Three rules, each exposed on its own and composed by
:func:`apply_postprocess`:

* drop segments shorter than a minimum duration,
* merge same-speaker segments separated by short silences,
* collapse a very short B segment sandwiched between two A segments
  (A-B-A, a common hallucination pattern) into one A segment.

Threshold comparisons run on the integer-microsecond grid also used by the
scorers, so a segment written as ``[1.1, 1.3]`` really has duration 0.2 at
the 0.2 boundary regardless of binary float noise. Segment times themselves
are never requantized.

All functions are pure and return new :class:`~diarkit.segio.Annotation`
values.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

from .segio import Annotation, Segment

_MICRO = 1_000_000


def _micro(t: float) -> int:
    return int(round(t * _MICRO))


@dataclass(frozen=True)
class PostprocessParams:
    """Cleanup thresholds, all in seconds and all >= 0.

    Defaults keep natural short turns while removing sub-perceptual
    fragments; the sweep module exists to tune them per corpus.
    """

    min_duration: float = 0.2
    merge_gap: float = 0.5
    aba_max_duration: float = 0.3

    def __post_init__(self):
        for name in ("min_duration", "merge_gap", "aba_max_duration"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


def remove_short_segments(annotation: Annotation, min_duration: float) -> Annotation:
    """Keep exactly the segments with duration >= ``min_duration``."""
    threshold = _micro(min_duration)
    return Annotation(
        annotation.recording_id,
        [s for s in annotation.segments if _micro(s.end) - _micro(s.start) >= threshold],
    )


def merge_same_speaker_gaps(annotation: Annotation, merge_gap: float) -> Annotation:
    """Fuse same-speaker segments separated by silences <= ``merge_gap``.

    A pair merges only when no other speaker's segment overlaps the open gap
    between them; overlapping same-speaker segments always fuse. Applied
    left-to-right per speaker, which reaches the fixpoint in one pass.
    """
    threshold = _micro(merge_gap)
    segments = annotation.segments
    starts = [_micro(s.start) for s in segments]

    def gap_is_blocked(prev: Segment, nxt: Segment) -> bool:
        gap_start, gap_end = _micro(prev.end), _micro(nxt.start)
        if gap_end <= gap_start:
            return False  # empty gap, nothing can occupy it
        # blockers must start before the gap closes; scan those left of it
        for k in range(bisect_left(starts, gap_end) - 1, -1, -1):
            other = segments[k]
            if other.speaker != prev.speaker and _micro(other.end) > gap_start:
                return True
        return False

    merged: list[Segment] = []
    for speaker in {s.speaker for s in segments}:
        current: Segment | None = None
        for seg in segments:
            if seg.speaker != speaker:
                continue
            if current is None:
                current = seg
            elif _micro(seg.start) - _micro(current.end) <= threshold and not gap_is_blocked(
                current, seg
            ):
                current = Segment(current.start, max(current.end, seg.end), speaker)
            else:
                merged.append(current)
                current = seg
        if current is not None:
            merged.append(current)
    return Annotation(annotation.recording_id, merged)


def collapse_aba(annotation: Annotation, aba_max_duration: float) -> Annotation:
    """Collapse A-B-A triples whose middle is shorter than ``aba_max_duration``.

    Fires on three timeline-consecutive, pairwise non-overlapping segments
    with matching flank speakers and a strictly shorter middle; the triple
    becomes one flank-speaker segment spanning it. The scan resumes one
    position back after each collapse so cascades are caught.
    """
    threshold = _micro(aba_max_duration)
    segments = list(annotation.segments)
    i = 0
    while i + 2 < len(segments):
        s1, s2, s3 = segments[i], segments[i + 1], segments[i + 2]
        if (
            s1.speaker == s3.speaker
            and s2.speaker != s1.speaker
            and _micro(s2.end) - _micro(s2.start) < threshold
            and _micro(s1.end) <= _micro(s2.start)
            and _micro(s2.end) <= _micro(s3.start)
        ):
            segments[i : i + 3] = [Segment(s1.start, s3.end, s1.speaker)]
            i = max(i - 1, 0)
        else:
            i += 1
    return Annotation(annotation.recording_id, segments)


def apply_postprocess(annotation: Annotation, params: PostprocessParams) -> Annotation:
    """Run the full cleanup (A-B-A collapse, short-drop, gap-merge) to fixpoint.

    Each pass runs the stages in that order; passes repeat until nothing
    changes, because any one stage can expose new work for the others
    (dropping a fragment may make two same-speaker segments mergeable).
    Iterating to the fixpoint is what makes the whole operation idempotent.
    """
    current = annotation
    while True:
        step = collapse_aba(current, params.aba_max_duration)
        step = remove_short_segments(step, params.min_duration)
        step = merge_same_speaker_gaps(step, params.merge_gap)
        if step == current:
            return current
        current = step
