"""Diarization error rate and word error rate scoring.

DER follows md-eval semantics: an optimal one-to-one reference/hypothesis
speaker mapping is fixed globally per recording (maximum-overlap
assignment), then missed speech, false alarm, and speaker confusion are
accumulated over homogeneous timeline intervals. All time arithmetic runs
on integer microseconds, so results are exactly reproducible and invariant
under relabeling of hypothesis speakers.

WER uses unit-cost minimum-edit-distance alignment over whitespace tokens
after :func:`diarkit.textproc.normalize`.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .segio import Annotation
from .textproc import DEFAULT_PROFILE, NormalizationProfile, normalize

MICROSECONDS = 1_000_000

_MicroSeg = tuple[int, int, str]


class UndefinedRateError(ValueError):
    """The rate's denominator is zero and the numerator is not."""


class RecordingMismatchError(ValueError):
    """Reference and hypothesis belong to different recordings."""


@dataclass(frozen=True)
class DerOptions:
    """Scoring knobs: ``collar`` seconds are excluded around every reference
    boundary; ``score_overlap=False`` additionally excludes regions where the
    reference has two or more simultaneous speakers (NIST style). Defaults
    are strict leaderboard-style scoring: no collar, overlap scored."""

    collar: float = 0.0
    score_overlap: bool = True

    def __post_init__(self):
        collar = float(self.collar)
        object.__setattr__(self, "collar", collar)
        if not math.isfinite(collar) or collar < 0:
            raise ValueError(f"collar must be finite and >= 0, got {collar}")


@dataclass(frozen=True)
class DerBreakdown:
    """Decomposed diarization error, in seconds of reference time.

    ``der`` can exceed 1.0 when false alarms outweigh the reference.
    """

    missed: float
    false_alarm: float
    confusion: float
    total_reference: float

    def __post_init__(self):
        for name in ("missed", "false_alarm", "confusion", "total_reference"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def error_time(self) -> float:
        return self.missed + self.false_alarm + self.confusion

    @property
    def is_defined(self) -> bool:
        return self.total_reference > 0

    @property
    def der(self) -> float:
        if self.total_reference <= 0:
            raise UndefinedRateError("DER is undefined: reference contains no scored speech")
        return self.error_time / self.total_reference


@dataclass(frozen=True)
class WerBreakdown:
    """Decomposed word error: substitution/deletion/insertion counts."""

    substitutions: int
    deletions: int
    insertions: int
    reference_tokens: int

    def __post_init__(self):
        for name in ("substitutions", "deletions", "insertions", "reference_tokens"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def edit_distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def is_defined(self) -> bool:
        return self.reference_tokens > 0 or self.edit_distance == 0

    @property
    def wer(self) -> float:
        if self.reference_tokens == 0:
            if self.edit_distance == 0:
                return 0.0
            raise UndefinedRateError(
                f"WER is undefined: empty reference with {self.insertions} insertion(s)"
            )
        return self.edit_distance / self.reference_tokens


# ---------------------------------------------------------------------------
# DER


def _micro(t: float) -> int:
    return int(round(t * MICROSECONDS))


def _micro_segments(annotation: Annotation) -> list[_MicroSeg]:
    return [(_micro(s.start), _micro(s.end), s.speaker) for s in annotation.segments]


def _merge_intervals(intervals: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for s, e in sorted(intervals):
        if s >= e:
            continue
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


def _subtract(segments: list[_MicroSeg], excluded: list[tuple[int, int]]) -> list[_MicroSeg]:
    """Clip segments to the complement of the merged ``excluded`` intervals."""
    if not excluded:
        return segments
    starts = [x[0] for x in excluded]
    out: list[_MicroSeg] = []
    for s, e, label in segments:
        cur = s
        for k in range(max(bisect_right(starts, s) - 1, 0), len(excluded)):
            xs, xe = excluded[k]
            if xs >= e:
                break
            if xe <= cur:
                continue
            if xs > cur:
                out.append((cur, xs, label))
            cur = max(cur, xe)
            if cur >= e:
                break
        if cur < e:
            out.append((cur, e, label))
    return out


def _overlap_regions(segments: list[_MicroSeg]) -> list[tuple[int, int]]:
    """Intervals where two or more distinct speakers are active."""
    events: list[tuple[int, int, str]] = []
    for s, e, label in segments:
        events.append((s, 1, label))
        events.append((e, -1, label))
    events.sort(key=lambda ev: ev[0])
    regions: list[tuple[int, int]] = []
    counts: dict[str, int] = {}
    active = 0
    k, n = 0, len(events)
    while k < n:
        t = events[k][0]
        while k < n and events[k][0] == t:
            _, delta, label = events[k]
            before = counts.get(label, 0)
            counts[label] = before + delta
            if before == 0 and delta > 0:
                active += 1
            elif before + delta == 0 and delta < 0:
                active -= 1
            k += 1
        if k < n and active >= 2:
            regions.append((t, events[k][0]))
    return _merge_intervals(regions)


def _sweep(ref: list[_MicroSeg], hyp: list[_MicroSeg]):
    """One pass over homogeneous intervals.

    Returns integer-microsecond totals (missed, false_alarm, sum of
    min(r, h), total reference) plus the reference x hypothesis co-activity
    matrix used for the speaker assignment.
    """
    ref_labels = sorted({label for _, _, label in ref})
    hyp_labels = sorted({label for _, _, label in hyp})
    ridx = {label: i for i, label in enumerate(ref_labels)}
    hidx = {label: i for i, label in enumerate(hyp_labels)}
    events: list[tuple[int, int, int, int]] = []
    for s, e, label in ref:
        events.append((s, 0, ridx[label], 1))
        events.append((e, 0, ridx[label], -1))
    for s, e, label in hyp:
        events.append((s, 1, hidx[label], 1))
        events.append((e, 1, hidx[label], -1))
    events.sort(key=lambda ev: ev[0])

    matrix = [[0] * len(hyp_labels) for _ in ref_labels]
    ref_count = [0] * len(ref_labels)
    hyp_count = [0] * len(hyp_labels)
    active_ref: set[int] = set()
    active_hyp: set[int] = set()
    missed = false_alarm = min_rh = total_ref = 0

    k, n = 0, len(events)
    while k < n:
        t = events[k][0]
        while k < n and events[k][0] == t:
            _, side, idx, delta = events[k]
            if side == 0:
                ref_count[idx] += delta
                (active_ref.add if ref_count[idx] > 0 else active_ref.discard)(idx)
            else:
                hyp_count[idx] += delta
                (active_hyp.add if hyp_count[idx] > 0 else active_hyp.discard)(idx)
            k += 1
        if k >= n:
            break
        length = events[k][0] - t
        if length <= 0:
            continue
        r = len(active_ref)
        h = len(active_hyp)
        if not (r or h):
            continue
        total_ref += r * length
        if r > h:
            missed += (r - h) * length
            min_rh += h * length
        else:
            false_alarm += (h - r) * length
            min_rh += r * length
        if r and h:
            for i in active_ref:
                row = matrix[i]
                for j in active_hyp:
                    row[j] += length
    return missed, false_alarm, min_rh, total_ref, matrix


def _assignment_weight(matrix: list[list[int]]) -> int:
    """Value of the maximum-weight one-to-one speaker assignment."""
    if not matrix or not matrix[0]:
        return 0
    weights = np.asarray(matrix, dtype=np.int64)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return int(weights[rows, cols].sum())


def score_der(
    reference: Annotation,
    hypothesis: Annotation,
    options: DerOptions = DerOptions(),
) -> DerBreakdown:
    """Score one hypothesis against its reference.

    Collar zones (and overlap regions, when overlap is not scored) are cut
    from both annotations first; the optimal speaker mapping is then fixed
    from the co-activity matrix and the error components accumulated per
    homogeneous interval. Confusion is derived as
    ``sum(min(r, h) * len) - assignment_weight``, which depends only on the
    optimum value, never on which optimal mapping the solver picked.

    Raises:
        RecordingMismatchError: the two annotations name different recordings.
    """
    if reference.recording_id != hypothesis.recording_id:
        raise RecordingMismatchError(
            f"recording ids differ: {reference.recording_id!r} vs {hypothesis.recording_id!r}"
        )
    ref = _micro_segments(reference)
    hyp = _micro_segments(hypothesis)

    excluded: list[tuple[int, int]] = []
    collar = _micro(options.collar)
    if collar > 0:
        for s, e, _ in ref:
            excluded.append((s - collar, s + collar))
            excluded.append((e - collar, e + collar))
    if not options.score_overlap:
        excluded.extend(_overlap_regions(ref))
    if excluded:
        excluded = _merge_intervals(excluded)
        ref = _subtract(ref, excluded)
        hyp = _subtract(hyp, excluded)

    missed, false_alarm, min_rh, total_ref, matrix = _sweep(ref, hyp)
    confusion = min_rh - _assignment_weight(matrix)
    return DerBreakdown(
        missed=missed / MICROSECONDS,
        false_alarm=false_alarm / MICROSECONDS,
        confusion=confusion / MICROSECONDS,
        total_reference=total_ref / MICROSECONDS,
    )


# ---------------------------------------------------------------------------
# WER


def align_tokens(reference: Sequence[str], hypothesis: Sequence[str]) -> WerBreakdown:
    """Minimum-edit-distance alignment with unit costs.

    Ties are broken per cell, preferring match/substitution over deletion
    over insertion, so the S/D/I decomposition is deterministic even when
    several alignments share the optimal distance.
    """
    n, m = len(reference), len(hypothesis)
    # rows of (cost, substitutions, deletions, insertions)
    prev = [(j, 0, 0, j) for j in range(m + 1)]
    for i in range(1, n + 1):
        ref_token = reference[i - 1]
        cur: list[tuple[int, int, int, int]] = [(i, 0, i, 0)] * (m + 1)
        for j in range(1, m + 1):
            pc, ps, pd, pi = prev[j - 1]
            if ref_token == hypothesis[j - 1]:
                best = (pc, ps, pd, pi)
            else:
                best = (pc + 1, ps + 1, pd, pi)
            uc, us, ud, ui = prev[j]
            if uc + 1 < best[0]:
                best = (uc + 1, us, ud + 1, ui)
            lc, ls, ld, li = cur[j - 1]
            if lc + 1 < best[0]:
                best = (lc + 1, ls, ld, li + 1)
            cur[j] = best
        prev = cur
    _, subs, dels, inss = prev[m]
    return WerBreakdown(subs, dels, inss, n)


def score_wer(
    reference_text: str,
    hypothesis_text: str,
    profile: NormalizationProfile = DEFAULT_PROFILE,
) -> WerBreakdown:
    """Normalize both texts, tokenize on whitespace, and align."""
    return align_tokens(
        normalize(reference_text, profile).split(),
        normalize(hypothesis_text, profile).split(),
    )


# ---------------------------------------------------------------------------
# Corpus aggregation: sum numerators and denominators before dividing.


def aggregate_der(breakdowns: Iterable[DerBreakdown]) -> DerBreakdown:
    items = list(breakdowns)
    if not items:
        raise ValueError("cannot aggregate an empty list of DER breakdowns")
    return DerBreakdown(
        missed=sum(b.missed for b in items),
        false_alarm=sum(b.false_alarm for b in items),
        confusion=sum(b.confusion for b in items),
        total_reference=sum(b.total_reference for b in items),
    )


def aggregate_wer(breakdowns: Iterable[WerBreakdown]) -> WerBreakdown:
    items = list(breakdowns)
    if not items:
        raise ValueError("cannot aggregate an empty list of WER breakdowns")
    return WerBreakdown(
        substitutions=sum(b.substitutions for b in items),
        deletions=sum(b.deletions for b in items),
        insertions=sum(b.insertions for b in items),
        reference_tokens=sum(b.reference_tokens for b in items),
    )


def score_der_corpus(
    pairs: Sequence[tuple[Annotation, Annotation]],
    options: DerOptions = DerOptions(),
) -> DerBreakdown:
    """Time-weighted corpus DER (not the mean of per-file rates)."""
    if not pairs:
        raise ValueError("cannot score an empty corpus")
    return aggregate_der(score_der(ref, hyp, options) for ref, hyp in pairs)


def score_wer_corpus(
    pairs: Sequence[tuple[str, str]],
    profile: NormalizationProfile = DEFAULT_PROFILE,
) -> WerBreakdown:
    """Token-weighted corpus WER (not the mean of per-file rates)."""
    if not pairs:
        raise ValueError("cannot score an empty corpus")
    return aggregate_wer(score_wer(ref, hyp, profile) for ref, hyp in pairs)
