"""Scoring: DER with optimal speaker mapping, WER with normalization.

Run with: python demos/03_scoring.py
"""

from diarkit import (
    Annotation,
    DerOptions,
    Segment,
    score_der,
    score_der_corpus,
    score_wer,
)

# --- DER ------------------------------------------------------------------
# Hypothesis speaker names never match the reference; the scorer finds the
# one-to-one mapping that maximizes time overlap before counting errors.
reference = Annotation(
    "call", [Segment(0, 10, "alice"), Segment(10, 18, "bob"), Segment(5, 9, "bob")]
)
hypothesis = Annotation(
    "call", [Segment(0, 10.5, "SPEAKER_01"), Segment(10.5, 18, "SPEAKER_00"), Segment(5, 9, "SPEAKER_00")]
)

result = score_der(reference, hypothesis)
print("DER components (seconds):")
print(f"  missed speech : {result.missed:.3f}")
print(f"  false alarm   : {result.false_alarm:.3f}")
print(f"  confusion     : {result.confusion:.3f}")
print(f"  reference     : {result.total_reference:.3f}")
print(f"  DER           : {result.der:.4f}")

# Strict scoring (the default) uses no collar and scores overlap regions.
# NIST-style forgiveness is a knob away:
relaxed = score_der(reference, hypothesis, DerOptions(collar=0.25, score_overlap=False))
print(f"  DER @ collar 0.25, overlap skipped: {relaxed.der:.4f}")

# Corpus scores are time-weighted: sums of numerators and denominators, not
# a mean of per-file rates, so an hour-long file counts for more than a
# one-minute one.
tiny_perfect = (Annotation("a", [Segment(0, 60, "x")]), Annotation("a", [Segment(0, 60, "x")]))
long_bad = (Annotation("b", [Segment(0, 3600, "y")]), Annotation("b", []))
print(f"\ncorpus DER: {score_der_corpus([tiny_perfect, long_bad]).der:.4f} (not the mean 0.5)")

# --- WER ------------------------------------------------------------------
# Both sides are normalized (NFC, punctuation stripped, whitespace
# collapsed) before the unit-cost alignment, so a dari or a stray double
# space is not an error.
ref_text = "আমি ভাত খাই ।"
hyp_text = "আমি  খাই"
wer = score_wer(ref_text, hyp_text)
print(f"\nWER: S={wer.substitutions} D={wer.deletions} I={wer.insertions}"
      f" over {wer.reference_tokens} reference tokens -> {wer.wer:.4f}")
