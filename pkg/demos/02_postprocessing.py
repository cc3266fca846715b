"""Diarization cleanup, rule by rule.

Diarization models hallucinate: sub-second speaker flips in the middle of a
turn, confetti fragments, one turn split across a breath pause. Three
deterministic rules fix the bulk of it. Run with:

    python demos/02_postprocessing.py
"""

from diarkit import Annotation, PostprocessParams, Segment, apply_postprocess
from diarkit.postprocess import collapse_aba, merge_same_speaker_gaps, remove_short_segments


def show(title, annotation):
    print(title)
    for seg in annotation:
        print(f"  {seg.start:6.2f} - {seg.end:6.2f}  {seg.speaker}")


# A raw model output with all three defects at once.
raw = Annotation(
    "meeting",
    [
        Segment(0.0, 4.90, "alice"),
        Segment(4.90, 5.05, "bob"),    # 150 ms flip inside alice's turn: A-B-A
        Segment(5.05, 9.80, "alice"),
        Segment(10.10, 14.0, "alice"),  # same speaker, 300 ms breath gap
        Segment(14.6, 14.67, "bob"),    # 70 ms confetti
        Segment(15.0, 21.0, "bob"),
    ],
)
show("raw model output:", raw)

# Rule 1: a very short B between two A's is almost surely A all along.
step = collapse_aba(raw, aba_max_duration=0.3)
show("\nafter A-B-A collapse (middle < 0.3 s):", step)

# Rule 2: fragments below the minimum duration are noise.
step = remove_short_segments(step, min_duration=0.2)
show("\nafter dropping segments < 0.2 s:", step)

# Rule 3: same-speaker turns separated by a tiny silence are one turn.
step = merge_same_speaker_gaps(step, merge_gap=0.5)
show("\nafter merging same-speaker gaps <= 0.5 s:", step)

# apply_postprocess runs all three to a fixpoint; it is idempotent, so a
# pipeline can safely run it again on already-clean input.
params = PostprocessParams(min_duration=0.2, merge_gap=0.5, aba_max_duration=0.3)
clean = apply_postprocess(raw, params)
assert apply_postprocess(clean, params) == clean
show("\napply_postprocess (fixpoint of all three):", clean)
