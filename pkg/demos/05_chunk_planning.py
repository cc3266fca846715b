"""Packing speech into decode windows for a 30-second ASR model.

The ASR backend decodes contiguous audio windows of bounded length. The
planner packs detected speech regions into as few windows as possible:
nearby regions share a window (the silence between them rides along), and a
region longer than the limit is cut into limit-sized pieces. Run with:

    python demos/05_chunk_planning.py
"""

from diarkit import Annotation, Segment, plan_chunks, speech_regions

# Speech regions usually come from the diarizer: union the segments,
# ignoring who spoke.
annotation = Annotation(
    "lecture",
    [
        Segment(0, 8, "prof"),
        Segment(6, 12, "student"),   # overlap fuses into one region
        Segment(14, 20, "prof"),
        Segment(45, 130, "prof"),    # a 85 s monologue: must be split
        Segment(131, 140, "student"),
    ],
)
regions = speech_regions(annotation)
print("speech regions:", regions)

plan = plan_chunks(regions, chunk_limit=30.0)
print("\ndecode windows (limit 30 s):")
for start, end in plan:
    print(f"  {start:7.2f} - {end:7.2f}  ({end - start:5.2f} s)")

# Every region instant lands in exactly one window and no window exceeds
# the limit; the planner guarantees both.
assert all(end - start <= 30.0 for start, end in plan)
