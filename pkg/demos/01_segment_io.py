"""Segments on a timeline: the core types and the two file formats.

Run with: python demos/01_segment_io.py
"""

from diarkit import Annotation, Segment, parse_rttm, parse_segments_json, write_rttm, write_segments_json

# An annotation is every labeled turn of one recording. The constructor
# sorts into canonical (start, end, speaker) order, and overlapping turns
# are perfectly legal: people talk over each other.
annotation = Annotation(
    "interview_042",
    [
        Segment(12.5, 19.0, "host"),
        Segment(0.0, 13.1, "guest"),  # overlaps the host's turn
        Segment(19.0, 25.0, "guest"),
    ],
)
print("canonical order:")
for seg in annotation:
    print(f"  {seg.start:7.2f} - {seg.end:7.2f}  {seg.speaker}")
print("speakers:", annotation.speakers)

# RTTM is the NIST interchange format most diarization tooling reads.
rttm_text = write_rttm([annotation])
print("\nas RTTM:")
print(rttm_text, end="")

# The JSON schema is the toolkit's native form; both round-trip.
json_text = write_segments_json(annotation)
print("\nas segments JSON:")
print(json_text, end="")

assert parse_rttm(rttm_text)[0].speakers == annotation.speakers
assert parse_segments_json(json_text) == annotation
print("\nround trips hold.")
