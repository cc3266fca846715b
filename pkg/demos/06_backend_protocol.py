"""The backend line protocol, two-pass diarization, and long-form ASR.

Inference lives behind a separate process speaking one JSON document per
line on stdin/stdout. Anything can implement it: the bundled deterministic
mock (used here and in the tests), or a real adapter wrapping pyannote and
Whisper. Run with:

    python demos/06_backend_protocol.py
"""

import json
import sys
import tempfile
from pathlib import Path

from diarkit import BackendRequest, plan_chunks, run_backend, transcribe_longform, two_pass_diarize

workdir = Path(tempfile.mkdtemp(prefix="diarkit_demo_"))

# A fixture maps request shapes to canned responses. The second entry only
# fires when the request carries num_speakers=2: that is the two-pass
# constraint in action.
fixture = {
    "responses": [
        {
            "op": "diarize",
            "audio_path": "show.wav",
            "num_speakers": None,
            "response": {
                "status": "ok",
                "segments": [
                    {"start": 0, "end": 9, "speaker": "S0"},
                    {"start": 9, "end": 11, "speaker": "S1"},
                    {"start": 11, "end": 30, "speaker": "S0"},
                ],
            },
        },
        {
            "op": "diarize",
            "audio_path": "show.wav",
            "num_speakers": 2,
            "response": {
                "status": "ok",
                "segments": [
                    {"start": 0, "end": 10.2, "speaker": "S0"},
                    {"start": 10.2, "end": 30, "speaker": "S1"},
                ],
            },
        },
        {
            "op": "transcribe",
            "audio_path": "show.wav",
            "window": {"start": 0, "end": 30},
            "response": {"status": "ok", "text": "স্বাগতম স্বাগতম স্বাগতম শ্রোতা"},
        },
    ]
}
fixture_path = workdir / "fixture.json"
fixture_path.write_text(json.dumps(fixture), encoding="utf-8")
backend = [sys.executable, "-m", "diarkit.cli", "mock-backend", "--fixture", str(fixture_path)]

# One raw protocol exchange, to see the wire format itself.
request = BackendRequest("diarize", "show.wav")
print("request line :", request.to_line(), end="")
response = run_backend(backend, request)
print("pass-1 labels:", sorted({s.speaker for s in response.segments}))

# Two passes: the first estimates the speaker count, the second repeats the
# identical request with that count pinned, which stabilizes clustering.
annotation = two_pass_diarize(backend, "show.wav")
print("\ntwo-pass result:")
for seg in annotation:
    print(f"  {seg.start:6.2f} - {seg.end:6.2f}  {seg.speaker}")

# Long-form ASR: plan windows over the speech, transcribe each, and clean
# the hallucinated repetition from every chunk's text.
plan = plan_chunks([(0.0, 30.0)], chunk_limit=30.0)
outcome = transcribe_longform(backend, "show.wav", plan)
for entry in outcome.transcript:
    print(f"\nchunk {entry.start:g}-{entry.end:g}: {entry.text}")
print("chunk failures:", len(outcome.failures))
