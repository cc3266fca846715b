"""The three-phase hyperparameter sweep with prediction caching.

Inference is the expensive part of a diarization pipeline; post-processing
is microseconds. The sweep exploits that split: phase 1 runs inference once
per clustering threshold, phase 2 caches the raw predictions of the winner,
and phase 3 grids over the cleanup parameters from the cache alone, with
zero further inference. Run with:

    python demos/07_staged_sweep.py
"""

import json
import sys
import tempfile
from pathlib import Path

from diarkit import DerOptions, PostprocessGrid, SweepSpec, parse_segments_json
from diarkit.sweep import (
    format_table,
    phase1_threshold_sweep,
    phase2_cache_predictions,
    phase3_postprocess_sweep,
)

workdir = Path(tempfile.mkdtemp(prefix="diarkit_sweep_"))

reference = parse_segments_json(
    '{"recording_id": "rec1", "segments": ['
    '{"start": 0, "end": 10, "speaker": "A"},'
    '{"start": 11, "end": 16, "speaker": "B"}]}'
)

# The mock backend: threshold 0.5 gives a noisy-but-close prediction,
# 0.8 over-clusters everything away.
fixture = {
    "responses": [
        {
            "op": "diarize",
            "audio_path": "rec1.wav",
            "params": {"threshold": 0.5},
            "response": {"status": "ok", "segments": [
                {"start": 0, "end": 4.9, "speaker": "X"},
                {"start": 4.9, "end": 5.05, "speaker": "Y"},
                {"start": 5.05, "end": 10, "speaker": "X"},
                {"start": 11, "end": 16, "speaker": "Y"},
                {"start": 17, "end": 17.08, "speaker": "X"},
            ]},
        },
        {
            "op": "diarize",
            "audio_path": "rec1.wav",
            "params": {"threshold": 0.8},
            "response": {"status": "ok", "segments": [
                {"start": 0, "end": 16, "speaker": "X"}
            ]},
        },
    ]
}
fixture_path = workdir / "fixture.json"
fixture_path.write_text(json.dumps(fixture), encoding="utf-8")
backend = [sys.executable, "-m", "diarkit.cli", "mock-backend", "--fixture", str(fixture_path)]

spec = SweepSpec(
    thresholds=(0.5, 0.8),
    postprocess_grid=PostprocessGrid(
        min_duration=(0.0, 0.1, 0.2),
        merge_gap=(0.0, 0.5),
        aba_max_duration=(0.0, 0.3),
    ),
    dataset=(("rec1.wav", reference),),
    der_options=DerOptions(),
)

best_threshold, phase1 = phase1_threshold_sweep(spec, backend)
print("phase 1 (one inference pass per threshold):")
print(format_table(phase1))
print("winner:", best_threshold)

cache = phase2_cache_predictions(best_threshold, spec, backend, workdir / "cache")
print(f"\nphase 2: raw predictions cached under {cache.root}")
print("(rerunning phase 2 now would make zero backend calls)")

phase3 = phase3_postprocess_sweep(cache, spec, best_threshold)
print("\nphase 3 (cleanup grid, no inference at all):")
print(format_table(phase3))
print("best cleanup:", phase3.best.config, "->", f"{phase3.best.breakdown.der:.4f}")
