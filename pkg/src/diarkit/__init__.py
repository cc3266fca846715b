"""diarkit: model-agnostic machinery for long-form diarization/ASR pipelines.

Segment I/O (RTTM and JSON schemas), deterministic diarization cleanup,
DER/WER scoring with optimal speaker mapping, repetition-removal text
cleanup, 30-second chunk planning, a two-pass speaker-count-constrained
orchestrator over a pluggable line-protocol backend, and a three-phase
cached hyperparameter sweep.
"""

__version__ = "0.1.0"

from .metrics import (
    DerBreakdown,
    DerOptions,
    RecordingMismatchError,
    UndefinedRateError,
    WerBreakdown,
    aggregate_der,
    aggregate_wer,
    align_tokens,
    score_der,
    score_der_corpus,
    score_wer,
    score_wer_corpus,
)
from .orchestrate import (
    BackendClient,
    BackendError,
    BackendProcessError,
    BackendProtocolError,
    BackendReportedError,
    BackendRequest,
    BackendResponse,
    BackendTimeoutError,
    ChunkPlan,
    LongformResult,
    plan_chunks,
    run_backend,
    speech_regions,
    transcribe_longform,
    two_pass_diarize,
)
from .postprocess import (
    PostprocessParams,
    apply_postprocess,
    collapse_aba,
    merge_same_speaker_gaps,
    remove_short_segments,
)
from .segio import (
    Annotation,
    ParseError,
    Segment,
    Transcript,
    TranscriptEntry,
    parse_rttm,
    parse_segments_json,
    parse_transcript_json,
    write_rttm,
    write_segments_json,
    write_transcript_json,
)
from .sweep import (
    PostprocessGrid,
    SweepCache,
    SweepResult,
    SweepSpec,
    config_digest,
    load_spec,
    phase1_threshold_sweep,
    phase2_cache_predictions,
    phase3_postprocess_sweep,
    run_full_sweep,
)
from .textproc import (
    DedupParams,
    NormalizationProfile,
    clean_transcript,
    dedup_chars,
    dedup_phrases,
    dedup_words,
    normalize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
