"""Command-line entry point: every capability as a subcommand.

Exit codes are stable: 0 success, 1 scoring/definition error, 2 usage
error, 3 backend/protocol failure, 4 I/O or parse failure. Payload output
is byte-deterministic for identical inputs and flags; progress and
diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path

from . import __version__
from .metrics import (
    DerBreakdown,
    DerOptions,
    RecordingMismatchError,
    UndefinedRateError,
    WerBreakdown,
    aggregate_der,
    aggregate_wer,
    score_der,
    score_wer,
)
from .orchestrate import (
    BackendError,
    BackendRequest,
    plan_chunks,
    run_backend,
    run_mock_backend,
    speech_regions,
    transcribe_longform,
    two_pass_diarize,
)
from .postprocess import PostprocessParams, apply_postprocess
from .segio import (
    Annotation,
    ParseError,
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
    CacheError,
    SweepCache,
    SweepError,
    format_table,
    full_report_to_json,
    load_spec,
    phase1_threshold_sweep,
    phase2_cache_predictions,
    phase3_postprocess_sweep,
    result_to_json,
    run_full_sweep,
)
from .textproc import DedupParams, NormalizationProfile, clean_transcript

EXIT_OK = 0
EXIT_SCORING = 1
EXIT_USAGE = 2
EXIT_BACKEND = 3
EXIT_IO = 4

BACKEND_CMD_ENV = "DIARKIT_BACKEND_CMD"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _err(message: str) -> None:
    print(f"diarkit: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Shared readers/writers


def _parse_annotation_file(path: Path) -> list[Annotation]:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".rttm":
        return parse_rttm(text)
    return [parse_segments_json(text)]


def _read_annotation_map(path: Path) -> dict[str, Annotation]:
    """recording id -> annotation, from one file or a directory of files."""
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".json", ".rttm"))
    else:
        files = [path]
    annotations: dict[str, Annotation] = {}
    for file in files:
        for ann in _parse_annotation_file(file):
            if ann.recording_id in annotations:
                raise CliError(EXIT_IO, f"duplicate recording id {ann.recording_id!r} in {file}")
            annotations[ann.recording_id] = ann
    return annotations


def _write_annotation(annotation: Annotation, path: Path) -> None:
    if path.suffix.lower() == ".rttm":
        path.write_text(write_rttm([annotation]), encoding="utf-8")
    else:
        path.write_text(write_segments_json(annotation), encoding="utf-8")


def _single_annotation(path: Path) -> Annotation:
    annotations = _parse_annotation_file(path)
    if len(annotations) != 1:
        raise CliError(
            EXIT_USAGE, f"{path} holds {len(annotations)} recordings; expected exactly one"
        )
    return annotations[0]


def _backend_command(args) -> list[str]:
    raw = args.backend_cmd or os.environ.get(BACKEND_CMD_ENV)
    if not raw:
        raise CliError(
            EXIT_USAGE, f"no backend command: pass --backend-cmd or set {BACKEND_CMD_ENV}"
        )
    return shlex.split(raw)


def _dedup_params(args) -> DedupParams:
    return DedupParams(
        max_word_repeat=args.max_word_repeat,
        max_phrase_len=args.max_phrase_len,
        max_phrase_repeat=args.max_phrase_repeat,
        max_char_repeat=args.max_char_repeat,
    )


def _add_dedup_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-word-repeat", type=int, default=2, help="longest kept run of one word (default: 2)")
    parser.add_argument("--max-phrase-len", type=int, default=5, help="longest n-gram checked for loops (default: 5)")
    parser.add_argument("--max-phrase-repeat", type=int, default=1, help="longest kept run of one phrase (default: 1)")
    parser.add_argument("--max-char-repeat", type=int, default=2, help="longest kept run of one grapheme (default: 2)")


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend-cmd", help=f"backend command line (default: ${BACKEND_CMD_ENV})")
    parser.add_argument("--timeout-secs", type=float, default=60.0, help="per-response timeout (default: 60)")


# ---------------------------------------------------------------------------
# convert


def cmd_convert(args) -> int:
    in_path = Path(args.input)
    out_path = Path(args.output)
    if in_path.is_dir():
        out_path.mkdir(parents=True, exist_ok=True)
        converted = 0
        for file in sorted(in_path.iterdir()):
            if file.suffix.lower() not in (".json", ".rttm"):
                continue
            target = "rttm" if file.suffix.lower() == ".json" else "json"
            if args.to:
                target = args.to
            for ann in _parse_annotation_file(file):
                _write_annotation(ann, out_path / f"{ann.recording_id}.{target}")
                converted += 1
        _err(f"converted {converted} recording(s) into {out_path}")
        return EXIT_OK
    annotations = _parse_annotation_file(in_path)
    if len(annotations) != 1:
        raise CliError(
            EXIT_USAGE,
            f"{in_path} holds {len(annotations)} recordings; convert into a directory instead",
        )
    target = args.to or ("json" if out_path.suffix.lower() == ".json" else "rttm")
    out = out_path if out_path.suffix else out_path.with_suffix(f".{target}")
    _write_annotation(annotations[0], out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# scoring


def _der_row(recording_id: str, breakdown: DerBreakdown) -> dict:
    return {
        "id": recording_id,
        "missed": breakdown.missed,
        "false_alarm": breakdown.false_alarm,
        "confusion": breakdown.confusion,
        "total": breakdown.total_reference,
        "der": breakdown.der if breakdown.is_defined else None,
    }


def _print_rate_table(rows: list[dict]) -> None:
    keys = list(rows[0].keys())
    cells = [[str(k) for k in keys]]
    for row in rows:
        cells.append(
            [
                f"{v:.6f}" if isinstance(v, float) else ("undefined" if v is None else str(v))
                for v in row.values()
            ]
        )
    widths = [max(len(line[i]) for line in cells) for i in range(len(keys))]
    for line in cells:
        print("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())


def cmd_score_der(args) -> int:
    references = _read_annotation_map(Path(args.reference))
    hypotheses = _read_annotation_map(Path(args.hypothesis))
    options = DerOptions(collar=args.collar, score_overlap=not args.skip_overlap)
    extra = sorted(set(hypotheses) - set(references))
    if extra:
        _err(f"ignoring {len(extra)} hypothesis recording(s) without references: {extra}")
    rows = []
    breakdowns = []
    for rid in sorted(references):
        if rid not in hypotheses:
            raise CliError(EXIT_SCORING, f"missing hypothesis for recording {rid!r}")
        breakdown = score_der(references[rid], hypotheses[rid], options)
        breakdowns.append(breakdown)
        rows.append(_der_row(rid, breakdown))
    aggregate = aggregate_der(breakdowns)
    report = {"files": rows, "aggregate": _der_row("ALL", aggregate)}
    if args.json:
        print(json.dumps(report, ensure_ascii=False, indent=2))
    else:
        _print_rate_table(rows + [report["aggregate"]])
    if not aggregate.is_defined:
        raise CliError(EXIT_SCORING, "aggregate DER is undefined: no scored reference speech")
    return EXIT_OK


def _read_text_map(path: Path) -> dict[str, str]:
    """recording id -> scoring text (transcript JSON by id, .txt by stem)."""
    files: list[Path]
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".json", ".txt"))
    else:
        files = [path]
    texts: dict[str, str] = {}
    for file in files:
        if file.suffix.lower() == ".json":
            transcript = parse_transcript_json(file.read_text(encoding="utf-8"))
            rid, text = transcript.recording_id, transcript.text
        else:
            rid, text = file.stem, file.read_text(encoding="utf-8")
        if rid in texts:
            raise CliError(EXIT_IO, f"duplicate recording id {rid!r} at {file}")
        texts[rid] = text
    return texts


def _wer_row(recording_id: str, breakdown: WerBreakdown) -> dict:
    return {
        "id": recording_id,
        "substitutions": breakdown.substitutions,
        "deletions": breakdown.deletions,
        "insertions": breakdown.insertions,
        "reference_tokens": breakdown.reference_tokens,
        "wer": breakdown.wer if breakdown.is_defined else None,
    }


def cmd_score_wer(args) -> int:
    references = _read_text_map(Path(args.reference))
    hypotheses = _read_text_map(Path(args.hypothesis))
    profile = NormalizationProfile(
        unicode_form="none" if args.unicode_form == "none" else "NFC",
        strip_punctuation=not args.keep_punctuation,
        collapse_whitespace=True,
    )
    rows = []
    breakdowns = []
    for rid in sorted(references):
        if rid not in hypotheses:
            raise CliError(EXIT_SCORING, f"missing hypothesis for recording {rid!r}")
        breakdown = score_wer(references[rid], hypotheses[rid], profile)
        breakdowns.append(breakdown)
        rows.append(_wer_row(rid, breakdown))
    aggregate = aggregate_wer(breakdowns)
    report = {"files": rows, "aggregate": _wer_row("ALL", aggregate)}
    if args.json:
        print(json.dumps(report, ensure_ascii=False, indent=2))
    else:
        _print_rate_table(rows + [report["aggregate"]])
    if not aggregate.is_defined:
        raise CliError(EXIT_SCORING, "aggregate WER is undefined: empty reference corpus")
    return EXIT_OK


# ---------------------------------------------------------------------------
# postprocess / dedup / chunk-plan


def cmd_postprocess(args) -> int:
    params = PostprocessParams(
        min_duration=args.min_duration,
        merge_gap=args.merge_gap,
        aba_max_duration=args.aba_max_duration,
    )
    annotations = _parse_annotation_file(Path(args.input))
    cleaned = [apply_postprocess(a, params) for a in annotations]
    out_path = Path(args.output)
    if out_path.suffix.lower() == ".rttm":
        out_path.write_text(write_rttm(cleaned), encoding="utf-8")
    else:
        if len(cleaned) != 1:
            raise CliError(
                EXIT_USAGE, f"{args.input} holds {len(cleaned)} recordings; write RTTM instead"
            )
        out_path.write_text(write_segments_json(cleaned[0]), encoding="utf-8")
    return EXIT_OK


def cmd_dedup(args) -> int:
    params = _dedup_params(args)
    in_path = Path(args.input)
    out_path = Path(args.output)
    if in_path.suffix.lower() == ".json":
        transcript = parse_transcript_json(in_path.read_text(encoding="utf-8"))
        cleaned = Transcript(
            transcript.recording_id,
            [
                TranscriptEntry(e.start, e.end, clean_transcript(e.text, params))
                for e in transcript.entries
            ],
        )
        out_path.write_text(write_transcript_json(cleaned), encoding="utf-8")
    else:
        lines = in_path.read_text(encoding="utf-8").splitlines()
        out_path.write_text(
            "".join(clean_transcript(line, params) + "\n" for line in lines), encoding="utf-8"
        )
    return EXIT_OK


def cmd_chunk_plan(args) -> int:
    annotation = _single_annotation(Path(args.input))
    plan = plan_chunks(speech_regions(annotation), args.chunk_limit)
    doc = {
        "recording_id": annotation.recording_id,
        "chunk_limit": args.chunk_limit,
        "chunks": [{"start": s, "end": e} for s, e in plan],
    }
    Path(args.output).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# backend-driven commands


def _parse_param(item: str):
    if "=" not in item:
        raise CliError(EXIT_USAGE, f"--param expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if not isinstance(value, (bool, int, float, str)):
        raise CliError(EXIT_USAGE, f"--param value must be a scalar, got {raw!r}")
    return key, value


def cmd_two_pass(args) -> int:
    command = _backend_command(args)
    params = dict(_parse_param(item) for item in args.param or [])
    annotation = two_pass_diarize(
        command,
        args.audio,
        params,
        timeout=args.timeout_secs,
        recording_id=args.recording_id,
    )
    Path(args.output).write_text(write_segments_json(annotation), encoding="utf-8")
    return EXIT_OK


def cmd_transcribe(args) -> int:
    command = _backend_command(args)
    if args.regions:
        regions = speech_regions(_single_annotation(Path(args.regions)))
    else:
        response = run_backend(
            command, BackendRequest("diarize", args.audio), timeout=args.timeout_secs
        )
        rid = args.recording_id or Path(args.audio).stem or args.audio
        regions = speech_regions(Annotation(rid, response.segments))
    plan = plan_chunks(regions, args.chunk_limit)
    result = transcribe_longform(
        command,
        args.audio,
        plan,
        _dedup_params(args),
        timeout=args.timeout_secs,
        on_chunk_error=args.on_chunk_error,
        recording_id=args.recording_id,
    )
    for failure in result.failures:
        _err(f"chunk {failure.index} [{failure.window[0]:.3f}, {failure.window[1]:.3f}] failed: {failure.error}")
    Path(args.output).write_text(write_transcript_json(result.transcript), encoding="utf-8")
    if result.failures:
        _err(f"{len(result.failures)} of {len(plan)} chunk(s) substituted with empty text")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _write_report(path: str | None, doc: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def cmd_sweep(args) -> int:
    spec = load_spec(args.spec)
    command = _backend_command(args) if args.phase in ("phase1", "phase2", "all") else None
    if args.phase == "phase1":
        best, result = phase1_threshold_sweep(spec, command, timeout=args.timeout_secs)
        print(format_table(result))
        _err(f"best threshold: {best:g}")
        _write_report(args.report, {"phase": "phase1", "best_threshold": best, **result_to_json(result)})
        return EXIT_OK
    if args.phase == "phase2":
        if args.threshold is None:
            raise CliError(EXIT_USAGE, "phase2 requires --threshold (the phase1 winner)")
        if not args.cache_dir:
            raise CliError(EXIT_USAGE, "phase2 requires --cache-dir")
        phase2_cache_predictions(
            args.threshold, spec, command, args.cache_dir, timeout=args.timeout_secs
        )
        _err(f"cache for threshold {args.threshold:g} is complete under {args.cache_dir}")
        return EXIT_OK
    if args.phase == "phase3":
        if args.threshold is None:
            raise CliError(EXIT_USAGE, "phase3 requires --threshold (the phase1 winner)")
        if not args.cache_dir:
            raise CliError(EXIT_USAGE, "phase3 requires --cache-dir")
        result = phase3_postprocess_sweep(SweepCache(args.cache_dir), spec, args.threshold)
        print(format_table(result))
        _write_report(args.report, {"phase": "phase3", **result_to_json(result)})
        return EXIT_OK
    if not args.cache_dir:
        raise CliError(EXIT_USAGE, "sweep all requires --cache-dir")
    report = run_full_sweep(spec, command, args.cache_dir, timeout=args.timeout_secs)
    print("# phase1: clustering threshold")
    print(format_table(report.phase1))
    print(f"# best threshold: {report.best_threshold:g}")
    print("# phase3: post-processing grid")
    print(format_table(report.phase3))
    _write_report(args.report, {"phase": "all", **full_report_to_json(report)})
    return EXIT_OK


def cmd_mock_backend(args) -> int:
    fixture = json.loads(Path(args.fixture).read_text(encoding="utf-8"))
    record = open(args.record_requests, "a", encoding="utf-8") if args.record_requests else None
    try:
        run_mock_backend(fixture, sys.stdin, sys.stdout, record)
    finally:
        if record:
            record.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diarkit",
        description="Diarization/transcription toolkit: segment I/O, cleanup, scoring, "
        "chunk planning, two-pass orchestration, and cached sweeps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert RTTM <-> segments JSON (file or directory batch)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--to", choices=("rttm", "json"), help="target format (default: inferred)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("score-der", help="diarization error rate with optimal speaker mapping")
    p.add_argument("reference", help="reference file or directory (.json or .rttm)")
    p.add_argument("hypothesis", help="hypothesis file or directory (.json or .rttm)")
    p.add_argument("--collar", type=float, default=0.0, help="seconds excluded around each reference boundary (default: 0.0)")
    p.add_argument("--skip-overlap", action="store_true", help="exclude reference overlap regions (NIST style; default: overlap scored)")
    p.add_argument("--json", action="store_true", help="emit the JSON report instead of the table")
    p.set_defaults(func=cmd_score_der)

    p = sub.add_parser("score-wer", help="word error rate with Bengali-aware normalization")
    p.add_argument("reference", help="reference file or directory (.txt or transcript .json)")
    p.add_argument("hypothesis", help="hypothesis file or directory (.txt or transcript .json)")
    p.add_argument("--unicode-form", choices=("nfc", "none"), default="nfc", help="Unicode normal form applied before tokenizing (default: nfc)")
    p.add_argument("--keep-punctuation", action="store_true", help="do not strip punctuation (default: stripped)")
    p.add_argument("--json", action="store_true", help="emit the JSON report instead of the table")
    p.set_defaults(func=cmd_score_wer)

    p = sub.add_parser("postprocess", help="A-B-A collapse, short-segment drop, same-speaker gap merge")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--min-duration", type=float, default=0.2, help="drop segments shorter than this (default: 0.2)")
    p.add_argument("--merge-gap", type=float, default=0.5, help="merge same-speaker gaps up to this (default: 0.5)")
    p.add_argument("--aba-max-duration", type=float, default=0.3, help="collapse A-B-A middles shorter than this (default: 0.3)")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("dedup", help="remove word/phrase/letter repetition loops from text")
    p.add_argument("input", help="transcript .json or plain text (one utterance per line)")
    p.add_argument("output")
    _add_dedup_flags(p)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("chunk-plan", help="plan transcription windows from speech regions")
    p.add_argument("input", help="segments file whose union defines the speech regions")
    p.add_argument("output", help="chunk plan JSON")
    p.add_argument("--chunk-limit", type=float, default=30.0, help="longest window in seconds (default: 30.0)")
    p.set_defaults(func=cmd_chunk_plan)

    p = sub.add_parser("two-pass", help="diarize, then rerun with the speaker count fixed")
    p.add_argument("audio", help="audio path handed to the backend")
    p.add_argument("output", help="segments JSON output")
    _add_backend_flags(p)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="inference parameter, repeatable")
    p.add_argument("--recording-id", help="recording id for the output (default: audio stem)")
    p.set_defaults(func=cmd_two_pass)

    p = sub.add_parser("transcribe", help="plan chunks and transcribe them through the backend")
    p.add_argument("audio", help="audio path handed to the backend")
    p.add_argument("output", help="transcript JSON output")
    _add_backend_flags(p)
    p.add_argument("--regions", help="segments file for speech regions (default: ask the backend to diarize)")
    p.add_argument("--chunk-limit", type=float, default=30.0, help="longest decode window in seconds (default: 30.0)")
    p.add_argument("--on-chunk-error", choices=("continue", "fail"), default="continue", help="chunk failure policy (default: continue with empty text)")
    p.add_argument("--recording-id", help="recording id for the output (default: audio stem)")
    _add_dedup_flags(p)
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("sweep", help="staged hyperparameter search with prediction caching")
    p.add_argument("phase", choices=("phase1", "phase2", "phase3", "all"))
    p.add_argument("--spec", required=True, help="sweep spec file (.json or .toml)")
    p.add_argument("--cache-dir", help="raw-prediction cache directory")
    p.add_argument("--threshold", type=float, help="clustering threshold for phase2/phase3")
    p.add_argument("--report", help="write the JSON report here")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mock-backend", help="deterministic fixture-driven protocol backend")
    p.add_argument("--fixture", required=True, help="fixture JSON mapping requests to responses")
    p.add_argument("--record-requests", help="append every request line to this file")
    p.set_defaults(func=cmd_mock_backend)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _err(str(exc))
        return exc.code
    except ParseError as exc:
        _err(f"parse error: {exc}")
        return EXIT_IO
    except (UndefinedRateError, RecordingMismatchError) as exc:
        _err(str(exc))
        return EXIT_SCORING
    except BackendError as exc:
        _err(f"backend failure: {exc}")
        return EXIT_BACKEND
    except SweepError as exc:
        _err(str(exc))
        return EXIT_BACKEND
    except CacheError as exc:
        _err(str(exc))
        return EXIT_IO
    except json.JSONDecodeError as exc:
        _err(f"invalid JSON: {exc}")
        return EXIT_IO
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
