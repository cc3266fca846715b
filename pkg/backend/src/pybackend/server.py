"""The request loop: line-delimited JSON on stdin/stdout.

One request per line, one response per line, in order. Malformed requests
and per-request engine failures produce ``status=error`` responses and the
loop keeps serving; only a model-load failure ends the process (after one
final error line). Every emitted line is validated against the wire schema
before it goes out, so a buggy engine can never put an invalid segment on
the wire.
"""

from __future__ import annotations

import json
import math
from typing import IO, Callable, Iterable

DiarizeEngine = Callable[..., Iterable[tuple[float, float, str]]]
TranscribeEngine = Callable[..., str]


class RequestError(ValueError):
    """The request line violates the wire contract."""


class EngineOutputError(ValueError):
    """The engine produced output that cannot go on the wire."""


def _parse_request(line: str) -> dict:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError(f"malformed request: {exc}") from None
    if not isinstance(doc, dict):
        raise RequestError("request must be a JSON object")
    op = doc.get("op")
    if op not in ("diarize", "transcribe"):
        raise RequestError(f"op must be 'diarize' or 'transcribe', got {op!r}")
    audio_path = doc.get("audio_path")
    if not isinstance(audio_path, str) or not audio_path:
        raise RequestError("audio_path must be a non-empty string")
    num_speakers = doc.get("num_speakers")
    if num_speakers is not None:
        if op != "diarize":
            raise RequestError("num_speakers is only valid for diarize requests")
        if not isinstance(num_speakers, int) or isinstance(num_speakers, bool) or num_speakers < 1:
            raise RequestError(f"num_speakers must be a positive integer, got {num_speakers!r}")
    window = doc.get("window")
    if window is not None:
        if not isinstance(window, dict):
            raise RequestError("window must be an object with start/end")
        try:
            start, end = float(window["start"]), float(window["end"])
        except (KeyError, TypeError, ValueError):
            raise RequestError(f"window must carry numeric start/end, got {window!r}") from None
        if not (math.isfinite(start) and math.isfinite(end) and 0 <= start < end):
            raise RequestError(f"window must satisfy 0 <= start < end, got {window!r}")
        doc["window"] = (start, end)
    params = doc.get("params")
    if params is None:
        doc["params"] = {}
    elif not isinstance(params, dict):
        raise RequestError("params must be an object")
    else:
        for key, value in params.items():
            if not isinstance(value, (bool, int, float, str)):
                raise RequestError(f"params[{key!r}] must be a scalar, got {value!r}")
    return doc


def _segments_payload(raw: Iterable, num_speakers: int | None) -> list[dict]:
    segments = []
    labels = set()
    for item in raw:
        try:
            start, end, speaker = float(item[0]), float(item[1]), item[2]
        except (TypeError, ValueError, IndexError):
            raise EngineOutputError(f"engine segment must be (start, end, speaker), got {item!r}") from None
        if not (math.isfinite(start) and math.isfinite(end) and 0 <= start < end):
            raise EngineOutputError(f"engine segment times invalid: [{start}, {end}]")
        if not isinstance(speaker, str) or not speaker or any(c.isspace() for c in speaker):
            raise EngineOutputError(f"engine speaker label invalid: {speaker!r}")
        labels.add(speaker)
        segments.append({"start": start, "end": end, "speaker": speaker})
    if num_speakers is not None and len(labels) > num_speakers:
        raise EngineOutputError(
            f"engine returned {len(labels)} speakers with num_speakers={num_speakers}"
        )
    return segments


def _emit(stdout: IO[str], doc: dict) -> None:
    stdout.write(json.dumps(doc, ensure_ascii=False, separators=(",", ":")) + "\n")
    stdout.flush()


def serve_loop(
    stdin: IO[str],
    stdout: IO[str],
    diarize: DiarizeEngine,
    transcribe: TranscribeEngine,
) -> None:
    """Serve requests until stdin closes. Never raises on bad input."""
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        try:
            request = _parse_request(line)
            if request["op"] == "diarize":
                produced = diarize(
                    request["audio_path"],
                    num_speakers=request.get("num_speakers"),
                    window=request.get("window"),
                    params=request["params"],
                )
                payload = _segments_payload(produced, request.get("num_speakers"))
                _emit(stdout, {"status": "ok", "segments": payload})
            else:
                text = transcribe(
                    request["audio_path"],
                    window=request.get("window"),
                    params=request["params"],
                )
                if not isinstance(text, str):
                    raise EngineOutputError(f"engine text must be a string, got {type(text).__name__}")
                _emit(stdout, {"status": "ok", "text": text})
        except Exception as exc:  # any failure answers this request only
            _emit(stdout, {"status": "error", "message": f"{type(exc).__name__}: {exc}"})


def serve(config, stdin: IO[str], stdout: IO[str], engine_builder=None) -> int:
    """Load models, then run the loop. Model-load failure emits one error
    response and exits nonzero, per the protocol contract."""
    if engine_builder is None:
        from .engines import build_engines as engine_builder
    try:
        diarize, transcribe = engine_builder(config)
    except Exception as exc:
        _emit(stdout, {"status": "error", "message": f"model load failed: {exc}"})
        return 1
    serve_loop(stdin, stdout, diarize, transcribe)
    return 0
