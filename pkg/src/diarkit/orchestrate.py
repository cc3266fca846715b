"""Backend wire protocol, two-pass diarization, and long-form transcription.

A backend is any external process that speaks the line protocol: one UTF-8
JSON document per line on stdin (requests) and stdout (responses), held
open for any number of request/response pairs. Request keys are ``op``,
``audio_path``, ``num_speakers``, ``window`` (``{"start", "end"}``), and
``params``; response keys are ``status``, ``segments``, ``text``, and
``message``. Absent optional keys are omitted, never null.

The deterministic mock backend at the bottom answers from a fixture file
and optionally records every request line, which is how the protocol suite
replays traffic against real adapters.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping, Sequence

from .segio import Annotation, Segment, Transcript, TranscriptEntry
from .textproc import DedupParams, clean_transcript

DEFAULT_CHUNK_LIMIT = 30.0
DEFAULT_TIMEOUT = 60.0

Scalar = bool | int | float | str


class BackendError(Exception):
    """Base class for backend failures; ``pass_number`` / ``chunk_index``
    are attached by the drivers when the failing call belongs to one."""

    pass_number: int | None = None
    chunk_index: int | None = None


class BackendProcessError(BackendError):
    """The backend process could not be spawned or exited prematurely."""


class BackendTimeoutError(BackendError):
    """No response line arrived within the timeout."""


class BackendProtocolError(BackendError):
    """The response line was not valid protocol JSON for the request."""


class BackendReportedError(BackendError):
    """The backend answered ``status=error``; carries its message."""


@dataclass(frozen=True)
class BackendRequest:
    """One unit of backend work.

    ``num_speakers`` is only meaningful for diarization and is rejected on
    transcription requests; ``window`` restricts work to a timeline slice.
    """

    op: str
    audio_path: str
    num_speakers: int | None = None
    window: tuple[float, float] | None = None
    params: Mapping[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        if self.op not in ("diarize", "transcribe"):
            raise ValueError(f"op must be 'diarize' or 'transcribe', got {self.op!r}")
        if not self.audio_path:
            raise ValueError("audio_path must be non-empty")
        if self.num_speakers is not None:
            if self.op != "diarize":
                raise ValueError("num_speakers is only meaningful for op='diarize'")
            if not isinstance(self.num_speakers, int) or self.num_speakers < 1:
                raise ValueError(f"num_speakers must be a positive int, got {self.num_speakers!r}")
        if self.window is not None:
            start, end = float(self.window[0]), float(self.window[1])
            if not (math.isfinite(start) and math.isfinite(end) and 0 <= start < end):
                raise ValueError(f"window must satisfy 0 <= start < end, got {self.window!r}")
            object.__setattr__(self, "window", (start, end))
        # canonical key order makes request lines byte-stable
        object.__setattr__(self, "params", dict(sorted(self.params.items())))

    def to_wire(self) -> dict:
        doc: dict = {"op": self.op, "audio_path": self.audio_path}
        if self.num_speakers is not None:
            doc["num_speakers"] = self.num_speakers
        if self.window is not None:
            doc["window"] = {"start": self.window[0], "end": self.window[1]}
        if self.params:
            doc["params"] = self.params
        return doc

    def to_line(self) -> str:
        return json.dumps(self.to_wire(), ensure_ascii=False, separators=(",", ":")) + "\n"


@dataclass(frozen=True)
class BackendResponse:
    status: str
    segments: tuple[Segment, ...] | None = None
    text: str | None = None
    message: str | None = None


def parse_response_line(line: str, op: str) -> BackendResponse:
    """Decode and validate one response line for the given request op.

    Raises:
        BackendProtocolError: malformed JSON, bad status, or missing payload.
        BackendReportedError: well-formed ``status=error`` response.
    """
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise BackendProtocolError(f"response is not valid JSON: {exc}: {line!r}") from None
    if not isinstance(doc, dict):
        raise BackendProtocolError(f"response must be a JSON object, got {line!r}")
    status = doc.get("status")
    if status == "error":
        message = doc.get("message")
        raise BackendReportedError(message if isinstance(message, str) else "backend error")
    if status != "ok":
        raise BackendProtocolError(f"response status must be 'ok' or 'error', got {status!r}")
    segments: tuple[Segment, ...] | None = None
    text: str | None = None
    if op == "diarize":
        raw = doc.get("segments")
        if not isinstance(raw, list):
            raise BackendProtocolError("ok diarize response is missing 'segments'")
        try:
            segments = tuple(
                Segment(item["start"], item["end"], item["speaker"]) for item in raw
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise BackendProtocolError(f"invalid segment in response: {exc}") from None
    else:
        text = doc.get("text")
        if not isinstance(text, str):
            raise BackendProtocolError("ok transcribe response is missing 'text'")
    return BackendResponse("ok", segments=segments, text=text, message=doc.get("message"))


class BackendClient:
    """Holds one backend process open for sequential request/response pairs.

    Usable as a context manager; the process is terminated on close. A
    background thread drains stdout so timeouts can be enforced portably.
    """

    def __init__(self, command: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        self.requests_sent = 0
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                encoding="utf-8",
            )
        except OSError as exc:
            raise BackendProcessError(f"cannot spawn backend {self.command}: {exc}") from None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._drain_stdout, daemon=True)
        self._reader.start()

    def _drain_stdout(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def send(self, request: BackendRequest) -> BackendResponse:
        try:
            self._proc.stdin.write(request.to_line())
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise BackendProcessError(f"backend pipe closed: {exc}") from None
        self.requests_sent += 1
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise BackendTimeoutError(
                f"no response within {self.timeout}s for {request.op} request"
            ) from None
        if line is None:
            code = self._proc.poll()
            raise BackendProcessError(f"backend exited (code {code}) before responding")
        return parse_response_line(line, request.op)

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "BackendClient":
        return self

    def __exit__(self, *exc_info):
        self.close()


def run_backend(
    command: Sequence[str], request: BackendRequest, timeout: float = DEFAULT_TIMEOUT
) -> BackendResponse:
    """One-shot convenience: spawn, send one request, close."""
    with BackendClient(command, timeout) as client:
        return client.send(request)


# ---------------------------------------------------------------------------
# Two-pass diarization


def _tag(error: BackendError, pass_number: int) -> BackendError:
    error.pass_number = pass_number
    return error


def two_pass_diarize(
    command: Sequence[str],
    audio_path: str,
    params: Mapping[str, Scalar] | None = None,
    *,
    timeout: float = DEFAULT_TIMEOUT,
    recording_id: str | None = None,
) -> Annotation:
    """Diarize, count the speakers found, and rerun with the count fixed.

    Pass 1 carries no speaker constraint; pass 2 repeats the identical
    request with ``num_speakers`` set to the number of distinct labels pass
    1 produced, and its segments are the result. When pass 1 finds nobody,
    the empty annotation is returned without a second call. Backend errors
    propagate with ``pass_number`` attached.
    """
    rid = recording_id or Path(audio_path).stem or audio_path
    first = BackendRequest("diarize", audio_path, params=params or {})
    with BackendClient(command, timeout) as client:
        try:
            response = client.send(first)
        except BackendError as exc:
            raise _tag(exc, 1)
        num_speakers = len({s.speaker for s in response.segments})
        if num_speakers == 0:
            return Annotation(rid, ())
        second = BackendRequest(
            "diarize", audio_path, num_speakers=num_speakers, params=first.params
        )
        try:
            response = client.send(second)
        except BackendError as exc:
            raise _tag(exc, 2)
        return Annotation(rid, response.segments)


# ---------------------------------------------------------------------------
# Chunk planning


@dataclass(frozen=True)
class ChunkPlan:
    """Sorted, non-overlapping transcription windows on the audio timeline."""

    chunks: tuple[tuple[float, float], ...]

    def __post_init__(self):
        previous_end = None
        normalized = []
        for chunk in self.chunks:
            start, end = float(chunk[0]), float(chunk[1])
            if not (math.isfinite(start) and math.isfinite(end) and 0 <= start < end):
                raise ValueError(f"chunk must satisfy 0 <= start < end, got {chunk!r}")
            if previous_end is not None and start < previous_end:
                raise ValueError(f"chunks must be sorted and non-overlapping at {chunk!r}")
            previous_end = end
            normalized.append((start, end))
        object.__setattr__(self, "chunks", tuple(normalized))

    def __iter__(self):
        return iter(self.chunks)

    def __len__(self) -> int:
        return len(self.chunks)


def speech_regions(annotation: Annotation) -> list[tuple[float, float]]:
    """Union of all segments, speakers ignored: the speech timeline."""
    regions: list[list[float]] = []
    for seg in annotation.segments:
        if regions and seg.start <= regions[-1][1]:
            regions[-1][1] = max(regions[-1][1], seg.end)
        else:
            regions.append([seg.start, seg.end])
    return [(s, e) for s, e in regions]


def plan_chunks(
    regions: Sequence[tuple[float, float]], chunk_limit: float = DEFAULT_CHUNK_LIMIT
) -> ChunkPlan:
    """Greedy left-to-right packing of speech regions into decode windows.

    A chunk absorbs the next region while the span from its start to that
    region's end stays within ``chunk_limit`` (spans are timeline spans, so
    internal silences count). A single region longer than the limit is cut
    into pieces of exactly ``chunk_limit`` plus a remainder.

    Raises:
        ValueError: regions not sorted/disjoint/positive, or bad limit.
    """
    if not (math.isfinite(chunk_limit) and chunk_limit > 0):
        raise ValueError(f"chunk_limit must be positive, got {chunk_limit}")
    previous_end = 0.0
    for region in regions:
        start, end = float(region[0]), float(region[1])
        if not (math.isfinite(start) and math.isfinite(end) and 0 <= start < end):
            raise ValueError(f"region must satisfy 0 <= start < end, got {region!r}")
        if start < previous_end:
            raise ValueError(f"regions must be sorted and non-overlapping at {region!r}")
        previous_end = end

    chunks: list[tuple[float, float]] = []
    current: list[float] | None = None
    for start, end in regions:
        if current is not None and end - current[0] <= chunk_limit:
            current[1] = end
            continue
        if current is not None:
            chunks.append((current[0], current[1]))
        piece_start = float(start)
        while end - piece_start > chunk_limit:
            chunks.append((piece_start, piece_start + chunk_limit))
            piece_start += chunk_limit
        current = [piece_start, float(end)]
    if current is not None:
        chunks.append((current[0], current[1]))
    return ChunkPlan(tuple(chunks))


# ---------------------------------------------------------------------------
# Long-form transcription


@dataclass(frozen=True)
class ChunkFailure:
    index: int
    window: tuple[float, float]
    error: str


@dataclass(frozen=True)
class LongformResult:
    transcript: Transcript
    failures: tuple[ChunkFailure, ...] = ()


def transcribe_longform(
    command: Sequence[str],
    audio_path: str,
    plan: ChunkPlan,
    dedup: DedupParams = DedupParams(),
    *,
    timeout: float = DEFAULT_TIMEOUT,
    on_chunk_error: str = "continue",
    recording_id: str | None = None,
) -> LongformResult:
    """Transcribe every planned chunk and clean the text of each.

    One ``transcribe`` request per chunk, windows set, order preserved.
    With ``on_chunk_error="continue"`` (default) a failing chunk yields an
    empty-text entry and a recorded :class:`ChunkFailure`; with ``"fail"``
    the backend error is raised immediately, tagged with the chunk index.
    """
    if on_chunk_error not in ("continue", "fail"):
        raise ValueError(f"on_chunk_error must be 'continue' or 'fail', got {on_chunk_error!r}")
    rid = recording_id or Path(audio_path).stem or audio_path
    if not plan.chunks:
        return LongformResult(Transcript(rid, ()))
    entries: list[TranscriptEntry] = []
    failures: list[ChunkFailure] = []
    with BackendClient(command, timeout) as client:
        for index, (start, end) in enumerate(plan.chunks):
            request = BackendRequest("transcribe", audio_path, window=(start, end))
            try:
                response = client.send(request)
            except BackendError as exc:
                exc.chunk_index = index
                if on_chunk_error == "fail":
                    raise
                failures.append(ChunkFailure(index, (start, end), str(exc)))
                entries.append(TranscriptEntry(start, end, ""))
                continue
            entries.append(TranscriptEntry(start, end, clean_transcript(response.text, dedup)))
    return LongformResult(Transcript(rid, entries), tuple(failures))


# ---------------------------------------------------------------------------
# Deterministic mock backend


def _fixture_matches(entry: dict, request: dict) -> int | None:
    """Specificity score when the fixture entry matches, else None.

    ``op`` and ``audio_path`` must always match; ``num_speakers``,
    ``window``, and ``params`` act as wildcards when the entry omits them.
    """
    if entry.get("op") != request.get("op"):
        return None
    if entry.get("audio_path") != request.get("audio_path"):
        return None
    score = 0
    for key in ("num_speakers", "window", "params"):
        if key in entry:
            if entry[key] != request.get(key):
                return None
            score += 1
    return score


def run_mock_backend(
    fixture: dict,
    stdin: IO[str],
    stdout: IO[str],
    record: IO[str] | None = None,
) -> None:
    """Serve protocol requests from a fixture mapping until stdin closes.

    The fixture is ``{"responses": [entry, ...]}`` where each entry carries
    the match fields (``op``, ``audio_path``, optional ``num_speakers`` /
    ``window`` / ``params``) plus the ``response`` document to emit. The
    most specific matching entry wins; ties go to the first one listed.
    Unknown requests and malformed lines get ``status=error`` responses;
    the process never crashes on input.
    """
    entries = fixture.get("responses", [])

    def emit(doc: dict):
        stdout.write(json.dumps(doc, ensure_ascii=False, separators=(",", ":")) + "\n")
        stdout.flush()

    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        if record is not None:
            record.write(line + "\n")
            record.flush()
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
        except ValueError as exc:
            emit({"status": "error", "message": f"malformed request: {exc}"})
            continue
        best_score, best_entry = -1, None
        for entry in entries:
            score = _fixture_matches(entry, request)
            if score is not None and score > best_score:
                best_score, best_entry = score, entry
        if best_entry is None:
            emit({"status": "error", "message": f"no fixture entry matches request: {line}"})
        else:
            emit(best_entry["response"])
