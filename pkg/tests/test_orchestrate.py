import json
import random
import subprocess
import sys

import pytest

from diarkit.orchestrate import (
    BackendClient,
    BackendProcessError,
    BackendProtocolError,
    BackendReportedError,
    BackendRequest,
    BackendTimeoutError,
    ChunkPlan,
    plan_chunks,
    run_backend,
    speech_regions,
    transcribe_longform,
    two_pass_diarize,
)
from diarkit.segio import Segment
from diarkit.textproc import DedupParams

from conftest import ann, segments_wire


class TestRequestWire:
    def test_full_request_line(self):
        request = BackendRequest(
            "diarize", "a.wav", num_speakers=2, window=(0, 1.5), params={"threshold": 0.5, "alpha": 1}
        )
        assert request.to_line() == (
            '{"op":"diarize","audio_path":"a.wav","num_speakers":2,'
            '"window":{"start":0.0,"end":1.5},"params":{"alpha":1,"threshold":0.5}}\n'
        )

    def test_optional_keys_omitted_not_null(self):
        line = BackendRequest("transcribe", "a.wav").to_line()
        assert line == '{"op":"transcribe","audio_path":"a.wav"}\n'
        assert "null" not in line

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"op": "detect"},
            {"op": "diarize", "audio_path": ""},
            {"op": "transcribe", "num_speakers": 2},  # meaningless for transcribe
            {"op": "diarize", "num_speakers": 0},
            {"op": "diarize", "window": (5, 5)},
            {"op": "diarize", "window": (-1, 5)},
        ],
    )
    def test_invalid_requests_rejected(self, kwargs):
        kwargs.setdefault("audio_path", "a.wav")
        with pytest.raises(ValueError):
            BackendRequest(**kwargs)


DIARIZE_FIXTURE = {
    "responses": [
        {
            "op": "diarize",
            "audio_path": "a.wav",
            "response": {"status": "ok", "segments": segments_wire((0, 1, "S0"), (1, 2, "S1"))},
        }
    ]
}


class TestRunBackend:
    def test_fixture_round_trip(self, make_backend):
        response = run_backend(make_backend(DIARIZE_FIXTURE), BackendRequest("diarize", "a.wav"))
        assert response.segments == (Segment(0, 1, "S0"), Segment(1, 2, "S1"))

    def test_unknown_fixture_key_is_reported_error(self, make_backend):
        with pytest.raises(BackendReportedError, match="no fixture entry"):
            run_backend(make_backend(DIARIZE_FIXTURE), BackendRequest("diarize", "other.wav"))

    def test_spawn_failure(self):
        with pytest.raises(BackendProcessError):
            run_backend(["/nonexistent/backend"], BackendRequest("diarize", "a.wav"))

    def test_backend_exits_before_responding(self):
        command = [sys.executable, "-c", "import sys; sys.stdin.readline(); sys.exit(3)"]
        with pytest.raises(BackendProcessError, match="exited"):
            run_backend(command, BackendRequest("diarize", "a.wav"))

    def test_timeout(self):
        command = [
            sys.executable,
            "-c",
            "import sys, time; sys.stdin.readline(); time.sleep(30)",
        ]
        with pytest.raises(BackendTimeoutError):
            run_backend(command, BackendRequest("diarize", "a.wav"), timeout=0.5)

    def test_malformed_response_line(self):
        command = [
            sys.executable,
            "-c",
            "import sys; sys.stdin.readline(); print('not json'); sys.stdout.flush(); sys.stdin.read()",
        ]
        with pytest.raises(BackendProtocolError):
            run_backend(command, BackendRequest("diarize", "a.wav"))

    def test_ok_diarize_without_segments_is_protocol_error(self, make_backend):
        fixture = {
            "responses": [{"op": "diarize", "audio_path": "a.wav", "response": {"status": "ok"}}]
        }
        with pytest.raises(BackendProtocolError, match="segments"):
            run_backend(make_backend(fixture), BackendRequest("diarize", "a.wav"))

    def test_reported_error_carries_message(self, make_backend):
        fixture = {
            "responses": [
                {
                    "op": "diarize",
                    "audio_path": "a.wav",
                    "response": {"status": "error", "message": "model exploded"},
                }
            ]
        }
        with pytest.raises(BackendReportedError, match="model exploded"):
            run_backend(make_backend(fixture), BackendRequest("diarize", "a.wav"))

    def test_client_reused_for_multiple_requests(self, make_backend):
        with BackendClient(make_backend(DIARIZE_FIXTURE)) as client:
            first = client.send(BackendRequest("diarize", "a.wav"))
            second = client.send(BackendRequest("diarize", "a.wav"))
        assert first == second
        assert client.requests_sent == 2


TWO_PASS_FIXTURE = {
    "responses": [
        {
            "op": "diarize",
            "audio_path": "a.wav",
            "num_speakers": None,
            "response": {
                "status": "ok",
                "segments": segments_wire((0, 1, "S0"), (1, 2, "S1"), (2, 3, "S2")),
            },
        },
        {
            "op": "diarize",
            "audio_path": "a.wav",
            "num_speakers": 3,
            "response": {
                "status": "ok",
                "segments": segments_wire((0, 1.5, "S0"), (1.5, 2.2, "S1"), (2.2, 3, "S2")),
            },
        },
    ]
}


class TestTwoPass:
    def test_pass2_carries_pass1_speaker_count(self, make_backend, tmp_path):
        record = tmp_path / "requests.jsonl"
        result = two_pass_diarize(
            make_backend(TWO_PASS_FIXTURE, record), "a.wav", {"threshold": 0.5}
        )
        lines = [json.loads(l) for l in record.read_text().splitlines()]
        assert len(lines) == 2  # at most two calls, and exactly two here
        assert "num_speakers" not in lines[0]
        assert lines[1]["num_speakers"] == 3
        # identical apart from the added constraint
        first = dict(lines[0])
        second = dict(lines[1])
        second.pop("num_speakers")
        assert first == second
        # result is the pass-2 output, not pass-1
        assert result == ann("a", (0, 1.5, "S0"), (1.5, 2.2, "S1"), (2.2, 3, "S2"))

    def test_empty_pass1_short_circuits(self, make_backend, tmp_path):
        fixture = {
            "responses": [
                {"op": "diarize", "audio_path": "a.wav", "response": {"status": "ok", "segments": []}}
            ]
        }
        record = tmp_path / "requests.jsonl"
        result = two_pass_diarize(make_backend(fixture, record), "a.wav")
        assert result.segments == ()
        assert len(record.read_text().splitlines()) == 1

    def test_errors_tagged_with_pass_number(self, make_backend):
        fixture = {
            "responses": [
                {
                    "op": "diarize",
                    "audio_path": "a.wav",
                    "num_speakers": None,
                    "response": {"status": "ok", "segments": segments_wire((0, 1, "S0"))},
                }
            ]
        }
        with pytest.raises(BackendReportedError) as exc_info:
            two_pass_diarize(make_backend(fixture), "a.wav")
        assert exc_info.value.pass_number == 2

    def test_recording_id_defaults_to_audio_stem(self, make_backend):
        result = two_pass_diarize(make_backend(TWO_PASS_FIXTURE), "a.wav")
        assert result.recording_id == "a"


class TestPlanChunks:
    def test_greedy_absorption(self):
        plan = plan_chunks([(0, 10), (12, 20), (25, 40)], 30)
        assert plan.chunks == ((0, 20), (25, 40))

    def test_long_region_split(self):
        plan = plan_chunks([(0, 70)], 30)
        assert plan.chunks == ((0, 30), (30, 60), (60, 70))

    def test_empty(self):
        assert plan_chunks([], 30).chunks == ()

    def test_remainder_can_absorb_following_region(self):
        plan = plan_chunks([(0, 70), (72, 75)], 30)
        assert plan.chunks == ((0, 30), (30, 60), (60, 75))

    def test_exact_multiple_split(self):
        assert plan_chunks([(0, 60)], 30).chunks == ((0, 30), (30, 60))

    @pytest.mark.parametrize(
        "regions",
        [[(5, 3)], [(0, 5), (4, 8)], [(-1, 5)], [(0, 0)]],
    )
    def test_invalid_regions_rejected(self, regions):
        with pytest.raises(ValueError):
            plan_chunks(regions, 30)

    def test_invalid_limit_rejected(self):
        with pytest.raises(ValueError):
            plan_chunks([(0, 1)], 0)

    def test_random_plans_satisfy_invariants(self):
        rng = random.Random(555)
        for _ in range(200):
            regions = random_regions(rng)
            limit = rng.choice([5.0, 12.5, 30.0])
            check_plan_invariants(regions, plan_chunks(regions, limit), limit)


def random_regions(rng, max_regions=12):
    regions = []
    position = 0.0
    for _ in range(rng.randint(0, max_regions)):
        gap = rng.randint(0, 5_000) / 1000
        duration = rng.randint(1, 40_000) / 1000
        start = position + gap
        regions.append((start, start + duration))
        position = start + duration
    return regions


def check_plan_invariants(regions, plan, limit):
    previous_end = None
    for start, end in plan.chunks:
        assert end - start <= limit + 1e-9, "chunk exceeds limit"
        if previous_end is not None:
            assert start >= previous_end, "chunks overlap or are unsorted"
        previous_end = end
    # every region instant is covered exactly once: chunks are disjoint, so
    # it suffices that each region's intersection with the chunks sums to
    # its full length
    for rs, re_ in regions:
        covered = sum(max(0.0, min(re_, ce) - max(rs, cs)) for cs, ce in plan.chunks)
        assert abs(covered - (re_ - rs)) <= 1e-9, "region not covered exactly once"


class TestSpeechRegions:
    def test_union_ignores_speakers(self):
        a = ann("r", (0, 5, "A"), (3, 8, "B"), (10, 12, "A"))
        assert speech_regions(a) == [(0, 8), (10, 12)]

    def test_touching_segments_fuse(self):
        a = ann("r", (0, 5, "A"), (5, 8, "B"))
        assert speech_regions(a) == [(0, 8)]


TRANSCRIBE_FIXTURE = {
    "responses": [
        {
            "op": "transcribe",
            "audio_path": "a.wav",
            "window": {"start": 0, "end": 10},
            "response": {"status": "ok", "text": "a a a a"},
        },
        {
            "op": "transcribe",
            "audio_path": "a.wav",
            "window": {"start": 12, "end": 20},
            "response": {"status": "ok", "text": "b"},
        },
    ]
}


class TestTranscribeLongform:
    def test_chunks_cleaned_and_ordered(self, make_backend):
        plan = ChunkPlan(((0, 10), (12, 20)))
        result = transcribe_longform(make_backend(TRANSCRIBE_FIXTURE), "a.wav", plan)
        assert [e.text for e in result.transcript.entries] == ["a", "b"]
        assert [(e.start, e.end) for e in result.transcript.entries] == [(0, 10), (12, 20)]
        assert result.failures == ()

    def test_empty_plan(self, make_backend):
        result = transcribe_longform(make_backend(TRANSCRIBE_FIXTURE), "a.wav", ChunkPlan(()))
        assert len(result.transcript) == 0

    def test_failed_chunk_continue_policy(self, make_backend):
        plan = ChunkPlan(((0, 10), (12, 20), (25, 30)))  # last window has no fixture
        result = transcribe_longform(make_backend(TRANSCRIBE_FIXTURE), "a.wav", plan)
        assert [e.text for e in result.transcript.entries] == ["a", "b", ""]
        assert len(result.failures) == 1
        assert result.failures[0].index == 2

    def test_failed_chunk_fail_policy(self, make_backend):
        plan = ChunkPlan(((0, 10), (25, 30)))
        with pytest.raises(BackendReportedError) as exc_info:
            transcribe_longform(
                make_backend(TRANSCRIBE_FIXTURE), "a.wav", plan, on_chunk_error="fail"
            )
        assert exc_info.value.chunk_index == 1

    def test_dedup_params_respected(self, make_backend):
        fixture = {
            "responses": [
                {
                    "op": "transcribe",
                    "audio_path": "a.wav",
                    "response": {"status": "ok", "text": "x x x"},
                }
            ]
        }
        plan = ChunkPlan(((0, 5),))
        result = transcribe_longform(
            make_backend(fixture), "a.wav", plan, DedupParams(max_word_repeat=3)
        )
        assert result.transcript.entries[0].text == "x x x"


class TestMockBackendProcess:
    def _run(self, fixture_path, stdin_text):
        return subprocess.run(
            [sys.executable, "-m", "diarkit.cli", "mock-backend", "--fixture", str(fixture_path)],
            input=stdin_text,
            capture_output=True,
            text=True,
            timeout=30,
        )

    def test_deterministic_byte_identical(self, tmp_path):
        fixture_path = tmp_path / "f.json"
        fixture_path.write_text(json.dumps(DIARIZE_FIXTURE))
        stdin_text = BackendRequest("diarize", "a.wav").to_line() * 3
        first = self._run(fixture_path, stdin_text)
        second = self._run(fixture_path, stdin_text)
        assert first.stdout == second.stdout
        assert first.returncode == 0

    def test_malformed_line_answered_then_serving_continues(self, tmp_path):
        fixture_path = tmp_path / "f.json"
        fixture_path.write_text(json.dumps(DIARIZE_FIXTURE))
        stdin_text = "this is not json\n" + BackendRequest("diarize", "a.wav").to_line()
        result = self._run(fixture_path, stdin_text)
        lines = [json.loads(l) for l in result.stdout.splitlines()]
        assert lines[0]["status"] == "error"
        assert lines[1]["status"] == "ok"
