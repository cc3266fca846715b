import json
import sys

import pytest

from diarkit.segio import Annotation, Segment

MOCK_BACKEND_MODULE = [sys.executable, "-m", "diarkit.cli", "mock-backend"]


def mock_backend_command(fixture_path, record_path=None):
    command = MOCK_BACKEND_MODULE + ["--fixture", str(fixture_path)]
    if record_path is not None:
        command += ["--record-requests", str(record_path)]
    return command


@pytest.fixture
def make_backend(tmp_path):
    """Write a fixture file and return the command line serving it."""
    counter = {"n": 0}

    def make(fixture: dict, record_path=None):
        counter["n"] += 1
        path = tmp_path / f"backend_fixture_{counter['n']}.json"
        path.write_text(json.dumps(fixture), encoding="utf-8")
        return mock_backend_command(path, record_path)

    return make


def ann(recording_id, *triples):
    """Shorthand: ann('r', (0, 1, 'A'), ...) -> Annotation."""
    return Annotation(recording_id, [Segment(s, e, spk) for s, e, spk in triples])


def segments_wire(*triples):
    """Wire-format segment list for fixture responses."""
    return [{"start": s, "end": e, "speaker": spk} for s, e, spk in triples]


def assert_annotation_close(actual, expected, tolerance=1e-9):
    assert actual.recording_id == expected.recording_id
    assert len(actual.segments) == len(expected.segments)
    for got, want in zip(actual.segments, expected.segments):
        assert got.speaker == want.speaker
        assert abs(got.start - want.start) <= tolerance, (got, want)
        assert abs(got.end - want.end) <= tolerance, (got, want)
