import json
import shlex
import sys
from pathlib import Path

import pytest

from diarkit.cli import main
from diarkit.segio import parse_segments_json, parse_transcript_json, write_segments_json

from conftest import ann

DATA = Path(__file__).parent / "data"

RTTM_TEXT = (
    "SPEAKER rec1 1 0.500 2.000 <NA> <NA> spkA <NA> <NA>\n"
    "SPEAKER rec1 1 3.000 1.250 <NA> <NA> spkB <NA> <NA>\n"
)


def backend_cmd_string(fixture_path, record_path=None):
    parts = [sys.executable, "-m", "diarkit.cli", "mock-backend", "--fixture", str(fixture_path)]
    if record_path:
        parts += ["--record-requests", str(record_path)]
    return " ".join(shlex.quote(p) for p in parts)


class TestConvert:
    def test_rttm_json_rttm_round_trip_digest_equal(self, tmp_path):
        src = tmp_path / "in.rttm"
        src.write_text(RTTM_TEXT)
        mid = tmp_path / "mid.json"
        back = tmp_path / "back.rttm"
        assert main(["convert", str(src), str(mid)]) == 0
        assert main(["convert", str(mid), str(back)]) == 0
        assert back.read_bytes() == src.read_bytes()

    def test_bad_input_exits_4(self, tmp_path, capsys):
        bad = tmp_path / "bad.rttm"
        bad.write_text("SPEAKER rec1 1 nope 2.0 <NA> <NA> a <NA> <NA>\n")
        assert main(["convert", str(bad), str(tmp_path / "out.json")]) == 4
        assert "line 1" in capsys.readouterr().err

    def test_directory_batch_converts_every_file(self, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        for i in range(3):
            (src / f"rec{i}.json").write_text(
                write_segments_json(ann(f"rec{i}", (0, 1 + i, "A")))
            )
        out = tmp_path / "out"
        assert main(["convert", str(src), str(out), "--to", "rttm"]) == 0
        assert sorted(p.name for p in out.iterdir()) == ["rec0.rttm", "rec1.rttm", "rec2.rttm"]

    def test_missing_input_exits_4(self, tmp_path):
        assert main(["convert", str(tmp_path / "nope.rttm"), str(tmp_path / "o.json")]) == 4


class TestScoreDer:
    def write_pair(self, tmp_path, identical=True):
        ref_dir = tmp_path / "ref"
        hyp_dir = tmp_path / "hyp"
        ref_dir.mkdir()
        hyp_dir.mkdir()
        for rid, segs in (("r1", [(0, 10, "A")]), ("r2", [(0, 5, "A"), (6, 9, "B")])):
            (ref_dir / f"{rid}.json").write_text(write_segments_json(ann(rid, *segs)))
            hyp_segs = segs if identical else segs[:1]
            (hyp_dir / f"{rid}.json").write_text(write_segments_json(ann(rid, *hyp_segs)))
        return ref_dir, hyp_dir

    def test_identical_dirs_score_zero(self, tmp_path, capsys):
        ref_dir, hyp_dir = self.write_pair(tmp_path)
        assert main(["score-der", str(ref_dir), str(hyp_dir)]) == 0
        out = capsys.readouterr().out
        assert "0.000000" in out

    def test_missing_hypothesis_exits_1_naming_id(self, tmp_path, capsys):
        ref_dir, hyp_dir = self.write_pair(tmp_path)
        (hyp_dir / "r2.json").unlink()
        assert main(["score-der", str(ref_dir), str(hyp_dir)]) == 1
        assert "r2" in capsys.readouterr().err

    def test_json_report_schema(self, tmp_path, capsys):
        ref_dir, hyp_dir = self.write_pair(tmp_path, identical=False)
        assert main(["score-der", str(ref_dir), str(hyp_dir), "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report) == {"files", "aggregate"}
        for row in report["files"] + [report["aggregate"]]:
            assert set(row) == {"id", "missed", "false_alarm", "confusion", "total", "der"}
        assert report["files"][0]["id"] == "r1"
        assert report["aggregate"]["id"] == "ALL"
        # r2 hypothesis lost B: 3 s missed out of 18 s total
        assert report["aggregate"]["missed"] == pytest.approx(3.0)

    def test_collar_and_skip_overlap_flags(self, tmp_path):
        ref_dir, hyp_dir = self.write_pair(tmp_path)
        assert main(["score-der", str(ref_dir), str(hyp_dir), "--collar", "0.25", "--skip-overlap"]) == 0

    def test_recording_id_mismatch_exits_1(self, tmp_path):
        ref = tmp_path / "ref.json"
        hyp = tmp_path / "hyp.json"
        ref.write_text(write_segments_json(ann("a", (0, 1, "A"))))
        hyp.write_text(write_segments_json(ann("b", (0, 1, "A"))))
        assert main(["score-der", str(ref), str(hyp)]) == 1


class TestScoreWer:
    def test_text_files_by_stem(self, tmp_path, capsys):
        ref_dir = tmp_path / "ref"
        hyp_dir = tmp_path / "hyp"
        ref_dir.mkdir()
        hyp_dir.mkdir()
        (ref_dir / "r1.txt").write_text("ক খ গ\n")
        (hyp_dir / "r1.txt").write_text("ক গ\n")
        assert main(["score-wer", str(ref_dir), str(hyp_dir), "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["aggregate"]["deletions"] == 1
        assert report["aggregate"]["wer"] == pytest.approx(1 / 3)

    def test_empty_reference_corpus_exits_1(self, tmp_path):
        ref = tmp_path / "r.txt"
        hyp = tmp_path / "h.txt"
        ref.write_text("।\n")  # punctuation only: empty after normalization
        hyp.write_text("ক\n")
        assert main(["score-wer", str(ref), str(hyp)]) == 1


class TestPostprocessCmd:
    def test_zero_params_is_canonical_identity(self, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(write_segments_json(ann("r", (0, 1, "A"), (1.5, 2, "B"), (2.4, 3, "A"))))
        out = tmp_path / "out.json"
        assert main([
            "postprocess", str(src), str(out),
            "--min-duration", "0", "--merge-gap", "0", "--aba-max-duration", "0",
        ]) == 0
        assert out.read_bytes() == src.read_bytes()

    def test_defaults_applied(self, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(
            write_segments_json(ann("r", (0, 5, "A"), (5, 5.2, "B"), (5.2, 10, "A"), (10.3, 10.35, "A")))
        )
        out = tmp_path / "out.json"
        assert main(["postprocess", str(src), str(out)]) == 0
        assert parse_segments_json(out.read_text()) == ann("r", (0, 10, "A"))

    def test_byte_identical_across_runs(self, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(write_segments_json(ann("r", (0, 5, "A"), (5.1, 5.2, "B"))))
        out1 = tmp_path / "out1.json"
        out2 = tmp_path / "out2.json"
        main(["postprocess", str(src), str(out1)])
        main(["postprocess", str(src), str(out2)])
        assert out1.read_bytes() == out2.read_bytes()


class TestDedupCmd:
    def test_text_lines(self, tmp_path):
        src = tmp_path / "in.txt"
        src.write_text("p q p q p q\nok line\n")
        out = tmp_path / "out.txt"
        assert main(["dedup", str(src), str(out)]) == 0
        assert out.read_text() == "p q\nok line\n"

    def test_transcript_json(self, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(
            '{"recording_id":"r","entries":[{"start":0,"end":5,"text":"w w w w"}]}'
        )
        out = tmp_path / "out.json"
        assert main(["dedup", str(src), str(out)]) == 0
        assert parse_transcript_json(out.read_text()).entries[0].text == "w"


class TestChunkPlanCmd:
    def test_plan_written(self, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(
            write_segments_json(ann("r", (0, 10, "A"), (12, 20, "B"), (25, 40, "A")))
        )
        out = tmp_path / "plan.json"
        assert main(["chunk-plan", str(src), str(out), "--chunk-limit", "30"]) == 0
        doc = json.loads(out.read_text())
        assert doc["recording_id"] == "r"
        assert doc["chunks"] == [{"start": 0, "end": 20}, {"start": 25, "end": 40}]


TWO_PASS_FIXTURE = {
    "responses": [
        {
            "op": "diarize",
            "audio_path": "a.wav",
            "num_speakers": None,
            "response": {
                "status": "ok",
                "segments": [
                    {"start": 0, "end": 1, "speaker": "S0"},
                    {"start": 1, "end": 2, "speaker": "S1"},
                ],
            },
        },
        {
            "op": "diarize",
            "audio_path": "a.wav",
            "num_speakers": 2,
            "response": {
                "status": "ok",
                "segments": [
                    {"start": 0, "end": 1.25, "speaker": "S0"},
                    {"start": 1.25, "end": 2, "speaker": "S1"},
                ],
            },
        },
    ]
}


class TestTwoPassCmd:
    def test_expected_segments_json(self, tmp_path):
        fixture = tmp_path / "fixture.json"
        fixture.write_text(json.dumps(TWO_PASS_FIXTURE))
        out = tmp_path / "out.json"
        code = main(
            ["two-pass", "a.wav", str(out), "--backend-cmd", backend_cmd_string(fixture)]
        )
        assert code == 0
        assert parse_segments_json(out.read_text()) == ann("a", (0, 1.25, "S0"), (1.25, 2, "S1"))

    def test_backend_failure_exits_3(self, tmp_path):
        out = tmp_path / "out.json"
        code = main(["two-pass", "a.wav", str(out), "--backend-cmd", "/nonexistent/prog"])
        assert code == 3

    def test_missing_backend_cmd_exits_2(self, tmp_path, monkeypatch):
        monkeypatch.delenv("DIARKIT_BACKEND_CMD", raising=False)
        assert main(["two-pass", "a.wav", str(tmp_path / "o.json")]) == 2

    def test_env_var_backend(self, tmp_path, monkeypatch):
        fixture = tmp_path / "fixture.json"
        fixture.write_text(json.dumps(TWO_PASS_FIXTURE))
        monkeypatch.setenv("DIARKIT_BACKEND_CMD", backend_cmd_string(fixture))
        out = tmp_path / "out.json"
        assert main(["two-pass", "a.wav", str(out)]) == 0


class TestTranscribeCmd:
    def test_regions_to_transcript(self, tmp_path):
        fixture = {
            "responses": [
                {
                    "op": "transcribe",
                    "audio_path": "a.wav",
                    "window": {"start": 0, "end": 10},
                    "response": {"status": "ok", "text": "x x x"},
                }
            ]
        }
        fixture_path = tmp_path / "fixture.json"
        fixture_path.write_text(json.dumps(fixture))
        regions = tmp_path / "regions.json"
        regions.write_text(write_segments_json(ann("a", (0, 10, "S"))))
        out = tmp_path / "out.json"
        code = main(
            [
                "transcribe", "a.wav", str(out),
                "--backend-cmd", backend_cmd_string(fixture_path),
                "--regions", str(regions),
            ]
        )
        assert code == 0
        transcript = parse_transcript_json(out.read_text())
        assert [e.text for e in transcript.entries] == ["x"]


class TestSweepCmd:
    def test_all_reproduces_golden_report(self, tmp_path):
        report = tmp_path / "report.json"
        code = main(
            [
                "sweep", "all",
                "--spec", str(DATA / "sweep_demo" / "spec.json"),
                "--cache-dir", str(tmp_path / "cache"),
                "--backend-cmd", backend_cmd_string(DATA / "sweep_demo" / "fixture.json"),
                "--report", str(report),
            ]
        )
        assert code == 0
        assert report.read_bytes() == (DATA / "golden_sweep_report.json").read_bytes()

    def test_phase3_requires_threshold(self, tmp_path):
        code = main(
            [
                "sweep", "phase3",
                "--spec", str(DATA / "sweep_demo" / "spec.json"),
                "--cache-dir", str(tmp_path / "cache"),
            ]
        )
        assert code == 2

    def test_phase_pipeline_via_flags(self, tmp_path, capsys):
        backend = backend_cmd_string(DATA / "sweep_demo" / "fixture.json")
        spec = str(DATA / "sweep_demo" / "spec.json")
        cache = str(tmp_path / "cache")
        assert main(["sweep", "phase1", "--spec", spec, "--backend-cmd", backend]) == 0
        assert main(["sweep", "phase2", "--spec", spec, "--backend-cmd", backend, "--cache-dir", cache, "--threshold", "0.5"]) == 0
        assert main(["sweep", "phase3", "--spec", spec, "--cache-dir", cache, "--threshold", "0.5"]) == 0
        out = capsys.readouterr().out
        assert "aba_max_duration" in out


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["frobnicate"])
        assert exc_info.value.code == 2

    def test_negative_threshold_exits_2(self, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(write_segments_json(ann("r", (0, 1, "A"))))
        code = main(["postprocess", str(src), str(tmp_path / "o.json"), "--min-duration", "-1"])
        assert code == 2
