"""Bundle persistence, the HTTP API, and the CLI."""

import json
import hashlib
from pathlib import Path

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from expressforge.bundle import (
    BundleError,
    canonical_dumps,
    load_bundle,
    save_bundle,
    validate_file_dict,
)
from expressforge.cli import main as cli_main
from expressforge.fixtures import REFERENCE_OS_PERCENT, build_demo_bundle
from expressforge.server import create_app


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("bundle")
    save_bundle(build_demo_bundle(), directory)
    return directory


@pytest.fixture()
def client(demo_bundle):
    return TestClient(create_app(bundle=demo_bundle))


def _rehash(directory: Path, name: str) -> None:
    manifest = json.loads((directory / "manifest.json").read_text())
    digest = hashlib.sha256((directory / name).read_text().encode()).hexdigest()
    manifest["files"][name] = digest
    (directory / "manifest.json").write_text(canonical_dumps(manifest))


class TestBundle:
    def test_export_import_export_byte_identical(self, bundle_dir, tmp_path):
        reloaded = load_bundle(bundle_dir)
        out = tmp_path / "again"
        save_bundle(reloaded, out)
        for name in sorted(p.name for p in Path(bundle_dir).iterdir()):
            assert (out / name).read_bytes() == (bundle_dir / name).read_bytes()

    def test_unknown_field_rejected(self, bundle_dir):
        data = json.loads((bundle_dir / "chain.json").read_text())
        data["surprise"] = 1
        errors = validate_file_dict("chain.json", data)
        assert any("surprise" in e for e in errors)

    def test_manifest_hash_mismatch_detected(self, bundle_dir, tmp_path):
        import shutil

        work = tmp_path / "tampered"
        shutil.copytree(bundle_dir, work)
        chain = json.loads((work / "chain.json").read_text())
        chain["name"] = "renamed"
        (work / "chain.json").write_text(canonical_dumps(chain))
        with pytest.raises(BundleError, match="hash mismatch"):
            load_bundle(work)

    def test_dangling_clip_id_listed(self, bundle_dir, tmp_path):
        import shutil

        work = tmp_path / "dangling"
        shutil.copytree(bundle_dir, work)
        codes = json.loads((work / "codes.json").read_text())
        codes["assignments"][0]["clip_id"] = "C-GHOST-P99"
        (work / "codes.json").write_text(canonical_dumps(codes))
        _rehash(work, "codes.json")
        with pytest.raises(BundleError, match="C-GHOST-P99"):
            load_bundle(work)

    def test_missing_file_reported(self, bundle_dir, tmp_path):
        import shutil

        work = tmp_path / "partial"
        shutil.copytree(bundle_dir, work)
        (work / "clips.json").unlink()
        with pytest.raises(BundleError, match="clips.json"):
            load_bundle(work)


class TestSessionApi:
    def test_create_and_get_session(self, client):
        created = client.post("/sessions", json={"participant_id": "P01"})
        assert created.status_code == 200
        state = created.json()
        assert state["phase"] == "tutorial"
        assert len(state["plan"]) == 10
        fetched = client.get(f"/sessions/{state['session_id']}")
        assert fetched.json()["plan"] == state["plan"]

    def test_keyframe_out_of_limits_is_400_naming_joint(self, client):
        sid = client.post("/sessions", json={"participant_id": "P02"}).json()[
            "session_id"
        ]
        bad = client.post(
            f"/sessions/{sid}/keyframes",
            json={"angles_deg": [200, 0, 0, 0, 0, 0]},
        )
        assert bad.status_code == 400
        error = bad.json()["errors"][0]
        assert "j1" in error["message"]
        assert error["path"] == "angles_deg"

    def test_undo_on_single_keyframe_clip_conflicts(self, client):
        sid = client.post("/sessions", json={"participant_id": "P03"}).json()[
            "session_id"
        ]
        client.post(
            f"/sessions/{sid}/keyframes", json={"angles_deg": [0, 0, 0, 0, 0, 0]}
        )
        res = client.post(f"/sessions/{sid}/undo", json={})
        assert res.status_code == 409
        assert "cannot empty" in res.json()["errors"][0]["message"]

    def test_stream_of_500ms_clip_has_26_frames_plus_terminal(self, client):
        sid = client.post("/sessions", json={"participant_id": "P04"}).json()[
            "session_id"
        ]
        client.post(
            f"/sessions/{sid}/keyframes",
            json={"angles_deg": [0, 0, 0, 0, 0, 0], "hold_ms": 200},
        )
        client.post(
            f"/sessions/{sid}/keyframes",
            json={"angles_deg": [9, 0, 0, 0, 0, 0]},
        )
        play = client.post(f"/sessions/{sid}/play", json={}).json()
        assert play["duration_ms"] == 500.0
        assert play["frame_count"] == 26
        stream = client.get(f"/playback/{play['playback_id']}/stream")
        lines = [json.loads(l) for l in stream.text.strip().splitlines()]
        assert len(lines) == 27
        assert lines[-1] == {"done": True}
        assert lines[0]["t_ms"] == 0.0
        assert lines[-2]["t_ms"] == 500.0
        assert len(lines[0]["links_mm"]) == 7  # base + six joints

    def test_full_elicitation_flow(self, client):
        sid = client.post("/sessions", json={"participant_id": "P05"}).json()[
            "session_id"
        ]
        state = client.get(f"/sessions/{sid}").json()
        for _ in state["plan"]:
            client.post(
                f"/sessions/{sid}/keyframes",
                json={"angles_deg": [0, 0, 0, 0, 0, 0]},
            )
            client.post(
                f"/sessions/{sid}/keyframes",
                json={"angles_deg": [10, 0, 0, 0, 0, 0]},
            )
            advanced = client.post(f"/sessions/{sid}/advance", json={})
            assert advanced.status_code == 200
        assert client.get(f"/sessions/{sid}").json()["phase"] == "rate"
        for _ in range(8):
            rated = client.post(
                f"/sessions/{sid}/ratings", json={"values": [50, 60, 70, 80, 90]}
            )
            assert rated.status_code == 200
        assert client.get(f"/sessions/{sid}").json()["phase"] == "done"

    def test_speed_edit_roundtrip(self, client):
        sid = client.post("/sessions", json={"participant_id": "P06"}).json()[
            "session_id"
        ]
        client.post(
            f"/sessions/{sid}/keyframes", json={"angles_deg": [0, 0, 0, 0, 0, 0]}
        )
        client.post(
            f"/sessions/{sid}/keyframes", json={"angles_deg": [30, 0, 0, 0, 0, 0]}
        )
        before = client.get(f"/sessions/{sid}").json()["clip"]["duration_ms"]
        res = client.post(
            f"/sessions/{sid}/speed", json={"index": 1, "speed": "slow"}
        )
        assert res.status_code == 200
        assert res.json()["duration_ms"] == 2 * before

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/S999").status_code == 404

    def test_idempotent_replay_returns_original(self, client):
        sid = client.post("/sessions", json={"participant_id": "P07"}).json()[
            "session_id"
        ]
        body = {
            "angles_deg": [5, 0, 0, 0, 0, 0],
            "request_id": "req-kf-1",
        }
        first = client.post(f"/sessions/{sid}/keyframes", json=body)
        replay = client.post(f"/sessions/{sid}/keyframes", json=body)
        assert first.json() == replay.json()
        assert len(client.get(f"/sessions/{sid}").json()["clip"]["keyframes"]) == 1

    def test_chain_and_fk_endpoints(self, client):
        chain = client.get("/chain").json()
        assert chain["schema"] == "chain/1"
        fk = client.post("/chain/fk", json={"angles_deg": [0, 0, 0, 0, 0, 0]})
        assert fk.status_code == 200
        assert len(fk.json()["links_mm"]) == 7
        bad = client.post("/chain/fk", json={"angles_deg": [999, 0, 0, 0, 0, 0]})
        assert bad.status_code == 400


class TestStudyApi:
    STUDY = "curiosity-verification"

    def test_assign_and_gating_flow(self, client):
        assign = client.post(
            f"/studies/{self.STUDY}/assign", json={"participant_id": "w1"}
        )
        assert assign.status_code == 200
        body = assign.json()
        assert body["category_id"] == "E01"
        assert body["video_uri"].endswith("E01.mp4")
        # vas before interpretation -> 409
        vas = client.post(
            f"/studies/{self.STUDY}/responses/vas",
            json={"participant_id": "w1", "values": [50] * 10},
        )
        assert vas.status_code == 409
        # interpretation before video completion -> 409
        interp = client.post(
            f"/studies/{self.STUDY}/responses/interpretation",
            json={"participant_id": "w1", "text": "curious"},
        )
        assert interp.status_code == 409
        watched = client.post(
            f"/studies/{self.STUDY}/responses/watched",
            json={"participant_id": "w1"},
        )
        assert watched.json()["watch_count"] == 1
        interp = client.post(
            f"/studies/{self.STUDY}/responses/interpretation",
            json={"participant_id": "w1", "text": "curious"},
        )
        assert interp.status_code == 200
        assert interp.json()["stage"] == "vas"
        vas = client.post(
            f"/studies/{self.STUDY}/responses/vas",
            json={
                "participant_id": "w1",
                "values": [50] * 10,
                "attention_answers": [5],
            },
        )
        assert vas.status_code == 200
        assert vas.json()["stage"] == "done"

    def test_participant_state_restores_stage(self, client):
        client.post(f"/studies/{self.STUDY}/assign", json={"participant_id": "w2"})
        client.post(
            f"/studies/{self.STUDY}/responses/watched", json={"participant_id": "w2"}
        )
        state = client.get(f"/studies/{self.STUDY}/participants/w2").json()
        assert state["stage"] == "interpretation"
        assert state["watch_count"] == 1
        assert len(state["battery"]) == 10

    def test_unknown_study_404(self, client):
        res = client.post("/studies/nope/assign", json={"participant_id": "x"})
        assert res.status_code == 404

    def test_assign_replay_with_request_id_is_noop(self, client):
        body = {"participant_id": "w-replay", "request_id": "assign-1"}
        first = client.post(f"/studies/{self.STUDY}/assign", json=body)
        replay = client.post(f"/studies/{self.STUDY}/assign", json=body)
        assert first.json() == replay.json()
        # without the request id the duplicate is a conflict
        bare = client.post(
            f"/studies/{self.STUDY}/assign", json={"participant_id": "w-replay"}
        )
        assert bare.status_code == 409

    def test_validation_error_shape(self, client):
        res = client.post(f"/studies/{self.STUDY}/assign", json={})
        assert res.status_code == 400
        assert res.json()["errors"][0]["path"].endswith("participant_id")


class TestReportsApi:
    def test_os_report_csv_matches_reference_cells(self, client):
        res = client.get("/reports/os", headers={"accept": "text/csv"})
        assert res.status_code == 200
        for category, refs in REFERENCE_OS_PERCENT.items():
            for referent, expected in refs.items():
                assert f"{referent}={expected}" in res.text

    def test_markdown_and_json_variants(self, client):
        md = client.get("/reports/qra", headers={"accept": "text/markdown"})
        assert md.text.startswith("| QRA |")
        js = client.get("/reports/os", headers={"accept": "application/json"})
        assert js.json()["os"]["E01"]["R1"] == 0.25

    def test_taxonomy_report(self, client):
        res = client.get("/reports/taxonomy", headers={"accept": "text/csv"})
        assert "dimension,category,share_percent" in res.text


class TestCli:
    def test_square_n2(self):
        result = CliRunner().invoke(cli_main, ["square", "-n", "2"])
        assert result.exit_code == 0
        assert result.output == "0,1\n1,0\n"

    def test_square_seed_reproducible(self):
        first = CliRunner().invoke(cli_main, ["square", "-n", "4", "--seed", "5"])
        second = CliRunner().invoke(cli_main, ["square", "-n", "4", "--seed", "5"])
        assert first.output == second.output

    def test_analyze_os_matches_reference_table(self, bundle_dir):
        result = CliRunner().invoke(
            cli_main,
            [
                "analyze", "os",
                "--codes", str(bundle_dir / "codes.json"),
                "--clips", str(bundle_dir / "clips.json"),
            ],
        )
        assert result.exit_code == 0
        for category, refs in REFERENCE_OS_PERCENT.items():
            for referent, expected in refs.items():
                assert f"{referent}={expected}" in result.output

    def test_analyze_qra_runs(self, bundle_dir):
        result = CliRunner().invoke(
            cli_main,
            [
                "analyze", "qra",
                "--codes", str(bundle_dir / "codes.json"),
                "--responses", str(bundle_dir / "responses.json"),
                "--format", "md",
            ],
        )
        assert result.exit_code == 0
        assert "| QRA |" in result.output
        assert "R6=100" in result.output

    def test_validate_ok(self, bundle_dir):
        result = CliRunner().invoke(cli_main, ["validate", "--bundle", str(bundle_dir)])
        assert result.exit_code == 0
        assert "bundle ok" in result.output

    def test_validate_dangling_id_exits_1(self, bundle_dir, tmp_path):
        import shutil

        work = tmp_path / "broken"
        shutil.copytree(bundle_dir, work)
        codes = json.loads((work / "codes.json").read_text())
        codes["assignments"][0]["clip_id"] = "C-GHOST-P99"
        (work / "codes.json").write_text(canonical_dumps(codes))
        _rehash(work, "codes.json")
        result = CliRunner().invoke(cli_main, ["validate", "--bundle", str(work)])
        assert result.exit_code == 1
        assert "C-GHOST-P99" in result.output

    def test_validate_missing_dir_exits_2(self, tmp_path):
        result = CliRunner().invoke(
            cli_main, ["validate", "--bundle", str(tmp_path / "nope")]
        )
        assert result.exit_code == 2

    def test_stats_mwu(self, tmp_path):
        (tmp_path / "a.csv").write_text("1\n2\n3\n")
        (tmp_path / "b.csv").write_text("4\n5\n6\n")
        result = CliRunner().invoke(
            cli_main,
            ["stats", "mwu", "--a", str(tmp_path / "a.csv"),
             "--b", str(tmp_path / "b.csv")],
        )
        assert result.exit_code == 0
        assert "U=0" in result.output
        assert "p_two_sided=0.1" in result.output
        assert "method=exact" in result.output

    def test_stats_kw(self, tmp_path):
        rows = "\n".join(
            f"g{i % 3},{i * 7 % 13}.{i}" for i in range(15)
        )
        (tmp_path / "g.csv").write_text(rows + "\n")
        result = CliRunner().invoke(
            cli_main, ["stats", "kw", "--groups", str(tmp_path / "g.csv")]
        )
        assert result.exit_code == 0
        assert result.output.startswith("H=")
        assert "df=2" in result.output

    def test_report_command(self, bundle_dir):
        result = CliRunner().invoke(cli_main, ["report", "--bundle", str(bundle_dir)])
        assert result.exit_code == 0
        for section in (
            "Occurrence scores",
            "Qualitative response accuracy",
            "Taxonomy distribution",
            "Battery medians",
        ):
            assert section in result.output

    def test_report_deterministic(self, bundle_dir):
        runner = CliRunner()
        one = runner.invoke(cli_main, ["report", "--bundle", str(bundle_dir)])
        two = runner.invoke(cli_main, ["report", "--bundle", str(bundle_dir)])
        assert one.output == two.output

    def test_fixture_command(self, tmp_path):
        result = CliRunner().invoke(
            cli_main, ["fixture", "--out", str(tmp_path / "demo")]
        )
        assert result.exit_code == 0
        assert (tmp_path / "demo" / "manifest.json").exists()
