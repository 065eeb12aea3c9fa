import json

import pytest

from src.cli import CLI
from src.main import main
from src.pipeline import SESSION_STAGES


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "offloading.env"
    path.write_text(
        f"LOG_FILE={tmp_path / 'cli.log'}\nSHOW_PROGRESS=false\nMAX_CONCURRENCY=1\nRETRY_DELAY_MS=0\n",
        encoding="utf-8",
    )
    return str(path)


def _run(config_file, out, *args):
    return main(["--config", config_file, "--out", str(out), *args])


def test_stages_for_commands():
    cli = CLI()
    parser = cli.build_parser()
    assert cli.stages_for(parser.parse_args(["report", "s"])) == SESSION_STAGES
    assert cli.stages_for(parser.parse_args(["label", "s"])) == ("label",)
    assert cli.stages_for(parser.parse_args(["--stages", "ingest,induce", "report", "s"])) == ("ingest", "induce")


def test_replay_and_record_flags_are_exclusive():
    with pytest.raises(SystemExit):
        CLI().build_parser().parse_args(["--replay", "a.json", "--record", "b.json", "ingest", "s"])


def test_ingest_succeeds(session_factory, config_file, tmp_path, capsys):
    session = session_factory()
    out = tmp_path / "out"
    assert _run(config_file, out, "ingest", str(session)) == 0
    ingest = json.loads((out / "p01" / "ingest.json").read_text(encoding="utf-8"))
    assert ingest["events"] == 6
    assert ingest["frames"] == 5
    assert "=== Participants ===" in capsys.readouterr().out


def test_missing_prerequisite_exits_3(session_factory, config_file, tmp_path):
    session = session_factory()
    assert _run(config_file, tmp_path / "out", "score", str(session)) == 3


def test_compare_without_scores_exits_3(session_factory, config_file, tmp_path):
    session = session_factory()
    assert _run(config_file, tmp_path / "out", "compare", str(session)) == 3


def test_unknown_stage_exits_2(session_factory, config_file, tmp_path):
    session = session_factory()
    assert _run(config_file, tmp_path / "out", "--stages", "ingest,dream", "report", str(session)) == 2


def test_missing_replay_bundle_exits_2(session_factory, config_file, tmp_path):
    session = session_factory()
    assert _run(config_file, tmp_path / "out", "--replay", str(tmp_path / "missing.json"), "ingest", str(session)) == 2


def test_missing_session_exits_6(config_file, tmp_path):
    assert _run(config_file, tmp_path / "out", "ingest", str(tmp_path / "nowhere")) == 6


def test_record_mode_writes_bundle(session_factory, config_file, tmp_path):
    session = session_factory()
    bundle = tmp_path / "bundle.json"
    assert _run(config_file, tmp_path / "out", "--record", str(bundle), "ingest", str(session)) == 0
    assert json.loads(bundle.read_text(encoding="utf-8"))["version"] == 1


def test_missing_config_file_exits_2(session_factory, tmp_path):
    session = session_factory()
    assert main(["--config", str(tmp_path / "nope.env"), "ingest", str(session)]) == 2


def test_unknown_task_exits_6(session_factory, config_file, tmp_path):
    session = session_factory(task="chess", with_workflow=False)
    assert _run(config_file, tmp_path / "out", "ingest", str(session)) == 6
