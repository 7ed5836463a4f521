import json

import pytest

from pr_szz.config import TrackerSystem, Window, load_config
from pr_szz.errors import ConfigError

BASE = """\
project_id: kafka
repo_path: repo
snapshot_dir: snapshot
output_dir: /tmp/pr-szz-out
trackers:
  - system: github
    project: apache/kafka
  - system: jira
    project: KAFKA
"""


def _write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    return path


def test_relative_paths_follow_the_config_file(tmp_path):
    config = load_config(_write(tmp_path, BASE))
    assert config.repo_path == (tmp_path / "repo").resolve()
    assert config.snapshot_dir == (tmp_path / "snapshot").resolve()
    assert str(config.output_dir) == "/tmp/pr-szz-out"
    assert config.project_keys == ["KAFKA"]
    assert config.trackers[0].system == TrackerSystem.GITHUB
    assert config.variants == ["B", "AG", "MA", "L", "R", "PR", "PR_SELECT"]
    assert config.thresholds.max_files == 100


def test_overrides_win_and_none_values_are_ignored(tmp_path):
    out = tmp_path / "elsewhere"
    config = load_config(_write(tmp_path, BASE), {"output_dir": str(out), "jobs": 3, "truth_path": None})
    assert config.output_dir == out
    assert config.jobs == 3
    assert config.truth_path is None


@pytest.mark.parametrize(
    "extra, field",
    [
        ("variants: [B, RA]\n", "variants"),
        ("colour: blue\n", "colour"),
        ("window: {start: '2021-01-01', end: '2020-01-01'}\n", "window"),
        ("patterns: {jira_template: 'no key here'}\n", "patterns.jira_template"),
        ("thresholds: {max_files: 0}\n", "thresholds.max_files"),
    ],
)
def test_invalid_values_name_their_field(tmp_path, extra, field):
    with pytest.raises(ConfigError) as caught:
        load_config(_write(tmp_path, BASE + extra))
    assert caught.value.details["field"] == field
    assert caught.value.exit_code == 2


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "project_id: [unclosed\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "- just\n- a list\n"))


def test_window_accepts_iso_dates_and_epochs():
    window = Window(start="2020-09-13T12:26:40", end=1600003600)
    assert window.as_tuple() == (1600000000, 1600003600)
    with pytest.raises(ValueError):
        Window(start=5, end=5)


def test_flags_alone_can_configure_a_project(tmp_path):
    snapshot = tmp_path / "snapshot"
    snapshot.mkdir()
    (snapshot / "manifest.json").write_text(
        json.dumps({"issues": ["KAFKA-1", "HDFS-3", "KAFKA-2", "12"]}), encoding="utf-8"
    )
    config = load_config(
        None,
        {"repo_path": str(tmp_path / "kafka"), "snapshot_dir": str(snapshot), "output_dir": str(tmp_path / "out")},
    )
    assert config.project_id == "kafka"
    assert config.project_keys == ["HDFS", "KAFKA"]
    assert [t.system for t in config.trackers] == [TrackerSystem.GITHUB, TrackerSystem.JIRA]

    with pytest.raises(ConfigError) as caught:
        load_config(None, {"repo_path": str(tmp_path)})
    assert "snapshot_dir" in caught.value.message
