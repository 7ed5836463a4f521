import asyncio
import json

import pytest
import yaml

from pr_szz.mcp_server import call_tool, list_tools

from conftest import FIG2


def _call(name, arguments):
    (content,) = asyncio.run(call_tool(name, arguments))
    return json.loads(content.text)


def test_tools_are_listed():
    names = [tool.name for tool in asyncio.run(list_tools())]
    assert names == [
        "run_pipeline",
        "match_fixes",
        "trace_variant",
        "evaluate_results",
        "generate_fixture",
        "test_connection",
    ]


def test_connection():
    reply = _call("test_connection", {})
    assert reply["status"] == "success"
    assert reply["variants"] == ["B", "AG", "MA", "L", "R", "PR", "PR_SELECT"]
    assert "git" in reply["dependencies"]
    assert "dependencies" not in _call("test_connection", {"include_version_info": False})


def test_failures_become_error_records(tmp_path):
    reply = _call("match_fixes", {"config_path": str(tmp_path / "missing.yaml")})
    assert reply["status"] == "error"
    assert reply["error"] == "ConfigError"
    assert reply["exit_code"] == 2
    assert reply["tool"] == "match_fixes"

    assert "Unknown tool" in _call("blame_everything", {})["message"]
    assert _call("trace_variant", {"config_path": "x.yaml", "colour": "blue"})["status"] == "error"


@pytest.mark.integration
def test_fixture_then_pipeline(tmp_path):
    script = tmp_path / "fig2.yaml"
    script.write_text(yaml.safe_dump(FIG2), encoding="utf-8")
    built = _call("generate_fixture", {"script_path": str(script), "target_dir": str(tmp_path / "fig2")})
    assert built["status"] == "success"
    assert set(built["labels"]) >= {"c3", "c7"}

    reply = _call("run_pipeline", {"config_path": built["config_path"], "variants": ["PR"]})
    assert reply["status"] == "success"
    assert reply["stages"]["evaluate"]["inducing"]["PR"]["recall"] == 1.0

    traced = _call("trace_variant", {"config_path": built["config_path"], "variant": "RA"})
    assert traced["error"] == "ConfigError"
