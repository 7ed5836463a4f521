#!/usr/bin/env python3
"""
PR-SZZ MCP server.

Exposes the pipeline stages and the fixture generator as MCP tools. Every tool answers
with one JSON text block: the stage summary on success, the error record otherwise.
"""

import asyncio
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import git
from mcp.server import Server
from mcp.types import TextContent, Tool

from . import __version__
from .config import load_config
from .errors import PrSzzError
from .fixtures import build_fixture
from .pipeline import Pipeline
from .tracer import VARIANTS

logger = logging.getLogger(__name__)

SERVER_NAME = "pr-szz"

app = Server(SERVER_NAME)

_CONFIG_PATH = {"type": "string", "description": "Path to the project configuration (YAML)"}


@app.list_tools()
async def list_tools() -> List[Tool]:
    """List available MCP tools."""
    return [
        Tool(
            name="run_pipeline",
            description="Run match, trace and (with ground truth) evaluate for one project.",
            inputSchema={
                "type": "object",
                "properties": {
                    "config_path": _CONFIG_PATH,
                    "variants": {
                        "type": "array",
                        "items": {"type": "string", "enum": list(VARIANTS)},
                        "description": "Variants to trace; defaults to the configured ones",
                    },
                    "truth_path": {"type": "string", "description": "Ground truth JSON"},
                },
                "required": ["config_path"],
            },
        ),
        Tool(
            name="match_fixes",
            description="Map every resolved bug of the snapshot to its fixing commit.",
            inputSchema={
                "type": "object",
                "properties": {"config_path": _CONFIG_PATH},
                "required": ["config_path"],
            },
        ),
        Tool(
            name="trace_variant",
            description="Trace bug-inducing commits with one SZZ variant and write its datasets.",
            inputSchema={
                "type": "object",
                "properties": {
                    "config_path": _CONFIG_PATH,
                    "variant": {"type": "string", "enum": list(VARIANTS)},
                },
                "required": ["config_path", "variant"],
            },
        ),
        Tool(
            name="evaluate_results",
            description="Score fixing and inducing predictions against ground truth.",
            inputSchema={
                "type": "object",
                "properties": {
                    "config_path": _CONFIG_PATH,
                    "truth_path": {"type": "string", "description": "Ground truth JSON"},
                },
                "required": ["config_path"],
            },
        ),
        Tool(
            name="generate_fixture",
            description="Build a synthetic repository, snapshot and ground truth from a fixture script.",
            inputSchema={
                "type": "object",
                "properties": {
                    "script_path": {"type": "string", "description": "Fixture script (YAML)"},
                    "target_dir": {"type": "string", "description": "Directory to create"},
                },
                "required": ["script_path", "target_dir"],
            },
        ),
        Tool(
            name="test_connection",
            description="Check that the server and its dependencies are available.",
            inputSchema={
                "type": "object",
                "properties": {
                    "include_version_info": {"type": "boolean", "default": True},
                },
            },
        ),
    ]


def _reply(payload: Dict[str, Any]) -> List[TextContent]:
    return [TextContent(type="text", text=json.dumps(payload, indent=2, sort_keys=True))]


async def _stage(work: Callable[[], Dict[str, Any]]) -> List[TextContent]:
    result = await asyncio.to_thread(work)
    return _reply({"status": "success", **result})


@app.call_tool()
async def call_tool(name: str, arguments: Dict[str, Any]) -> List[TextContent]:
    """Handle tool calls."""
    try:
        if name == "test_connection":
            return await test_connection(**arguments)
        elif name == "run_pipeline":
            return await run_pipeline(**arguments)
        elif name == "match_fixes":
            return await match_fixes(**arguments)
        elif name == "trace_variant":
            return await trace_variant(**arguments)
        elif name == "evaluate_results":
            return await evaluate_results(**arguments)
        elif name == "generate_fixture":
            return await generate_fixture(**arguments)
        else:
            raise ValueError(f"Unknown tool: {name}")
    except PrSzzError as e:
        logger.error(f"Tool '{name}' failed: {e.message}")
        return _reply({**e.to_dict(), "tool": name})
    except Exception as e:
        logger.error(f"Error in tool '{name}': {e}")
        return _reply(
            {
                "status": "error",
                "error": type(e).__name__,
                "tool": name,
                "message": f"Tool execution failed: {e}",
                "timestamp": datetime.now().isoformat(),
            }
        )


def _pipeline(config_path: str, truth_path: Optional[str] = None) -> Pipeline:
    overrides = {"truth_path": Path(truth_path)} if truth_path else None
    return Pipeline(load_config(Path(config_path), overrides))


async def run_pipeline(
    config_path: str, variants: Optional[List[str]] = None, truth_path: Optional[str] = None
) -> List[TextContent]:
    pipeline = _pipeline(config_path, truth_path)
    return await _stage(lambda: {"stages": pipeline.run(variants)})


async def match_fixes(config_path: str) -> List[TextContent]:
    pipeline = _pipeline(config_path)
    return await _stage(pipeline.match)


async def trace_variant(config_path: str, variant: str) -> List[TextContent]:
    pipeline = _pipeline(config_path)
    return await _stage(lambda: pipeline.trace([variant]))


async def evaluate_results(config_path: str, truth_path: Optional[str] = None) -> List[TextContent]:
    pipeline = _pipeline(config_path, truth_path)
    return await _stage(pipeline.evaluate)


async def generate_fixture(script_path: str, target_dir: str) -> List[TextContent]:
    def work() -> Dict[str, Any]:
        result = build_fixture(Path(script_path), Path(target_dir))
        return {
            "root": str(result.root),
            "config_path": str(result.config_path),
            "truth_path": str(result.truth_path),
            "labels": result.labels,
        }

    return await _stage(work)


async def test_connection(include_version_info: bool = True) -> List[TextContent]:
    """Test the MCP server connection and dependencies."""
    result: Dict[str, Any] = {
        "status": "success",
        "message": "PR-SZZ server is working",
        "server_name": SERVER_NAME,
        "tools_available": [
            "run_pipeline",
            "match_fixes",
            "trace_variant",
            "evaluate_results",
            "generate_fixture",
            "test_connection",
        ],
        "variants": list(VARIANTS),
        "timestamp": datetime.now().isoformat(),
    }
    if include_version_info:
        result["dependencies"] = {
            "python": f"v{sys.version.split()[0]}",
            "platform": sys.platform,
            "pr_szz": __version__,
            "git": ".".join(str(part) for part in git.Git().version_info),
        }
    logger.info("MCP server test completed successfully")
    return _reply(result)


def main() -> None:
    """Run the MCP server on stdio."""
    from mcp.server.stdio import stdio_server

    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    async def serve():
        logger.info("Starting PR-SZZ MCP server...")
        async with stdio_server() as (read_stream, write_stream):
            await app.run(read_stream, write_stream, app.create_initialization_options())

    try:
        asyncio.run(serve())
    except Exception as e:
        logger.error(f"Failed to start MCP server: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
