"""Shared fixture scripts.

``fig2`` is the running example: a squashed pull request (#10) introduces a bug in
``B.parse()``, a later squashed pull request (#20) fixes it for Jira ticket PARSE-1 and
names #10 in its description. A mainline commit made after #20 was opened also touches a
line the fix removes.
"""

import copy
import shutil

import pytest

from pr_szz.fixtures import FixtureScript, build_fixture

ALICE = {"name": "alice", "email": "alice@example.invalid"}

A_JAVA = [
    "public class A {",
    "    public void start() {",
    "        int a = 1;",
    "    }",
    "}",
]
B_JAVA = [
    "public class B {",
    "    public int parse(int size, int start) {",
    "        int limit = 10;",
    "        int offset = 0;",
    "        return limit - offset;",
    "    }",
    "",
    "    public String format(int value) {",
    '        return "v" + value;',
    "    }",
    "}",
]
C_JAVA = [
    "public class C {",
    "    public void run() {",
    '        System.out.println("run");',
    "    }",
    "}",
]
D_JAVA = [
    "public class D {",
    "    public int size() {",
    "        return 1;",
    "    }",
    "",
    "    public int count() {",
    "        return 2;",
    "    }",
    "}",
]


def _replace(path, find, new):
    return {"op": "edit_lines", "path": path, "find": find, "replace": [new]}


FIG2 = {
    "project_id": "fig2",
    "jira_keys": ["PARSE"],
    "actions": [
        {
            "kind": "commit",
            "label": "c1",
            "message": "Initial import",
            "changes": [
                {"op": "create_file", "path": "A.java", "lines": A_JAVA},
                {"op": "create_file", "path": "B.java", "lines": B_JAVA},
                {"op": "create_file", "path": "C.java", "lines": C_JAVA},
                {"op": "create_file", "path": "D.java", "lines": D_JAVA},
            ],
        },
        {
            "kind": "commit",
            "label": "c2",
            "message": "Start with two",
            "changes": [_replace("A.java", "int a = 1;", "        int a = 2;")],
        },
        {"kind": "open_pr", "number": 10, "title": "Parser limits", "strategy": "squash"},
        {
            "kind": "commit",
            "label": "s1",
            "pr": 10,
            "message": "Add b to start",
            "changes": [
                {
                    "op": "edit_lines",
                    "path": "A.java",
                    "find": "int a = 2;",
                    "insert_after": ["        int b = 3;"],
                }
            ],
        },
        {
            "kind": "commit",
            "label": "s2",
            "pr": 10,
            "message": "Limit parsing by size",
            "changes": [_replace("B.java", "int limit = 10;", "        int limit = size;")],
        },
        {
            "kind": "commit",
            "label": "s3",
            "pr": 10,
            "message": "Prefix formatted values",
            "changes": [_replace("B.java", 'return "v" + value;', '        return "value=" + value;')],
        },
        {"kind": "merge_pr", "number": 10, "label": "c3"},
        {
            "kind": "commit",
            "label": "c4",
            "message": "Make A executable",
            "changes": [{"op": "chmod_file", "path": "A.java"}],
        },
        {
            "kind": "open_pr",
            "number": 20,
            "title": "PARSE-1: Clamp parser bounds",
            "description": "Fixes regression introduced in (#10).",
            "strategy": "squash",
            "assignee": "alice",
        },
        {
            "kind": "commit",
            "label": "c5",
            "message": "Offset from start",
            "changes": [_replace("B.java", "int offset = 0;", "        int offset = start;")],
        },
        {
            "kind": "file_ticket",
            "system": "jira",
            "key": "PARSE-1",
            "title": "parse() overflows for large inputs",
            "labels": ["Bug"],
            "assignee": "alice",
            "links": [{"ref": "PullRequest:20", "kind": "remote"}],
        },
        {
            "kind": "commit",
            "label": "c6",
            "message": "Size three",
            "changes": [_replace("D.java", "return 1;", "        return 3;")],
        },
        {
            "kind": "commit",
            "label": "f1",
            "pr": 20,
            "author": ALICE,
            "message": "PARSE-1: clamp parser bounds",
            "changes": [
                _replace("B.java", "int limit = size;", "        int limit = Math.min(size, MAX);"),
                _replace("B.java", "int offset = start;", "        int offset = Math.max(start, 0);"),
            ],
        },
        {
            "kind": "commit",
            "label": "f2",
            "pr": 20,
            "message": "Louder run",
            "changes": [_replace("C.java", 'System.out.println("run");', '        System.out.println("running");')],
        },
        {
            "kind": "merge_pr",
            "number": 20,
            "label": "c7",
            "changes": [_replace("D.java", "return 2;", "        return 4;")],
        },
        {"kind": "close_ticket", "ref": "JiraIssue:PARSE-1"},
    ],
    "truth": {"fixing": {"JiraIssue:PARSE-1": "c7"}, "inducing": {"c7": ["c3"]}},
}


@pytest.fixture
def fig2_data():
    """A fresh, mutable copy of the running example script."""
    return copy.deepcopy(FIG2)


@pytest.fixture(scope="session")
def fig2(tmp_path_factory):
    """The running example, built once; treat it as read-only."""
    return build_fixture(FixtureScript.parse(FIG2), tmp_path_factory.mktemp("fig2") / "fixture")


@pytest.fixture
def fig2_copy(fig2, tmp_path):
    """A private copy of the running example for tests that write outputs."""
    target = tmp_path / "fixture"
    shutil.copytree(fig2.root, target)
    return target


@pytest.fixture
def make_fixture(tmp_path):
    """Build a fixture from a script mapping into a fresh directory."""
    counter = {"n": 0}

    def build(data, name=None):
        counter["n"] += 1
        return build_fixture(FixtureScript.parse(data), tmp_path / (name or f"fixture{counter['n']}"))

    return build
