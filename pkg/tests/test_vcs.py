import git
import pytest

from pr_szz.errors import LineOutOfRange, NotARepository, PathNotPresent, UnknownCommit
from pr_szz.vcs import BlameCache, ChangeKind, format_patch, map_new_to_old, open_repository, parse_diff

MODIFIED = """\
diff --git a/x.txt b/x.txt
index 1111111..2222222 100644
--- a/x.txt
+++ b/x.txt
@@ -2 +2 @@
-old
+new
@@ -5,0 +6,2 @@
+added one
+added two
@@ -9,2 +10,0 @@
-gone one
-gone two
"""

OTHER_KINDS = """\
diff --git a/old name.txt b/new name.txt
similarity index 90%
rename from old name.txt
rename to new name.txt
index 1111111..2222222 100644
--- a/old name.txt
+++ b/new name.txt
@@ -1 +1 @@
-a
+b
diff --git a/run.sh b/run.sh
old mode 100644
new mode 100755
diff --git a/n.txt b/n.txt
new file mode 100644
index 0000000..e69de29
diff --git a/gone.txt b/gone.txt
deleted file mode 100644
index 1111111..0000000
--- a/gone.txt
+++ /dev/null
@@ -1,2 +0,0 @@
-first
-second
diff --git a/img.png b/img.png
index 1111111..2222222 100644
Binary files a/img.png and b/img.png differ
"""


def test_parse_unified_zero_hunks():
    (diff,) = parse_diff(MODIFIED)
    assert diff.change_kind == ChangeKind.MODIFIED
    assert diff.old_path == diff.new_path == "x.txt"
    first, insertion, deletion = diff.hunks
    assert first.removed == ((2, "old"),) and first.added == ((2, "new"),)
    # pure insertion after old line 5
    assert insertion.old_start == 6 and insertion.removed == ()
    assert insertion.added == ((6, "added one"), (7, "added two"))
    # pure deletion, new side continues after line 10
    assert deletion.removed == ((9, "gone one"), (10, "gone two"))
    assert deletion.new_start == 11 and deletion.added == ()
    assert diff.removed_count == 3 and diff.added_count == 3


def test_parse_file_level_changes():
    renamed, chmod, added, deleted, binary = parse_diff(OTHER_KINDS)
    assert renamed.change_kind == ChangeKind.RENAMED
    assert (renamed.old_path, renamed.new_path) == ("old name.txt", "new name.txt")
    assert chmod.change_kind == ChangeKind.META_ONLY
    assert (chmod.old_mode, chmod.new_mode) == ("100644", "100755")
    assert added.change_kind == ChangeKind.ADDED and added.old_path is None
    assert added.new_path == "n.txt"
    assert deleted.change_kind == ChangeKind.DELETED and deleted.new_path is None
    assert deleted.removed_count == 2
    assert binary.binary and binary.change_kind == ChangeKind.META_ONLY


@pytest.mark.parametrize(
    "new_line, old_line",
    [(1, 1), (2, None), (3, 3), (6, None), (7, None), (8, 6), (10, 8), (11, 11)],
)
def test_map_new_to_old(new_line, old_line):
    (diff,) = parse_diff(MODIFIED)
    assert map_new_to_old(diff.hunks, new_line) == old_line


def test_format_patch_uses_forge_hunk_headers():
    (diff,) = parse_diff(MODIFIED)
    patch = format_patch(diff).split("\n")
    assert patch[0] == "@@ -2,1 +2,1 @@"
    assert "@@ -5,0 +6,2 @@" in patch
    assert "@@ -9,2 +10,0 @@" in patch


def test_blame_cache_is_tied_to_repository_state(tmp_path):
    cache = BlameCache()
    key = BlameCache.key("c" * 40, "a.txt", False, False, [])
    cache.put(key, {1: ("d" * 40, 1, "a.txt")})
    path = tmp_path / "blame.json"
    cache.save(path, "state-1")

    stale = BlameCache()
    assert not stale.load(path, "state-2")
    assert len(stale) == 0
    fresh = BlameCache()
    assert fresh.load(path, "state-1")
    assert fresh.get(key) == {1: ("d" * 40, 1, "a.txt")}


def test_open_rejects_plain_directories(tmp_path):
    with pytest.raises(NotARepository) as caught:
        open_repository(tmp_path)
    assert caught.value.exit_code == 2


@pytest.mark.integration
def test_text_that_is_not_utf8_is_replaced(tmp_path):
    raw = git.Repo.init(tmp_path / "latin1")
    bot = git.Actor("Fixture Bot", "fixture@example.invalid")
    source = tmp_path / "latin1" / "menu.txt"
    commits = []
    for content in ("caf\xe9 = 1\n", "caf\xe9 = 2\n"):
        source.write_bytes(content.encode("latin-1"))
        raw.index.add(["menu.txt"])
        commits.append(raw.index.commit("Price caf\xe9", author=bot, committer=bot).hexsha)

    handle = open_repository(tmp_path / "latin1")
    assert handle.file_lines(commits[1], "menu.txt") == ["caf\ufffd = 2"]
    (diff,) = handle.diff_commits(commits[0], commits[1])
    assert diff.hunks[0].added == ((1, "caf\ufffd = 2"),)
    assert handle.commit(commits[1]).first_line == "Price caf\xe9"


@pytest.fixture(scope="module")
def repo(fig2):
    return open_repository(fig2.repo_path)


@pytest.mark.integration
class TestRepositoryHandle:
    def test_history(self, repo, fig2):
        labels = fig2.labels
        assert repo.first_parent(labels["c7"]) == labels["c6"]
        assert repo.commit(labels["c3"]).first_line == "Parser limits (#10)"
        assert repo.head() == labels["c7"]
        assert repo.mainline()[0] == labels["c1"]
        assert repo.mainline()[-1] == labels["c7"]
        assert repo.is_ancestor(labels["c3"], labels["c7"])
        assert not repo.is_ancestor(labels["c7"], labels["c3"])
        assert repo.resolve_prefix(labels["c3"][:12]) == labels["c3"]

    def test_inner_commits_of_squashed_pulls_are_unreachable(self, repo, fig2):
        assert not repo.is_reachable(fig2.labels["s2"])
        assert repo.has_commit(fig2.labels["s2"])

    def test_meta_changes_and_sizes(self, repo, fig2):
        labels = fig2.labels
        assert repo.is_meta_change(labels["c4"])
        assert not repo.is_meta_change(labels["c5"])
        assert repo.change_size(labels["c5"]) == 3
        assert repo.change_size(labels["c4"]) == 0

    def test_file_contents(self, repo, fig2):
        lines = repo.file_lines(fig2.labels["c6"], "B.java")
        assert lines[2].strip() == "int limit = size;"
        assert lines[3].strip() == "int offset = start;"
        assert len(lines) == 11

    def test_blame(self, repo, fig2):
        labels = fig2.labels
        origins = repo.blame_lines(labels["c6"], "B.java", [3, 4])
        assert [(o.line, o.origin_commit) for o in origins] == [(3, labels["c3"]), (4, labels["c5"])]
        assert origins[0].origin_path == "B.java"

    def test_blame_skips_ignored_origins(self, repo, fig2):
        labels = fig2.labels
        origins = repo.blame_lines(
            labels["c6"], "B.java", [3], skip=lambda origin: origin.origin_commit == labels["c3"]
        )
        assert [o.origin_commit for o in origins] == [labels["c1"]]

    def test_line_mapping_across_commits(self, repo, fig2):
        labels = fig2.labels
        assert repo.map_line_across(labels["c7"], labels["c6"], "B.java", 3) is None
        assert repo.map_line_across(labels["c7"], labels["c6"], "B.java", 5) == ("B.java", 5)

    def test_errors(self, repo, fig2):
        labels = fig2.labels
        with pytest.raises(UnknownCommit):
            repo.commit("f" * 40)
        with pytest.raises(PathNotPresent):
            repo.file_lines(labels["c1"], "missing.java")
        with pytest.raises(LineOutOfRange):
            repo.blame_lines(labels["c6"], "B.java", [99])
