import pytest

from pr_szz.config import load_config
from pr_szz.errors import NoAncestorOutsidePr
from pr_szz.filters import (
    Filter,
    apply_size_threshold,
    diff_base_f1,
    f3_applies,
    filter_fix,
    select_inner_fix,
    traceable,
)
from pr_szz.fixes import match_all_fixes
from pr_szz.forge_models import IssueRef
from pr_szz.pipeline import Analysis
from pr_szz.reconstruct import InnerCommitMap, MergeStrategy
from pr_szz.vcs import ChangeKind, parse_diff

from test_vcs import MODIFIED, OTHER_KINDS


def test_size_threshold_counts_files_and_lines():
    (diff,) = parse_diff(MODIFIED)
    assert apply_size_threshold([diff], max_files=1, max_lines=6).passed
    check = apply_size_threshold([diff], max_files=1, max_lines=5)
    assert not check.passed and check.files == []
    assert "6 changed lines" in check.reason
    assert not apply_size_threshold([diff, diff], max_files=1).passed


def test_only_files_with_blamable_lines_are_traced():
    kept = traceable(parse_diff(OTHER_KINDS))
    assert [d.change_kind for d in kept] == [ChangeKind.RENAMED, ChangeKind.DELETED]


@pytest.fixture(scope="module")
def prepared(fig2):
    config = load_config(fig2.config_path)
    analysis = Analysis.prepare(config)
    (fix,) = match_all_fixes(
        analysis.bugs, analysis.snapshot, analysis.repo, analysis.graph, analysis.inner_maps, config.project_keys
    )
    return analysis, fix


@pytest.mark.integration
class TestRunningExample:
    def _filter(self, prepared, **flags):
        analysis, fix = prepared
        return filter_fix(
            fix, analysis.repo, analysis.snapshot, analysis.inner_maps, analysis.bugs[0], **flags
        )

    def test_all_filters(self, prepared, fig2):
        filtered = self._filter(prepared)
        assert filtered.fixing_commit == fig2.labels["c7"]
        assert filtered.base == fig2.labels["c6"]
        assert filtered.paths == ["B.java"]
        assert filtered.filters_applied == {Filter.F1, Filter.F2, Filter.F3}
        assert filtered.inner_commit == fig2.labels["f1"]
        assert filtered.rejected is None

    def test_without_filters_every_changed_file_is_kept(self, prepared, fig2):
        filtered = self._filter(prepared, use_f1=False, use_f2=False, use_f3=False, size_threshold=False)
        assert filtered.base == fig2.labels["c6"]
        assert sorted(filtered.paths) == ["B.java", "C.java", "D.java"]
        assert filtered.filters_applied == set()

    def test_f2_drops_files_only_the_squash_commit_touched(self, prepared):
        filtered = self._filter(prepared, use_f3=False)
        assert sorted(filtered.paths) == ["B.java", "C.java"]
        assert Filter.F3 not in filtered.filters_applied

    def test_size_threshold_rejects_the_whole_fix(self, prepared):
        filtered = self._filter(prepared, max_lines=3)
        assert filtered.files == []
        assert Filter.SIZE_THRESHOLD in filtered.filters_applied
        assert "4 changed lines" in filtered.rejected

    def test_inner_fix_selection(self, prepared, fig2):
        analysis, _ = prepared
        pr20, pr10 = analysis.snapshot.pull(20), analysis.snapshot.pull(10)
        assert select_inner_fix(pr20, analysis.bugs[0]).hash == fig2.labels["f1"]
        assert f3_applies(pr20, analysis.inner_maps[pr20.ref])
        assert f3_applies(pr10, analysis.inner_maps[pr10.ref])
        assert not f3_applies(None, analysis.inner_maps[pr20.ref])

    def test_diff_base_leaves_the_pull_request(self, prepared, fig2):
        analysis, _ = prepared
        labels = fig2.labels
        pr_map = analysis.inner_maps[IssueRef.pull(20)]
        assert diff_base_f1(analysis.repo, labels["c7"], pr_map) == labels["c6"]
        assert diff_base_f1(analysis.repo, labels["c7"], None) == labels["c6"]
        root = InnerCommitMap(IssueRef.pull(1), MergeStrategy.MERGE_COMMIT, [("e" * 40, labels["c1"])], labels["c1"])
        with pytest.raises(NoAncestorOutsidePr):
            diff_base_f1(analysis.repo, labels["c1"], root)
