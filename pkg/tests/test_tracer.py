import pytest

from pr_szz.config import load_config
from pr_szz.errors import ConfigError
from pr_szz.fixes import match_all_fixes
from pr_szz.forge_models import InnerCommit, IssueRef, IssueTicket, PrState, PullRequest
from pr_szz.links import DistinctBug, LinkGraph, Provenance
from pr_szz.pipeline import Analysis
from pr_szz.reconstruct import InnerCommitMap, MergeStrategy
from pr_szz.tracer import (
    VARIANTS,
    Level,
    RejectionReason,
    RejectionRuleSet,
    Selection,
    Suspect,
    TraceContext,
    applicability,
    get_variant,
    mark_secured,
    reject_suspects,
    run_variant,
    secured_only,
    select_inducing,
)

BUG = IssueRef.jira("KAFKA-1")
A, B, C, D = ("a" * 40, "b" * 40, "c" * 40, "d" * 40)


def _bug():
    ticket = IssueTicket(ref=BUG, labels=["Bug"], status="Resolved", resolution="Fixed", created_at=100, closed_at=300)
    return DistinctBug(canonical=BUG, aliases=(BUG,), ticket=ticket)


def _fixing_pr():
    return PullRequest(
        ref=IssueRef.pull(9),
        created_at=50,
        closed_at=200,
        state=PrState.CLOSED,
        merged=True,
        inner_commits=[InnerCommit(hash="e" * 40)],
    )


def _suspects():
    return [
        Suspect(commit=A, commit_time=40),
        Suspect(commit=B, commit_time=60),
        Suspect(commit=C, commit_time=150),
        Suspect(commit=D, commit_time=10),
    ]


FIX_MAP = InnerCommitMap(IssueRef.pull(9), MergeStrategy.SQUASH, [("e" * 40, D)], D)


def test_rejection_rules_apply_in_order():
    rules = RejectionRuleSet(temporal=True, pr_temporal=True, inside_fix_pr=True)
    reasons = [s.rejected_reason for s in reject_suspects(_suspects(), _bug(), _fixing_pr(), rules, FIX_MAP)]
    assert reasons == [
        None,
        RejectionReason.AFTER_PR_CREATED,
        RejectionReason.AFTER_PR_CREATED,
        RejectionReason.INSIDE_FIX_PR,
    ]

    plain = reject_suspects(_suspects(), _bug(), _fixing_pr(), RejectionRuleSet())
    assert [s.rejected_reason for s in plain] == [None, None, RejectionReason.AFTER_BUG_REPORT, None]


def test_linked_pull_requests_secure_their_commits():
    graph = LinkGraph()
    graph.add_edge(IssueRef.pull(9), IssueRef.pull(3), Provenance.TEXT_MATCH, "description")
    graph.add_edge(IssueRef.pull(4), IssueRef.pull(9), Provenance.MENTION, "mentions")
    owners = {A: IssueRef.pull(3), C: IssueRef.pull(4)}

    temporal = reject_suspects(_suspects(), _bug(), _fixing_pr(), RejectionRuleSet())
    secured = mark_secured(temporal, _fixing_pr(), graph, owners)
    assert [(s.secured, s.rejected_reason) for s in secured] == [
        (True, None),
        (False, None),
        (True, None),
        (False, None),
    ]
    assert secured[0].owner_pr == IssueRef.pull(3)

    # a secured suspect still cannot postdate the fixing pull request
    strict = reject_suspects(_suspects(), _bug(), _fixing_pr(), RejectionRuleSet(pr_temporal=True))
    secured = mark_secured(strict, _fixing_pr(), graph, owners)
    assert secured[2].rejected_reason == RejectionReason.AFTER_PR_CREATED
    assert not secured[2].secured


def test_secured_only_outranks_the_rest():
    suspects = [
        Suspect(commit=A, commit_time=40, secured=True),
        Suspect(commit=B, commit_time=60),
        Suspect(commit=C, commit_time=70, rejected_reason=RejectionReason.AFTER_BUG_REPORT),
    ]
    reasons = [s.rejected_reason for s in secured_only(suspects)]
    assert reasons == [None, RejectionReason.OUTRANKED_BY_SECURED, RejectionReason.AFTER_BUG_REPORT]
    assert secured_only(suspects[1:]) == suspects[1:]


def test_selection_strategies():
    suspects = [
        Suspect(commit=A, commit_time=40, secured=True),
        Suspect(commit=B, commit_time=60),
        Suspect(commit=C, commit_time=90, rejected_reason=RejectionReason.AFTER_BUG_REPORT),
    ]
    assert select_inducing(suspects, Selection.RECENT) == B
    assert select_inducing(suspects, Selection.PR_SELECT) == A
    assert select_inducing(suspects[2:], Selection.RECENT) is None
    with pytest.raises(ValueError):
        select_inducing(suspects, Selection.LARGEST)


def test_variants():
    assert list(VARIANTS) == ["B", "AG", "MA", "L", "R", "PR", "PR_SELECT"]
    assert get_variant("PR_SELECT").selection == Selection.PR_SELECT
    with pytest.raises(ConfigError):
        get_variant("RA")
    with pytest.raises(ValueError):
        Suspect(commit=A, commit_time=1, secured=True, rejected_reason=RejectionReason.INSIDE_FIX_PR)


def _context(fixture):
    config = load_config(fixture.config_path)
    analysis = Analysis.prepare(config)
    fixes = match_all_fixes(
        analysis.bugs, analysis.snapshot, analysis.repo, analysis.graph, analysis.inner_maps, config.project_keys
    )
    context = TraceContext(
        repo=analysis.repo,
        snapshot=analysis.snapshot,
        graph=analysis.graph,
        inner_maps=analysis.inner_maps,
        bugs={bug.canonical: bug for bug in analysis.bugs},
    )
    return context, fixes


def _trace(fixture, name):
    context, fixes = _context(fixture)
    (result,) = run_variant(VARIANTS[name], fixes, context)
    return result


@pytest.fixture(scope="module")
def fig2_results(fig2):
    context, fixes = _context(fig2)
    return {name: run_variant(variant, fixes, context) for name, variant in VARIANTS.items()}


@pytest.mark.integration
class TestRunningExample:
    def test_pr_szz(self, fig2_results, fig2):
        labels = fig2.labels
        (result,) = fig2_results["PR"]
        assert result.fix == labels["c7"]
        assert result.base == labels["c6"]
        assert result.fixing_pr == IssueRef.pull(20)
        assert result.filters_applied == ["F1", "F2", "F3"]
        suspects = {s.commit: s for s in result.suspects}
        assert set(suspects) == {labels["c3"], labels["c5"]}
        assert suspects[labels["c3"]].secured
        assert suspects[labels["c3"]].owner_pr == IssueRef.pull(10)
        assert suspects[labels["c5"]].rejected_reason == RejectionReason.AFTER_PR_CREATED
        assert result.live_commits() == [labels["c3"]]
        assert result.selected is None

    def test_pr_szz_narrows_to_the_inner_commit_and_method(self, fig2_results, fig2):
        labels = fig2.labels
        (result,) = fig2_results["PR"]
        assert result.inner_restricted
        by_level = {entry.level: entry for entry in result.fine_grained}
        assert by_level[Level.COMMIT].inner_commits == [labels["s2"]]
        assert by_level[Level.FILE].path == "B.java"
        method = by_level[Level.METHOD]
        assert method.method_header == "public int parse(int size, int start)"
        assert method.method_span == (2, 6)
        assert method.fix_method_header == method.method_header

    def test_pr_select(self, fig2_results, fig2):
        (result,) = fig2_results["PR_SELECT"]
        assert result.selected == fig2.labels["c3"]

    @pytest.mark.parametrize("name", ["B", "AG", "MA"])
    def test_baselines_keep_every_origin(self, fig2_results, fig2, name):
        labels = fig2.labels
        (result,) = fig2_results[name]
        assert result.base == labels["c6"]
        assert result.filters_applied == []
        assert sorted(result.live_commits()) == sorted([labels["c1"], labels["c3"], labels["c5"]])
        assert not any(s.secured for s in result.suspects)
        assert not result.inner_restricted

    def test_largest_and_most_recent_selection(self, fig2_results, fig2):
        labels = fig2.labels
        (largest,) = fig2_results["L"]
        (recent,) = fig2_results["R"]
        assert largest.selected == labels["c1"]
        assert recent.selected == labels["c5"]
        assert {e.inducing_commit for e in recent.fine_grained} == {labels["c5"]}

    def test_baseline_fine_grained_entries(self, fig2_results, fig2):
        (result,) = fig2_results["B"]
        c1 = fig2.labels["c1"]
        files = sorted(e.path for e in result.fine_grained if e.level == Level.FILE and e.inducing_commit == c1)
        methods = sorted(
            e.method_header for e in result.fine_grained if e.level == Level.METHOD and e.inducing_commit == c1
        )
        assert files == ["C.java", "D.java"]
        assert methods == ["public int count()", "public void run()"]

    def test_applicability(self, fig2_results):
        counts = applicability(fig2_results["PR"])
        assert counts == {"f1": 1, "f2": 1, "f3": 1, "size_threshold": 0, "s1": 1, "s2": 1, "s3": 1}
        assert set(applicability(fig2_results["B"]).values()) == {0}


CALC = [
    "public class Calc {",
    "    public int scale(int x) {",
    "        return x * 3;",
    "    }",
    "}",
]


def _ticket_and_fix(find, message):
    return [
        {"kind": "file_ticket", "system": "github", "key": "1", "title": "Wrong scale", "labels": ["bug"]},
        {
            "kind": "commit",
            "label": "fix",
            "message": message,
            "changes": [{"op": "edit_lines", "path": "Calc.java", "find": find, "replace": ["        return x * 2;"]}],
        },
        {"kind": "close_ticket", "ref": "GithubIssue:1"},
    ]


COSMETIC = {
    "project_id": "cosmetic",
    "actions": [
        {
            "kind": "commit",
            "label": "c1",
            "message": "Add calc",
            "changes": [{"op": "create_file", "path": "Calc.java", "lines": CALC}],
        },
        {
            "kind": "commit",
            "label": "c2",
            "message": "Explain the factor",
            "changes": [
                {
                    "op": "edit_lines",
                    "path": "Calc.java",
                    "find": "return x * 3;",
                    "replace": ["        return x * 3; // triple"],
                }
            ],
        },
        *_ticket_and_fix("return x * 3; // triple", "Scale by two, fixes #1"),
    ],
}


@pytest.mark.integration
def test_cosmetic_changes_are_looked_through(make_fixture):
    fixture = make_fixture(COSMETIC)
    assert _trace(fixture, "B").live_commits() == [fixture.labels["c2"]]
    assert _trace(fixture, "AG").live_commits() == [fixture.labels["c1"]]


EVIL_MERGE = {
    "project_id": "evil-merge",
    "actions": [
        {
            "kind": "commit",
            "label": "c1",
            "message": "Add calc",
            "changes": [
                {"op": "create_file", "path": "Calc.java", "lines": CALC},
                {"op": "create_file", "path": "NOTES.txt", "lines": ["notes"]},
            ],
        },
        {"kind": "open_pr", "number": 5, "title": "Notes", "strategy": "merge"},
        {
            "kind": "commit",
            "label": "p1",
            "pr": 5,
            "message": "More notes",
            "changes": [{"op": "edit_lines", "path": "NOTES.txt", "find": "notes", "insert_after": ["more"]}],
        },
        {
            "kind": "merge_pr",
            "number": 5,
            "label": "m1",
            "changes": [
                {"op": "edit_lines", "path": "Calc.java", "find": "return x * 3;", "replace": ["        return x * 4;"]}
            ],
        },
        *_ticket_and_fix("return x * 4;", "Scale by two, fixes #1"),
    ],
}


@pytest.mark.integration
def test_meta_filter_looks_through_merge_commits(make_fixture):
    fixture = make_fixture(EVIL_MERGE)
    labels = fixture.labels
    assert _trace(fixture, "B").live_commits() == [labels["m1"]]
    assert _trace(fixture, "AG").live_commits() == [labels["m1"]]
    assert _trace(fixture, "MA").live_commits() == [labels["c1"]]
