import csv

import pytest

from pr_szz.config import load_config
from pr_szz.forge_models import (
    InnerCommit,
    IntegratedLink,
    IssueRef,
    IssueTicket,
    PrState,
    PullRequest,
    Snapshot,
)
from pr_szz.links import (
    LINKS_HEADER,
    LinkContext,
    LinkGraph,
    Provenance,
    add_transitive_edges,
    build_graph,
    extract_text_links,
    merge_duplicate_bugs,
    text_targets,
    write_links_csv,
)
from pr_szz.pipeline import Analysis


@pytest.mark.parametrize(
    "text, expected",
    [
        ("Fixes #12", [12]),
        ("closes #7 and resolves #8", [7, 8]),
        ("Fixed: #345", [345]),
        ("FIX #9", [9]),
        ("Add parser (#31)", [31]),
        ("fixes #3 (#4)", [3, 4]),
        ("Resolved #10, see (#11)", [10, 11]),
        ("fixes #5 and fixes #5 again", [5]),
        ("prefixes #12", []),
        ("see #12", []),
        ("fixes #12abc", []),
        ("Fixes# 12", []),
        ("(#12a)", []),
        ("issue 12 fixed", []),
        ("fixes GH-12", []),
    ],
)
def test_github_patterns(text, expected):
    found = extract_text_links(text, LinkContext.GITHUB)
    assert found == [IssueRef.github(number) for number in expected]


@pytest.mark.parametrize(
    "text, expected",
    [
        ("KAFKA-9176: Fix NPE", ["KAFKA-9176"]),
        ("[KAFKA-9176] handle null", ["KAFKA-9176"]),
        ("Backport of KAFKA-9176 and PARSE-2", ["KAFKA-9176", "PARSE-2"]),
        ("KAFKA-12/KAFKA-13", ["KAFKA-12", "KAFKA-13"]),
        ("kafka-9176", []),
        ("MYKAFKA-9176", []),
        ("KAFKA-9176a", []),
        ("KAFKA-", []),
        ("OTHER-12", []),
        ("X-KAFKA-12", []),
    ],
)
def test_jira_patterns(text, expected):
    found = extract_text_links(text, LinkContext.JIRA, ["KAFKA", "PARSE"])
    assert found == [IssueRef.jira(key) for key in expected]


def test_jira_patterns_need_project_keys():
    assert extract_text_links("KAFKA-1", LinkContext.JIRA, []) == []


def _ticket(ref, created=100, **extra):
    extra.setdefault("labels", ["bug"])
    extra.setdefault("status", "closed")
    return IssueTicket(ref=ref, created_at=created, **extra)


def _pull(number, created=100, **extra):
    return PullRequest(ref=IssueRef.pull(number), created_at=created, **extra)


def test_text_targets_resolve_numbers_against_the_snapshot():
    snapshot = Snapshot(project_id="p", issues=[_ticket(IssueRef.github(3))], pulls=[_pull(4)])
    refs = text_targets("fixes #3, follow-up to (#4), see KAFKA-2", snapshot, ["KAFKA"])
    assert refs == [IssueRef.github(3), IssueRef.pull(4), IssueRef.jira("KAFKA-2")]


def test_graph_edges_carry_provenance_and_location():
    pr = _pull(
        7,
        title="Fix crash",
        description="fixes #3",
        integrated_links=[IntegratedLink(ref=IssueRef.jira("KAFKA-2"), kind="remote")],
        mentions=[IssueRef.github(3)],
    )
    snapshot = Snapshot(project_id="p", issues=[_ticket(IssueRef.github(3))], pulls=[pr])
    graph = build_graph(snapshot, None, {}, ["KAFKA"])

    assert graph.has_edge(IssueRef.pull(7), IssueRef.github(3), [Provenance.TEXT_MATCH])
    assert graph.has_edge(IssueRef.github(3), IssueRef.pull(7), [Provenance.MENTION])
    assert graph.has_edge(IssueRef.pull(7), IssueRef.jira("KAFKA-2"), [Provenance.INTEGRATED])
    # remote links are only visible on the side that holds them
    assert not graph.has_edge(IssueRef.jira("KAFKA-2"), IssueRef.pull(7))
    locations = {e.location for e in graph.edges(Provenance.TEXT_MATCH)}
    assert locations == {"description"}


def test_add_edge_ignores_self_loops_and_duplicates():
    graph = LinkGraph()
    ref = IssueRef.github(1)
    assert not graph.add_edge(ref, ref, Provenance.MENTION, "mentions")
    assert graph.add_edge(ref, IssueRef.pull(2), Provenance.MENTION, "mentions")
    assert not graph.add_edge(ref, IssueRef.pull(2), Provenance.MENTION, "mentions")
    assert graph.add_edge(ref, IssueRef.pull(2), Provenance.TEXT_MATCH, "title")
    assert graph.number_of_edges() == 2


def test_transitive_edges_join_tickets_and_pulls():
    graph = LinkGraph()
    bug, pr, other = IssueRef.jira("KAFKA-1"), IssueRef.pull(5), IssueRef.github(9)
    graph.add_edge(bug, other, Provenance.INTEGRATED, "integrated_links[0]")
    graph.add_edge(other, pr, Provenance.TEXT_MATCH, "title")
    add_transitive_edges(graph)

    edges = graph.edges(Provenance.TRANSITIVE)
    assert [(e.src, e.dst, e.location) for e in edges] == [(bug, pr, "via GithubIssue:9")]


def test_transitive_edges_need_a_ticket_at_the_start():
    graph = LinkGraph()
    graph.add_edge(IssueRef.pull(1), IssueRef.github(2), Provenance.TEXT_MATCH, "title")
    graph.add_edge(IssueRef.github(2), IssueRef.pull(3), Provenance.TEXT_MATCH, "title")
    add_transitive_edges(graph)
    assert graph.edges(Provenance.TRANSITIVE) == []


def test_cross_system_duplicates_merge_into_one_bug():
    github = _ticket(
        IssueRef.github(4),
        created=200,
        integrated_links=[IntegratedLink(ref=IssueRef.jira("KAFKA-9"))],
    )
    jira = _ticket(IssueRef.jira("KAFKA-9"), created=100, status="Resolved", resolution="Fixed")
    snapshot = Snapshot(project_id="p", issues=[github, jira])
    graph = build_graph(snapshot, None, {}, ["KAFKA"])

    bugs = merge_duplicate_bugs([github, jira], graph)
    assert len(bugs) == 1
    assert bugs[0].canonical == IssueRef.jira("KAFKA-9")
    assert bugs[0].aliases == (IssueRef.github(4), IssueRef.jira("KAFKA-9"))
    assert bugs[0].created_at == 100

    separate = merge_duplicate_bugs([github, jira], graph, merge=False)
    assert [bug.canonical for bug in separate] == [IssueRef.github(4), IssueRef.jira("KAFKA-9")]


def test_text_mentions_alone_do_not_merge_bugs():
    first = _ticket(IssueRef.github(1), description="same as KAFKA-3")
    second = _ticket(IssueRef.jira("KAFKA-3"), status="Resolved", resolution="Fixed")
    graph = build_graph(Snapshot(project_id="p", issues=[first, second]), None, {}, ["KAFKA"])
    assert len(merge_duplicate_bugs([first, second], graph)) == 2


def test_pull_requests_and_github_issues_share_a_tracker():
    issue = _ticket(IssueRef.github(3))
    pr = _pull(
        4, labels=["bug"], state=PrState.CLOSED, integrated_links=[IntegratedLink(ref=IssueRef.github(3))]
    )
    graph = build_graph(Snapshot(project_id="p", issues=[issue], pulls=[pr]), None, {})
    assert graph.has_edge(IssueRef.pull(4), IssueRef.github(3), [Provenance.INTEGRATED])

    bugs = merge_duplicate_bugs([issue, pr], graph)
    assert [bug.canonical for bug in bugs] == [IssueRef.github(3), IssueRef.pull(4)]


def test_duplicate_links_merge_within_one_system():
    first = _ticket(IssueRef.github(1))
    second = _ticket(
        IssueRef.github(2), integrated_links=[IntegratedLink(ref=IssueRef.github(1), kind="duplicate")]
    )
    graph = build_graph(Snapshot(project_id="p", issues=[first, second]), None, {})
    bugs = merge_duplicate_bugs([first, second], graph)
    assert [bug.aliases for bug in bugs] == [(IssueRef.github(1), IssueRef.github(2))]


@pytest.mark.integration
def test_running_example_graph(fig2):
    analysis = Analysis.prepare(load_config(fig2.config_path))
    graph = analysis.graph
    labels = fig2.labels
    pr10, pr20, bug = IssueRef.pull(10), IssueRef.pull(20), IssueRef.jira("PARSE-1")

    assert graph.has_edge(pr20, pr10, [Provenance.TEXT_MATCH])
    assert graph.has_edge(pr20, bug, [Provenance.TEXT_MATCH])
    assert graph.has_edge(bug, pr20, [Provenance.INTEGRATED])
    assert graph.has_edge(labels["c7"], bug, [Provenance.TEXT_MATCH])
    assert graph.has_edge(labels["c3"], pr10, [Provenance.TEXT_MATCH])
    assert graph.has_edge(pr10, labels["c3"], [Provenance.INTEGRATED])
    assert [b.canonical for b in analysis.bugs] == [bug]


@pytest.mark.integration
def test_links_csv_lists_every_edge(fig2, tmp_path):
    analysis = Analysis.prepare(load_config(fig2.config_path))
    out = tmp_path / "links.csv"
    write_links_csv(analysis.graph, out)
    with open(out, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == LINKS_HEADER
    assert len(rows) - 1 == analysis.graph.number_of_edges()
    assert ["PullRequest", "20", "PullRequest", "10", "TextMatch", "description"] in rows


def test_pull_request_model_rejects_inconsistent_merge_state():
    with pytest.raises(ValueError):
        PullRequest(ref=IssueRef.pull(1), created_at=1, merged=True, state=PrState.OPEN)
    merged = PullRequest(
        ref=IssueRef.pull(1),
        created_at=1,
        merged=True,
        state=PrState.CLOSED,
        inner_commits=[InnerCommit(hash="a" * 40)],
    )
    assert merged.number == 1
