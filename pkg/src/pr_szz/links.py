"""
Link graph over tickets, pull requests and commits.

Edges come from forge-native links, platform mentions and regular-expression hits in
titles, descriptions, comments, reviews and commit messages. Transitive edges of depth two
are inferred between tickets and pull requests, and bug tickets reported in several
systems are merged into one distinct bug.
"""

import csv
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx

from .forge_models import ForgeEntity, IssueRef, IssueSystem, IssueTicket, PullRequest, Snapshot
from .reconstruct import InnerCommitMap
from .vcs import RepositoryHandle

logger = logging.getLogger(__name__)

Node = Union[IssueRef, str]

# Closing keyword followed by "#N", or a parenthesised "(#N)" as left by squash merges.
GITHUB_PATTERNS = (
    r"""(?<![A-Za-z0-9_])
        (?:close[sd]?|fix(?:es|ed)?|resolve[sd]?)
        [\s:]*\#(?P<number>\d+)(?![A-Za-z0-9_])""",
    r"""\(\#(?P<number>\d+)\)""",
)
# Project key followed by a number, not embedded in a longer token.
JIRA_TEMPLATE = r"""(?<![A-Za-z0-9_\-])(?P<key>{key}-\d+)(?![A-Za-z0-9_])"""
COMMIT_HASH = re.compile(r"(?<![0-9A-Za-z])(?=[0-9]*[a-f])[0-9a-f]{7,40}(?![0-9A-Za-z])")


class LinkContext(str, Enum):
    GITHUB = "Github"
    JIRA = "Jira"


class Provenance(str, Enum):
    INTEGRATED = "Integrated"
    MENTION = "Mention"
    TEXT_MATCH = "TextMatch"
    TRANSITIVE = "Transitive"


@dataclass
class LinkPatterns:
    """Per-system link patterns; GitHub patterns need a ``number`` group."""

    github: Sequence[str] = GITHUB_PATTERNS
    jira_template: str = JIRA_TEMPLATE
    _compiled: Dict[str, re.Pattern] = field(default_factory=dict, repr=False)

    def github_regexes(self) -> List[re.Pattern]:
        return [self._compile(p, re.IGNORECASE | re.VERBOSE) for p in self.github]

    def jira_regex(self, project_keys: Iterable[str]) -> Optional[re.Pattern]:
        keys = sorted(set(project_keys))
        if not keys:
            return None
        alternation = "(?:" + "|".join(re.escape(k) for k in keys) + ")"
        return self._compile(self.jira_template.replace("{key}", alternation), re.VERBOSE)

    def _compile(self, pattern: str, flags: int) -> re.Pattern:
        cache_key = f"{flags}:{pattern}"
        if cache_key not in self._compiled:
            self._compiled[cache_key] = re.compile(pattern, flags)
        return self._compiled[cache_key]


DEFAULT_PATTERNS = LinkPatterns()


def extract_text_links(
    text: str,
    context_system: LinkContext,
    project_keys: Iterable[str] = (),
    patterns: Optional[LinkPatterns] = None,
) -> List[IssueRef]:
    """Ticket references in ``text``, deduplicated in order of first appearance.

    GitHub numbers are returned as GithubIssue refs; whether ``#N`` is an issue or a pull
    request is decided against the snapshot by the caller.
    """
    if not text:
        return []
    patterns = patterns or DEFAULT_PATTERNS
    hits: List[Tuple[int, IssueRef]] = []
    if context_system == LinkContext.GITHUB:
        for regex in patterns.github_regexes():
            for match in regex.finditer(text):
                hits.append((match.start("number"), IssueRef.github(match.group("number"))))
    else:
        regex = patterns.jira_regex(project_keys)
        if regex is not None:
            for match in regex.finditer(text):
                hits.append((match.start("key"), IssueRef.jira(match.group("key"))))

    found: List[IssueRef] = []
    for _, ref in sorted(hits, key=lambda hit: hit[0]):
        if ref not in found:
            found.append(ref)
    return found


def node_label(node: Node) -> str:
    return node.label if isinstance(node, IssueRef) else f"Commit:{node}"


def node_sort_key(node: Node) -> Tuple:
    if isinstance(node, IssueRef):
        return (0, node.sort_key())
    return (1, node)


@dataclass(frozen=True)
class LinkEdge:
    src: Node
    dst: Node
    provenance: Provenance
    location: str
    kind: Optional[str] = None

    def sort_key(self) -> Tuple:
        return (node_sort_key(self.src), node_sort_key(self.dst), self.provenance.value, self.location)


class LinkGraph:
    """Directed, provenance-tagged multigraph; one edge per (src, dst, provenance, location)."""

    def __init__(self):
        self._graph = nx.MultiDiGraph()

    def add_node(self, node: Node) -> None:
        self._graph.add_node(node)

    def add_edge(
        self, src: Node, dst: Node, provenance: Provenance, location: str, kind: Optional[str] = None
    ) -> bool:
        if src == dst:
            return False
        key = (provenance.value, location)
        if self._graph.has_edge(src, dst, key=key):
            return False
        self._graph.add_edge(src, dst, key=key, provenance=provenance, location=location, kind=kind)
        return True

    def _edge(self, src, dst, data) -> LinkEdge:
        return LinkEdge(src, dst, data["provenance"], data["location"], data.get("kind"))

    def edges(self, provenance: Optional[Provenance] = None) -> List[LinkEdge]:
        found = [
            self._edge(src, dst, data)
            for src, dst, data in self._graph.edges(data=True)
            if provenance is None or data["provenance"] == provenance
        ]
        return sorted(found, key=LinkEdge.sort_key)

    def out_edges(self, node: Node) -> List[LinkEdge]:
        if node not in self._graph:
            return []
        return [self._edge(s, d, data) for s, d, data in self._graph.out_edges(node, data=True)]

    def in_edges(self, node: Node) -> List[LinkEdge]:
        if node not in self._graph:
            return []
        return [self._edge(s, d, data) for s, d, data in self._graph.in_edges(node, data=True)]

    def has_edge(self, src: Node, dst: Node, provenances: Optional[Iterable[Provenance]] = None) -> bool:
        if not self._graph.has_edge(src, dst):
            return False
        if provenances is None:
            return True
        wanted = set(provenances)
        return any(
            data["provenance"] in wanted for data in self._graph.get_edge_data(src, dst).values()
        )

    def linked(self, a: Node, b: Node, provenances: Optional[Iterable[Provenance]] = None) -> bool:
        """True if an edge exists in either direction."""
        provenances = list(provenances) if provenances is not None else None
        return self.has_edge(a, b, provenances) or self.has_edge(b, a, provenances)

    def neighbors(self, node: Node) -> List[Node]:
        if node not in self._graph:
            return []
        found = set(self._graph.successors(node)) | set(self._graph.predecessors(node))
        return sorted(found, key=node_sort_key)

    def nodes(self) -> List[Node]:
        return sorted(self._graph.nodes, key=node_sort_key)

    def __contains__(self, node: Node) -> bool:
        return node in self._graph

    def number_of_edges(self) -> int:
        return self._graph.number_of_edges()


def _resolver(snapshot: Snapshot):
    def resolve(ref: IssueRef) -> IssueRef:
        if ref.system == IssueSystem.GITHUB_ISSUE and snapshot.pull(ref.key) is not None:
            return IssueRef.pull(ref.key)
        return ref

    return resolve


def text_targets(
    text: str,
    snapshot: Snapshot,
    project_keys: Iterable[str],
    patterns: Optional[LinkPatterns] = None,
) -> List[IssueRef]:
    """GitHub and Jira references in ``text`` with ``#N`` resolved against the snapshot."""
    resolve = _resolver(snapshot)
    refs = [resolve(r) for r in extract_text_links(text, LinkContext.GITHUB, (), patterns)]
    refs.extend(extract_text_links(text, LinkContext.JIRA, project_keys, patterns))
    return refs


def hash_mentions(text: str, repo: Optional[RepositoryHandle]) -> List[str]:
    if repo is None or not text:
        return []
    found = []
    for match in COMMIT_HASH.finditer(text):
        commit = repo.resolve_prefix(match.group(0))
        if commit is not None and commit not in found:
            found.append(commit)
    return found


def build_graph(
    snapshot: Snapshot,
    repo: Optional[RepositoryHandle],
    inner_maps: Dict[IssueRef, InnerCommitMap],
    project_keys: Iterable[str] = (),
    patterns: Optional[LinkPatterns] = None,
) -> LinkGraph:
    project_keys = list(project_keys)
    graph = LinkGraph()

    for entity in snapshot.entities():
        ref = entity.ref
        graph.add_node(ref)
        for index, link in enumerate(entity.integrated_links):
            location = f"integrated_links[{index}]"
            graph.add_edge(ref, link.ref, Provenance.INTEGRATED, location, link.kind)
            # forge links other than remote links show on both ends
            if link.kind != "remote":
                graph.add_edge(
                    link.ref, ref, Provenance.INTEGRATED, f"{location}@{ref.label}", link.kind
                )
        for mention in entity.mentions:
            graph.add_edge(mention, ref, Provenance.MENTION, "mentions")
        for commit in entity.commit_mentions:
            if repo is not None and repo.is_reachable(commit):
                graph.add_edge(commit, ref, Provenance.MENTION, "commit_mentions")
        for location, text in entity.text_fields():
            for target in text_targets(text, snapshot, project_keys, patterns):
                graph.add_edge(ref, target, Provenance.TEXT_MATCH, location)
            for commit in hash_mentions(text, repo):
                graph.add_edge(ref, commit, Provenance.TEXT_MATCH, location)
        if isinstance(entity, PullRequest):
            for index, inner in enumerate(entity.inner_commits):
                for target in text_targets(inner.message, snapshot, project_keys, patterns):
                    graph.add_edge(
                        ref, target, Provenance.TEXT_MATCH, f"inner_commits[{index}].message"
                    )

    for pr_ref, pr_map in sorted(inner_maps.items(), key=lambda item: item[0].sort_key()):
        for index, (_, commit) in enumerate(pr_map.pairs):
            if commit is not None:
                graph.add_edge(
                    pr_ref, commit, Provenance.INTEGRATED, f"inner_commits[{index}]", "inner_commit"
                )
        if pr_map.resolving_commit:
            graph.add_edge(
                pr_ref, pr_map.resolving_commit, Provenance.INTEGRATED, "resolving_commit", "resolving"
            )

    if repo is not None:
        for commit in repo.reachable_commits():
            for target in text_targets(commit.message, snapshot, project_keys, patterns):
                graph.add_edge(commit.id, target, Provenance.TEXT_MATCH, "message")

    logger.info(f"Link graph: {len(graph.nodes())} nodes, {graph.number_of_edges()} edges")
    return graph


def add_transitive_edges(graph: LinkGraph) -> LinkGraph:
    """Infer ticket->PR->ticket and ticket->ticket->PR edges from non-transitive edges."""
    direct = [e for e in graph.edges() if e.provenance != Provenance.TRANSITIVE]
    successors: Dict[Node, List[Node]] = {}
    for edge in direct:
        successors.setdefault(edge.src, [])
        if edge.dst not in successors[edge.src]:
            successors[edge.src].append(edge.dst)

    added = 0
    for src in sorted(successors, key=node_sort_key):
        if not (isinstance(src, IssueRef) and src.is_ticket):
            continue
        for middle in successors[src]:
            if not isinstance(middle, IssueRef):
                continue
            for dst in successors.get(middle, []):
                if not isinstance(dst, IssueRef) or dst == src:
                    continue
                if middle.is_ticket == dst.is_ticket:
                    continue
                if graph.add_edge(src, dst, Provenance.TRANSITIVE, f"via {middle.label}"):
                    added += 1
    logger.debug(f"Added {added} transitive edges")
    return graph


@dataclass
class DistinctBug:
    canonical: IssueRef
    aliases: Tuple[IssueRef, ...]
    ticket: IssueTicket
    members: Tuple[ForgeEntity, ...] = ()

    @property
    def created_at(self) -> int:
        return self.ticket.created_at

    @property
    def closed_at(self) -> Optional[int]:
        return self.ticket.closed_at

    @property
    def assignee(self) -> Optional[str]:
        return self.ticket.assignee

    def jira_keys(self) -> List[str]:
        return [a.key for a in self.aliases if a.system == IssueSystem.JIRA_ISSUE]


def _merge_members(members: List[ForgeEntity]) -> IssueTicket:
    canonical = members[0]
    closed = [m.closed_at for m in members if m.closed_at is not None]

    def union(values: Iterable) -> list:
        merged = []
        for value in values:
            if value not in merged:
                merged.append(value)
        return merged

    return IssueTicket(
        ref=canonical.ref,
        title=canonical.title,
        description=canonical.description,
        labels=[label for m in members for label in m.labels],
        status=getattr(canonical, "status", None) or "closed",
        resolution=getattr(canonical, "resolution", None),
        created_at=min(m.created_at for m in members),
        closed_at=max(closed) if closed else None,
        assignee=next((m.assignee for m in members if m.assignee), None),
        comments=[comment for m in members for comment in m.comments],
        integrated_links=union(link for m in members for link in m.integrated_links),
        mentions=union(ref for m in members for ref in m.mentions),
        commit_mentions=union(c for m in members for c in m.commit_mentions),
    )


def merge_duplicate_bugs(
    bug_tickets: Sequence[ForgeEntity], graph: LinkGraph, merge: bool = True
) -> List[DistinctBug]:
    """Group bug tickets describing the same problem into distinct bugs.

    Tickets are joined by Integrated or Mention edges between bugs of different trackers,
    or by any edge whose link kind is "duplicate".
    """
    by_ref = {ticket.ref: ticket for ticket in bug_tickets}
    joined = nx.Graph()
    joined.add_nodes_from(by_ref)
    if merge:
        for edge in graph.edges():
            if edge.src not in by_ref or edge.dst not in by_ref:
                continue
            cross_tracker = edge.src.system.tracker != edge.dst.system.tracker
            linked = edge.provenance in (Provenance.INTEGRATED, Provenance.MENTION)
            if (cross_tracker and linked) or edge.kind == "duplicate":
                joined.add_edge(edge.src, edge.dst)

    bugs = []
    for component in nx.connected_components(joined):
        members = sorted(
            (by_ref[ref] for ref in component),
            key=lambda m: (m.created_at, m.ref.sort_key()),
        )
        bugs.append(
            DistinctBug(
                canonical=members[0].ref,
                aliases=tuple(sorted(component, key=lambda r: r.sort_key())),
                ticket=_merge_members(members),
                members=tuple(members),
            )
        )
    bugs.sort(key=lambda bug: bug.canonical.sort_key())
    merged = sum(1 for bug in bugs if len(bug.aliases) > 1)
    logger.info(f"{len(bug_tickets)} bug tickets -> {len(bugs)} distinct bugs ({merged} merged)")
    return bugs


LINKS_HEADER = ["src_system", "src_key", "dst_system", "dst_key", "provenance", "location"]


def _split(node: Node) -> Tuple[str, str]:
    if isinstance(node, IssueRef):
        return node.system.value, node.key
    return "Commit", node


def write_links_csv(graph: LinkGraph, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(LINKS_HEADER)
        for edge in graph.edges():
            writer.writerow([*_split(edge.src), *_split(edge.dst), edge.provenance.value, edge.location])
