"""
Bug-fix matching.

For each distinct bug the fixing pull request is chosen by confidence scoring over the
merged pull requests linked to it, then the fixing VCS commit among the commits that
carry the pull request. Bugs without a usable pull request fall back to commit-message
matching, which on its own is also the B-SZZ baseline.
"""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence

from pydantic import BaseModel, Field, computed_field, model_validator

from .forge_models import IssueRef, IssueSystem, PullRequest, Snapshot
from .links import DistinctBug, LinkContext, LinkGraph, LinkPatterns, extract_text_links
from .reconstruct import InnerCommitMap
from .vcs import RepositoryHandle

logger = logging.getLogger(__name__)


class FixVia(str, Enum):
    PR_LINK = "PrLink"
    MESSAGE_MATCH = "MessageMatch"
    NONE = "None"


class ConfidenceScore(BaseModel):
    reasons: List[str] = Field(default_factory=list)

    @computed_field
    @property
    def value(self) -> int:
        return len(self.reasons)


class FixRecord(BaseModel):
    bug: IssueRef
    aliases: List[IssueRef] = Field(default_factory=list)
    fixing_commit: Optional[str] = None
    fixing_pr: Optional[IssueRef] = None
    via: FixVia = FixVia.NONE
    score: Optional[ConfidenceScore] = None

    @model_validator(mode="before")
    @classmethod
    def drop_computed(cls, data):
        # value is derived from reasons; accept it back from JSON without complaint
        if isinstance(data, dict) and isinstance(data.get("score"), dict):
            data = {**data, "score": {k: v for k, v in data["score"].items() if k != "value"}}
        return data

    @model_validator(mode="after")
    def check_via(self) -> "FixRecord":
        if self.via == FixVia.PR_LINK and self.fixing_pr is None:
            raise ValueError("a PrLink fix needs its fixing pull request")
        if self.via == FixVia.NONE and self.fixing_commit is not None:
            raise ValueError("an unmatched bug cannot carry a fixing commit")
        return self

    @property
    def is_mapped(self) -> bool:
        return self.fixing_commit is not None


def _time_distance(bug: DistinctBug, pr: PullRequest) -> int:
    distance = abs(pr.created_at - bug.created_at)
    if pr.closed_at is not None and bug.closed_at is not None:
        distance += abs(pr.closed_at - bug.closed_at)
    return distance


def _same_person(a: Optional[str], b: Optional[str]) -> bool:
    return bool(a) and bool(b) and a.strip().lower() == b.strip().lower()


def score_fixing_pr(
    bug: DistinctBug,
    pr: PullRequest,
    graph: LinkGraph,
    candidates: Optional[Sequence[PullRequest]] = None,
) -> ConfidenceScore:
    """Four independent conditions, one point each.

    Time proximity is comparative: it holds for the candidate(s) nearest to the bug and is
    granted when there is nothing to compare against.
    """
    reasons = []
    if any(graph.has_edge(pr.ref, alias) for alias in bug.aliases):
        reasons.append("pr_links_bug")
    if any(graph.has_edge(alias, pr.ref) for alias in bug.aliases):
        reasons.append("bug_links_pr")
    if _same_person(pr.assignee, bug.assignee):
        reasons.append("assignee_match")
    others = list(candidates or [])
    if len(others) <= 1 or _time_distance(bug, pr) <= min(_time_distance(bug, c) for c in others):
        reasons.append("nearest_in_time")
    return ConfidenceScore(reasons=reasons)


def select_fixing_pr(
    bug: DistinctBug, candidates: Sequence[PullRequest], graph: LinkGraph
) -> Optional[PullRequest]:
    if not candidates:
        return None
    if len(candidates) == 1:
        return candidates[0]

    def closed_gap(pr: PullRequest) -> int:
        if pr.closed_at is None or bug.closed_at is None:
            return 2**62
        return abs(pr.closed_at - bug.closed_at)

    ranked = sorted(
        candidates,
        key=lambda pr: (
            -score_fixing_pr(bug, pr, graph, candidates).value,
            closed_gap(pr),
            pr.number,
        ),
    )
    logger.debug(f"{bug.canonical}: fixing PR #{ranked[0].number} chosen of {len(candidates)}")
    return ranked[0]


def mentions_ref(message: str, ref: IssueRef) -> bool:
    if ref.system == IssueSystem.JIRA_ISSUE:
        pattern = rf"(?<![A-Za-z0-9_\-]){re.escape(ref.key)}(?![A-Za-z0-9_])"
    else:
        pattern = rf"#{re.escape(ref.key)}(?![0-9A-Za-z_])"
    return re.search(pattern, message or "") is not None


def _is_author(assignee: Optional[str], name: str, email: str) -> bool:
    if not assignee:
        return False
    local_part = email.split("@", 1)[0]
    return _same_person(assignee, name) or _same_person(assignee, local_part)


def select_fixing_commit(
    bug: DistinctBug, commits: Iterable[str], repo: RepositoryHandle
) -> Optional[str]:
    """Pick one commit among several candidates for the same bug.

    Points for authorship by the assignee, a message naming the bug, and being the most
    recent candidate before the bug was closed. Ties go to the newest commit, then the
    smallest id.
    """
    distinct = sorted(set(commits))
    if not distinct:
        return None
    if len(distinct) == 1:
        return distinct[0]

    info = {c: repo.commit(c) for c in distinct}
    eligible = [c for c in distinct if bug.closed_at is None or info[c].commit_time <= bug.closed_at]
    latest = max(eligible, key=lambda c: (info[c].commit_time, c)) if eligible else None

    def score(commit_id: str) -> int:
        commit = info[commit_id]
        points = 0
        if _is_author(bug.assignee, commit.author_name, commit.author_email):
            points += 1
        if any(mentions_ref(commit.message, alias) for alias in bug.aliases):
            points += 1
        if commit_id == latest:
            points += 1
        return points

    return min(distinct, key=lambda c: (-score(c), -info[c].commit_time, c))


class MessageIndex:
    """Commits whose message references a ticket, keyed by ticket."""

    def __init__(
        self,
        repo: RepositoryHandle,
        project_keys: Iterable[str] = (),
        patterns: Optional[LinkPatterns] = None,
    ):
        self._by_key: Dict[tuple, List[str]] = {}
        project_keys = list(project_keys)
        for commit in repo.reachable_commits():
            refs = extract_text_links(commit.message, LinkContext.GITHUB, (), patterns)
            refs += extract_text_links(commit.message, LinkContext.JIRA, project_keys, patterns)
            for ref in refs:
                self._by_key.setdefault(self._key(ref), []).append(commit.id)

    @staticmethod
    def _key(ref: IssueRef) -> tuple:
        # issues and pull requests share GitHub's number space
        if ref.system == IssueSystem.JIRA_ISSUE:
            return ("jira", ref.key)
        return ("github", ref.key)

    def commits_for(self, refs: Iterable[IssueRef]) -> List[str]:
        found: List[str] = []
        for ref in refs:
            for commit in self._by_key.get(self._key(ref), []):
                if commit not in found:
                    found.append(commit)
        return found


def linked_pull_requests(
    bug: DistinctBug, snapshot: Snapshot, graph: LinkGraph
) -> List[PullRequest]:
    """Snapshot pull requests linked to any alias of the bug, or the bug itself if it is one."""
    refs: List[IssueRef] = []
    for alias in bug.aliases:
        if alias.system == IssueSystem.PULL_REQUEST:
            refs.append(alias)
        for node in graph.neighbors(alias):
            if isinstance(node, IssueRef) and node.system == IssueSystem.PULL_REQUEST:
                refs.append(node)
    linked = [snapshot.entity(ref) for ref in sorted(set(refs), key=lambda r: r.sort_key())]
    return [pr for pr in linked if isinstance(pr, PullRequest)]


def fixing_pr_candidates(
    bug: DistinctBug,
    snapshot: Snapshot,
    graph: LinkGraph,
    inner_maps: Dict[IssueRef, InnerCommitMap],
) -> List[PullRequest]:
    """Merged pull requests linked to the bug whose commits reached the repository."""
    candidates = []
    for pr in linked_pull_requests(bug, snapshot, graph):
        ref = pr.ref
        if not pr.merged:
            continue
        pr_map = inner_maps.get(ref)
        if pr_map is None or not (pr_map.mapped_commits or pr_map.resolving_commit):
            logger.debug(f"{bug.canonical}: PR #{ref.key} has no commits in the repository")
            continue
        candidates.append(pr)
    return candidates


def pr_commit_candidates(pr_map: InnerCommitMap) -> List[str]:
    mapped = pr_map.mapped_commits
    if mapped:
        return mapped
    return [pr_map.resolving_commit] if pr_map.resolving_commit else []


def match_fix(
    bug: DistinctBug,
    snapshot: Snapshot,
    repo: RepositoryHandle,
    graph: LinkGraph,
    inner_maps: Dict[IssueRef, InnerCommitMap],
    message_index: MessageIndex,
) -> FixRecord:
    aliases = list(bug.aliases)
    linked = linked_pull_requests(bug, snapshot, graph)
    if linked and not any(pr.merged for pr in linked):
        # only accepted pull requests fix a bug
        logger.debug(f"{bug.canonical}: every linked pull request is unmerged")
        return FixRecord(bug=bug.canonical, aliases=aliases)
    candidates = fixing_pr_candidates(bug, snapshot, graph, inner_maps)
    pr = select_fixing_pr(bug, candidates, graph)
    if pr is not None:
        commit = select_fixing_commit(bug, pr_commit_candidates(inner_maps[pr.ref]), repo)
        if commit is not None:
            return FixRecord(
                bug=bug.canonical,
                aliases=aliases,
                fixing_commit=commit,
                fixing_pr=pr.ref,
                via=FixVia.PR_LINK,
                score=score_fixing_pr(bug, pr, graph, candidates),
            )

    matched = message_index.commits_for(bug.aliases)
    if matched:
        return FixRecord(
            bug=bug.canonical,
            aliases=aliases,
            fixing_commit=select_fixing_commit(bug, matched, repo),
            via=FixVia.MESSAGE_MATCH,
        )
    return FixRecord(bug=bug.canonical, aliases=aliases)


def match_all_fixes(
    bugs: Sequence[DistinctBug],
    snapshot: Snapshot,
    repo: RepositoryHandle,
    graph: LinkGraph,
    inner_maps: Dict[IssueRef, InnerCommitMap],
    project_keys: Iterable[str] = (),
    patterns: Optional[LinkPatterns] = None,
    jobs: int = 1,
) -> List[FixRecord]:
    index = MessageIndex(repo, project_keys, patterns)
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        records = list(
            pool.map(lambda bug: match_fix(bug, snapshot, repo, graph, inner_maps, index), bugs)
        )
    counts = {via: sum(1 for r in records if r.via == via) for via in FixVia}
    logger.info(
        f"Matched fixes for {len(records)} bugs: {counts[FixVia.PR_LINK]} via pull request, "
        f"{counts[FixVia.MESSAGE_MATCH]} via message, {counts[FixVia.NONE]} unmatched"
    )
    return records


def match_all_fixes_bszz(
    bugs: Sequence[DistinctBug],
    repo: RepositoryHandle,
    project_keys: Iterable[str] = (),
    patterns: Optional[LinkPatterns] = None,
) -> List[FixRecord]:
    """Message-only matching; the newest referencing commit wins."""
    index = MessageIndex(repo, project_keys, patterns)
    records = []
    for bug in bugs:
        matched = index.commits_for(bug.aliases)
        if not matched:
            records.append(FixRecord(bug=bug.canonical, aliases=list(bug.aliases)))
            continue
        newest = max(matched, key=lambda c: (repo.commit(c).commit_time, c))
        records.append(
            FixRecord(
                bug=bug.canonical,
                aliases=list(bug.aliases),
                fixing_commit=newest,
                via=FixVia.MESSAGE_MATCH,
            )
        )
    mapped = sum(1 for r in records if r.is_mapped)
    logger.info(f"B-SZZ message matching mapped {mapped} of {len(records)} bugs")
    return records


def fixing_coverage(records: Sequence[FixRecord]) -> Dict[str, Dict[str, float]]:
    """Share of bugs with a fixing commit, per source system and combined."""
    buckets: Dict[str, List[bool]] = {system.value: [] for system in IssueSystem}
    buckets["combined"] = []
    for record in records:
        systems = {alias.system.value for alias in record.aliases or [record.bug]}
        for system in systems:
            buckets[system].append(record.is_mapped)
        buckets["combined"].append(record.is_mapped)
    return {
        name: {
            "total": len(values),
            "mapped": sum(values),
            "share": round(sum(values) / len(values), 6) if values else 0.0,
        }
        for name, values in buckets.items()
    }
