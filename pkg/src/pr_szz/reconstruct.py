"""
Reconstruction of pull request integration.

Works out how each merged pull request reached the repository (merge commit, rebase or
squash) and maps its inner commits to the VCS commits that carry them.
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from .errors import NotMerged, StrategyUnknown
from .forge_models import InnerCommit, IssueRef, PullRequest, Snapshot
from .vcs import Commit, RepositoryHandle

logger = logging.getLogger(__name__)

SQUASH_SUFFIX = re.compile(r"\(#(\d+)\)\s*$")


class MergeStrategy(str, Enum):
    MERGE_COMMIT = "MergeCommit"
    REBASE = "Rebase"
    SQUASH = "Squash"
    UNKNOWN = "Unknown"


@dataclass
class InnerCommitMap:
    pr: IssueRef
    strategy: MergeStrategy
    pairs: List[Tuple[str, Optional[str]]] = field(default_factory=list)
    resolving_commit: Optional[str] = None
    last_before: Optional[str] = None
    first_after: Optional[str] = None

    @property
    def mapped_commits(self) -> List[str]:
        """Distinct mapped VCS commits in inner-commit order."""
        seen: List[str] = []
        for _, commit in self.pairs:
            if commit is not None and commit not in seen:
                seen.append(commit)
        return seen

    @property
    def pr_commits(self) -> Set[str]:
        commits = set(self.mapped_commits)
        if self.resolving_commit:
            commits.add(self.resolving_commit)
        return commits

    def inner_hashes_for(self, commit: str) -> List[str]:
        return [inner for inner, mapped in self.pairs if mapped == commit]


def normalize_line(text: str) -> str:
    return " ".join(text.split())


class CommitIndex:
    """Lookup tables over reachable commits used for squash and rebase matching."""

    def __init__(self, repo: RepositoryHandle):
        self.repo = repo
        self.commits: List[Commit] = repo.reachable_commits()
        self.by_signature: Dict[Tuple[str, str], List[str]] = {}
        self.by_squash_suffix: Dict[int, List[str]] = {}
        for commit in self.commits:
            if commit.is_merge:
                continue
            signature = (commit.author_email.lower(), normalize_line(commit.first_line))
            self.by_signature.setdefault(signature, []).append(commit.id)
            match = SQUASH_SUFFIX.search(commit.first_line)
            if match:
                self.by_squash_suffix.setdefault(int(match.group(1)), []).append(commit.id)

    def squash_candidates(self, pr: PullRequest) -> List[str]:
        candidates = set(self.by_squash_suffix.get(pr.number, []))
        inner_lines = [normalize_line(c.first_line) for c in pr.inner_commits if c.first_line]
        if len(inner_lines) >= 2:
            for commit in self.commits:
                if commit.is_merge or commit.commit_time < pr.created_at:
                    continue
                message = normalize_line(commit.message)
                if all(line in message for line in inner_lines):
                    candidates.add(commit.id)
        return sorted(candidates)

    def squash_commit(self, pr: PullRequest) -> Optional[str]:
        """The single commit matching a squash signature, preferring the forge's merge commit."""
        candidates = self.squash_candidates(pr)
        if pr.merge_commit in candidates:
            return pr.merge_commit
        return candidates[0] if len(candidates) == 1 else None

    def _overlap(self, inner: InnerCommit, commit_id: str) -> int:
        paths = set(inner.paths())
        if not paths:
            return 0
        changed = {d.path for d in self.repo.first_parent_diff(commit_id)}
        return len(paths & changed)

    def rebase_matches(self, pr: PullRequest) -> List[Tuple[str, Optional[str]]]:
        used: Set[str] = set()
        pairs = []
        for inner in pr.inner_commits:
            if self.repo.is_reachable(inner.hash):
                used.add(inner.hash)
                pairs.append((inner.hash, inner.hash))
                continue
            signature = (inner.author_email.lower(), normalize_line(inner.first_line))
            candidates = [c for c in self.by_signature.get(signature, []) if c not in used]
            if not candidates:
                pairs.append((inner.hash, None))
                continue
            if len(candidates) > 1:
                candidates.sort(
                    key=lambda c: (
                        abs(self.repo.commit(c).author_time - inner.author_time),
                        -self._overlap(inner, c),
                        c,
                    )
                )
            used.add(candidates[0])
            pairs.append((inner.hash, candidates[0]))
        return pairs


def detect_strategy(
    pr: PullRequest, repo: RepositoryHandle, index: Optional[CommitIndex] = None
) -> MergeStrategy:
    if not pr.merged:
        raise NotMerged(pr.ref.key)
    index = index or CommitIndex(repo)

    if pr.merge_commit and repo.is_reachable(pr.merge_commit):
        if repo.commit(pr.merge_commit).is_merge:
            return MergeStrategy.MERGE_COMMIT
    if all(repo.is_reachable(inner.hash) for inner in pr.inner_commits):
        return MergeStrategy.MERGE_COMMIT

    squash = index.squash_commit(pr)
    if len(pr.inner_commits) >= 2 and squash is not None:
        return MergeStrategy.SQUASH
    if any(commit is not None for _, commit in index.rebase_matches(pr)):
        return MergeStrategy.REBASE
    if squash is not None:
        return MergeStrategy.SQUASH
    return MergeStrategy.UNKNOWN


def map_inner_commits(
    pr: PullRequest,
    repo: RepositoryHandle,
    strategy: MergeStrategy,
    index: Optional[CommitIndex] = None,
) -> InnerCommitMap:
    index = index or CommitIndex(repo)
    hashes = [inner.hash for inner in pr.inner_commits]

    if strategy == MergeStrategy.MERGE_COMMIT:
        pairs = [(h, h if repo.is_reachable(h) else None) for h in hashes]
        resolving = pr.merge_commit if repo.is_reachable(pr.merge_commit) else None
        if resolving is None:
            mapped = [c for _, c in pairs if c is not None]
            resolving = mapped[-1] if mapped else None
        return InnerCommitMap(pr.ref, strategy, pairs, resolving)

    if strategy == MergeStrategy.SQUASH:
        squash = index.squash_commit(pr)
        if squash is None:
            raise StrategyUnknown(pr.ref.key)
        return InnerCommitMap(pr.ref, strategy, [(h, squash) for h in hashes], squash)

    if strategy == MergeStrategy.REBASE:
        pairs = index.rebase_matches(pr)
        mapped = [c for _, c in pairs if c is not None]
        if not mapped:
            raise StrategyUnknown(pr.ref.key)
        return InnerCommitMap(pr.ref, strategy, pairs, mapped[-1])

    raise StrategyUnknown(pr.ref.key)


def boundary_commits(
    pr: PullRequest, repo: RepositoryHandle, pr_map: InnerCommitMap
) -> Tuple[Optional[str], Optional[str]]:
    """(last commit before the pull request, first mainline commit after it)."""
    members = pr_map.pr_commits
    mapped = pr_map.mapped_commits
    start = mapped[0] if mapped else pr_map.resolving_commit
    if start is None:
        return None, None

    last_before = start
    while last_before is not None and last_before in members:
        last_before = repo.first_parent(last_before)

    first_after = None
    resolving = pr_map.resolving_commit
    if resolving is not None:
        mainline = repo.mainline()
        if resolving in mainline:
            later = mainline[mainline.index(resolving) + 1 :]
        else:
            later = repo.children(resolving)
        first_after = next((c for c in later if c not in members), None)
    return last_before, first_after


def reconstruct_all(snapshot: Snapshot, repo: RepositoryHandle) -> Dict[IssueRef, InnerCommitMap]:
    """Inner commit maps for every merged pull request; failures become Unknown maps."""
    index = CommitIndex(repo)
    maps: Dict[IssueRef, InnerCommitMap] = {}
    for pr in snapshot.pulls:
        if not pr.merged:
            continue
        strategy = detect_strategy(pr, repo, index)
        if strategy == MergeStrategy.UNKNOWN:
            logger.warning(f"Merge strategy of pull request #{pr.ref.key} is unknown")
            resolving = pr.merge_commit if repo.is_reachable(pr.merge_commit) else None
            maps[pr.ref] = InnerCommitMap(
                pr.ref, strategy, [(inner.hash, None) for inner in pr.inner_commits], resolving
            )
            continue
        pr_map = map_inner_commits(pr, repo, strategy, index)
        pr_map.last_before, pr_map.first_after = boundary_commits(pr, repo, pr_map)
        maps[pr.ref] = pr_map
        logger.debug(
            f"Pull request #{pr.ref.key}: {strategy.value}, "
            f"{len(pr_map.mapped_commits)} mapped commits, resolving {pr_map.resolving_commit}"
        )
    counts: Dict[str, int] = {}
    for pr_map in maps.values():
        counts[pr_map.strategy.value] = counts.get(pr_map.strategy.value, 0) + 1
    logger.info(f"Reconstructed {len(maps)} merged pull requests: {counts}")
    return maps
