"""
Reduction of a fixing commit's change to the files worth tracing.

f1 moves the diff base out of the fixing pull request, f2 keeps files touched by its inner
commits, f3 keeps the files of the inner commit that actually fixes the bug, and a size
threshold drops outlier fixes altogether.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set

from .errors import NoAncestorOutsidePr
from .fixes import FixRecord, mentions_ref
from .forge_models import InnerCommit, IssueRef, PullRequest, Snapshot
from .links import DistinctBug
from .reconstruct import InnerCommitMap, MergeStrategy
from .vcs import ChangeKind, FileDiff, RepositoryHandle

logger = logging.getLogger(__name__)

MAX_FILES = 100
MAX_LINES = 10000


class Filter(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    SIZE_THRESHOLD = "SizeThreshold"


@dataclass
class SizeCheck:
    passed: bool
    files: List[FileDiff]
    reason: Optional[str] = None


@dataclass
class FilteredFix:
    fix: FixRecord
    fixing_commit: str
    base: Optional[str]
    files: List[FileDiff]
    filters_applied: Set[Filter] = field(default_factory=set)
    rejected: Optional[str] = None
    inner_commit: Optional[str] = None
    pr: Optional[PullRequest] = None
    pr_map: Optional[InnerCommitMap] = None

    @property
    def paths(self) -> List[str]:
        return [d.path for d in self.files]


def diff_base_f1(
    repo: RepositoryHandle, fix_commit: str, pr_map: Optional[InnerCommitMap]
) -> Optional[str]:
    """Nearest first-parent ancestor outside the fixing pull request."""
    if pr_map is None or fix_commit not in pr_map.pr_commits:
        return repo.first_parent(fix_commit)
    members = pr_map.pr_commits
    current = fix_commit
    while current in members:
        parent = repo.first_parent(current)
        if parent is None:
            raise NoAncestorOutsidePr(fix_commit)
        current = parent
    return current


def filter_files_f2(fix_diff: Sequence[FileDiff], pr: PullRequest) -> List[FileDiff]:
    """Keep files touched by any inner commit; a no-op without forge file lists."""
    if not pr.inner_files_available():
        return list(fix_diff)
    touched = {path for inner in pr.inner_commits for path in inner.paths()}
    return [d for d in fix_diff if d.new_path in touched or d.old_path in touched]


def _inner_is_by(inner: InnerCommit, assignee: Optional[str]) -> bool:
    if not assignee:
        return False
    wanted = assignee.strip().lower()
    local_part = inner.author_email.split("@", 1)[0].lower()
    return wanted in (inner.author_name.strip().lower(), local_part)


def select_inner_fix(pr: PullRequest, bug: DistinctBug) -> Optional[InnerCommit]:
    """The inner commit most likely to fix the bug, scored like fixing commits."""
    inner = list(pr.inner_commits)
    if not inner:
        return None
    eligible = [c for c in inner if bug.closed_at is None or c.author_time <= bug.closed_at]
    latest = max(eligible, key=lambda c: (c.author_time, c.hash)) if eligible else None

    def score(commit: InnerCommit) -> int:
        points = int(_inner_is_by(commit, bug.assignee))
        points += int(any(mentions_ref(commit.message, alias) for alias in bug.aliases))
        points += int(latest is not None and commit.hash == latest.hash)
        return points

    return min(inner, key=lambda c: (-score(c), -c.author_time, c.hash))


def f3_applies(pr: Optional[PullRequest], pr_map: Optional[InnerCommitMap]) -> bool:
    return (
        pr is not None
        and pr_map is not None
        and pr_map.strategy == MergeStrategy.SQUASH
        and len(pr.inner_commits) >= 2
    )


def filter_files_f3(
    fix_diff: Sequence[FileDiff],
    pr: PullRequest,
    pr_map: InnerCommitMap,
    bug: DistinctBug,
) -> List[FileDiff]:
    """Keep only the files of the selected inner fix commit of a squashed pull request."""
    if not f3_applies(pr, pr_map):
        return list(fix_diff)
    chosen = select_inner_fix(pr, bug)
    if chosen is None or chosen.files is None:
        return list(fix_diff)
    paths = set(chosen.paths())
    return [d for d in fix_diff if d.new_path in paths or d.old_path in paths]


def apply_size_threshold(
    fix_diff: Sequence[FileDiff], max_files: int = MAX_FILES, max_lines: int = MAX_LINES
) -> SizeCheck:
    files = list(fix_diff)
    if len(files) > max_files:
        return SizeCheck(False, [], f"{len(files)} files exceed the limit of {max_files}")
    lines = sum(d.removed_count + d.added_count for d in files)
    if lines > max_lines:
        return SizeCheck(False, [], f"{lines} changed lines exceed the limit of {max_lines}")
    return SizeCheck(True, files)


def traceable(diffs: Sequence[FileDiff]) -> List[FileDiff]:
    """Drop binary, content-free and newly added files; none of them has lines to blame."""
    return [
        d
        for d in diffs
        if not d.binary and d.change_kind not in (ChangeKind.META_ONLY, ChangeKind.ADDED)
    ]


def filter_fix(
    fix: FixRecord,
    repo: RepositoryHandle,
    snapshot: Optional[Snapshot],
    inner_maps: Dict[IssueRef, InnerCommitMap],
    bug: DistinctBug,
    use_f1: bool = True,
    use_f2: bool = True,
    use_f3: bool = True,
    size_threshold: bool = True,
    max_files: int = MAX_FILES,
    max_lines: int = MAX_LINES,
) -> Optional[FilteredFix]:
    """Compose f1, f2, f3 and the size threshold; None for an unmatched bug."""
    if fix.fixing_commit is None:
        return None
    commit = fix.fixing_commit
    pr = None
    if fix.fixing_pr is not None and snapshot is not None:
        found = snapshot.entity(fix.fixing_pr)
        pr = found if isinstance(found, PullRequest) else None
    pr_map = inner_maps.get(fix.fixing_pr) if fix.fixing_pr is not None else None

    applied: Set[Filter] = set()
    if use_f1 and pr_map is not None:
        base = diff_base_f1(repo, commit, pr_map)
        applied.add(Filter.F1)
    else:
        base = repo.first_parent(commit)
    files = traceable(repo.diff_commits(base, commit))

    if use_f2 and pr is not None and pr.inner_files_available():
        files = filter_files_f2(files, pr)
        applied.add(Filter.F2)

    inner_commit = None
    if use_f3 and f3_applies(pr, pr_map):
        chosen = select_inner_fix(pr, bug)
        if chosen is not None and chosen.files is not None:
            files = filter_files_f3(files, pr, pr_map, bug)
            inner_commit = chosen.hash
            applied.add(Filter.F3)

    rejected = None
    if size_threshold:
        check = apply_size_threshold(files, max_files, max_lines)
        if not check.passed:
            rejected = check.reason
            files = []
            applied.add(Filter.SIZE_THRESHOLD)

    logger.debug(
        f"{fix.bug}: fix {commit[:10]} base {base[:10] if base else 'root'}, "
        f"{len(files)} files, filters {sorted(f.value for f in applied)}"
    )
    return FilteredFix(
        fix=fix,
        fixing_commit=commit,
        base=base,
        files=files,
        filters_applied=applied,
        rejected=rejected,
        inner_commit=inner_commit,
        pr=pr,
        pr_map=pr_map,
    )
