"""
Brute-force line-origin oracle.

Replays every first-parent diff from the root commit and records, for each line of a file,
the last commit that added it. On linear histories this is what blame reports; the
fixture generator uses it to check declared ground truth and the tests compare tracing
against it.
"""

import logging
from typing import Dict, List, Optional, Set, Tuple

from .vcs import ChangeKind, RepositoryHandle

logger = logging.getLogger(__name__)


class BlameOracle:
    def __init__(self, repo: RepositoryHandle):
        self.repo = repo
        self._memo: Dict[Tuple[str, str], List[str]] = {}

    def chain(self, at: str) -> List[str]:
        chain = []
        current: Optional[str] = at
        while current is not None:
            chain.append(current)
            current = self.repo.first_parent(current)
        return list(reversed(chain))

    def origins(self, at: str, path: str) -> List[str]:
        """Origin commit of every line of ``path`` at ``at``, in line order."""
        cached = self._memo.get((at, path))
        if cached is not None:
            return cached
        chain = self.chain(at)
        start = 0
        lines: List[str] = []
        for index in range(len(chain) - 1, -1, -1):
            known = self._memo.get((chain[index], path))
            if known is not None:
                start, lines = index + 1, list(known)
                break
        for commit in chain[start:]:
            lines = self._apply(commit, path, lines)
            self._memo[(commit, path)] = list(lines)
        return self._memo[(at, path)]

    def _apply(self, commit: str, path: str, lines: List[str]) -> List[str]:
        for diff in self.repo.first_parent_diff(commit):
            if path not in (diff.old_path, diff.new_path):
                continue
            if diff.new_path != path:
                return []
            if diff.old_path != path:
                parent = self.repo.first_parent(commit)
                lines = list(self.origins(parent, diff.old_path)) if diff.old_path and parent else []
            if diff.change_kind == ChangeKind.META_ONLY:
                return lines
            updated = list(lines)
            for hunk in sorted(diff.hunks, key=lambda h: h.old_start, reverse=True):
                index = hunk.old_start - 1
                updated[index : index + len(hunk.removed)] = [commit] * len(hunk.added)
            return updated
        return lines

    def removed_line_origins(self, fix: str, base: Optional[str] = None) -> Set[str]:
        """Origins of every line the fix removes, looked up at ``base`` (its first parent)."""
        base = base if base is not None else self.repo.first_parent(fix)
        if base is None:
            return set()
        found: Set[str] = set()
        for diff in self.repo.diff_commits(base, fix):
            if diff.old_path is None or diff.change_kind in (ChangeKind.ADDED, ChangeKind.META_ONLY):
                continue
            origins = self.origins(base, diff.old_path)
            for hunk in diff.hunks:
                for line, _ in hunk.removed:
                    found.add(origins[line - 1])
        return found
