"""
Read-only access to a git repository.

Commit graph traversal, unified-zero diffs with rename detection, blame with optional
whitespace blindness, moved-line detection and commit skipping, line-number mapping
across revisions and meta-change detection. All git access goes through GitPython; each
worker thread gets its own ``git.Repo`` so the handle can be shared by a thread pool.
"""

import hashlib
import json
import logging
import re
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import git
from git.exc import GitCommandError, InvalidGitRepositoryError, NoSuchPathError

from .errors import (
    CorruptObjectDatabase,
    LineOutOfRange,
    NotARepository,
    PathNotPresent,
    UnknownCommit,
    VcsError,
)

logger = logging.getLogger(__name__)

EMPTY_TREE = "4b825dc642cb6eb9a060e54bf8d69288fbee4904"

_LOG_FORMAT = "%H%x1f%P%x1f%an%x1f%ae%x1f%at%x1f%ct%x1f%B%x1e"
_COMMIT_ID = re.compile(r"^[0-9a-f]{40}$")
_HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


class ChangeKind(str, Enum):
    ADDED = "Added"
    DELETED = "Deleted"
    MODIFIED = "Modified"
    RENAMED = "Renamed"
    META_ONLY = "MetaOnly"


@dataclass(frozen=True)
class Commit:
    id: str
    parents: Tuple[str, ...]
    author_name: str
    author_email: str
    author_time: int
    commit_time: int
    message: str

    @property
    def is_merge(self) -> bool:
        return len(self.parents) >= 2

    @property
    def first_line(self) -> str:
        return self.message.split("\n", 1)[0].strip()


@dataclass(frozen=True)
class Hunk:
    """A unified-zero hunk.

    A pure insertion has ``old_start`` one past the line it follows; a pure deletion has
    ``new_start`` one past the line it follows. Removed and added line numbers count up
    from their start.
    """

    old_start: int
    removed: Tuple[Tuple[int, str], ...]
    new_start: int
    added: Tuple[Tuple[int, str], ...]


@dataclass(frozen=True)
class FileDiff:
    old_path: Optional[str]
    new_path: Optional[str]
    hunks: Tuple[Hunk, ...]
    change_kind: ChangeKind
    old_mode: Optional[str] = None
    new_mode: Optional[str] = None
    binary: bool = False

    @property
    def path(self) -> str:
        return self.new_path or self.old_path or ""

    @property
    def removed_count(self) -> int:
        return sum(len(hunk.removed) for hunk in self.hunks)

    @property
    def added_count(self) -> int:
        return sum(len(hunk.added) for hunk in self.hunks)


@dataclass(frozen=True)
class LineOrigin:
    path: str
    line: int
    origin_commit: str
    origin_line: int
    origin_path: str


def readable(text: str) -> str:
    """Git output with bytes that are not UTF-8 replaced by U+FFFD."""
    return text.encode("utf-8", "surrogateescape").decode("utf-8", "replace")


# Diff parsing


def _unquote(path: str) -> str:
    if len(path) >= 2 and path.startswith('"') and path.endswith('"'):
        raw = path[1:-1].encode("utf-8").decode("unicode_escape")
        return raw.encode("latin-1").decode("utf-8")
    return path


def _strip_prefix(path: str) -> Optional[str]:
    path = _unquote(path.rstrip("\t"))
    if path == "/dev/null":
        return None
    if path.startswith(("a/", "b/")):
        return path[2:]
    return path


@dataclass
class _FileDiffBuilder:
    header: str
    old_path: Optional[str] = None
    new_path: Optional[str] = None
    rename_from: Optional[str] = None
    rename_to: Optional[str] = None
    old_mode: Optional[str] = None
    new_mode: Optional[str] = None
    added_file: bool = False
    deleted_file: bool = False
    binary: bool = False
    explicit_paths: bool = False
    hunks: List[Hunk] = field(default_factory=list)
    _pending: Optional[List] = None

    def start_hunk(self, match: "re.Match") -> None:
        self.flush_hunk()
        old_line, old_count = int(match.group(1)), int(match.group(2) or "1")
        new_line, new_count = int(match.group(3)), int(match.group(4) or "1")
        old_start = old_line if old_count > 0 else old_line + 1
        new_start = new_line if new_count > 0 else new_line + 1
        self._pending = [old_start, [], new_start, []]

    def flush_hunk(self) -> None:
        if self._pending is None:
            return
        old_start, removed, new_start, added = self._pending
        self.hunks.append(
            Hunk(
                old_start=old_start,
                removed=tuple((old_start + i, text) for i, text in enumerate(removed)),
                new_start=new_start,
                added=tuple((new_start + i, text) for i, text in enumerate(added)),
            )
        )
        self._pending = None

    @property
    def in_hunks(self) -> bool:
        return self._pending is not None

    def header_paths(self) -> Tuple[str, str]:
        header = self.header
        if header.startswith('"'):
            end = header.index('" ', 1) + 1
            return _strip_prefix(header[:end]) or "", _strip_prefix(header[end + 1 :]) or ""
        length = (len(header) - 5) // 2
        return header[2 : 2 + length], header[5 + length :]

    def build(self) -> FileDiff:
        self.flush_hunk()
        if self.rename_from is not None and self.rename_to is not None:
            old_path, new_path = self.rename_from, self.rename_to
        elif self.explicit_paths:
            old_path, new_path = self.old_path, self.new_path
        else:
            old_path, new_path = self.header_paths()
        if self.added_file:
            old_path = None
        if self.deleted_file:
            new_path = None

        if self.binary:
            kind = ChangeKind.META_ONLY
        elif self.added_file:
            kind = ChangeKind.ADDED
        elif self.deleted_file:
            kind = ChangeKind.DELETED
        elif old_path != new_path:
            kind = ChangeKind.RENAMED
        elif not self.hunks and self.old_mode != self.new_mode:
            kind = ChangeKind.META_ONLY
        else:
            kind = ChangeKind.MODIFIED
        return FileDiff(
            old_path=old_path,
            new_path=new_path,
            hunks=tuple(self.hunks),
            change_kind=kind,
            old_mode=self.old_mode,
            new_mode=self.new_mode,
            binary=self.binary,
        )


def parse_diff(text: str) -> List[FileDiff]:
    """Parse ``git diff --unified=0`` output into FileDiffs."""
    diffs: List[FileDiff] = []
    current: Optional[_FileDiffBuilder] = None

    for line in text.split("\n"):
        if line.startswith("diff --git "):
            if current is not None:
                diffs.append(current.build())
            current = _FileDiffBuilder(header=line[len("diff --git ") :])
            continue
        if current is None:
            continue

        hunk_match = _HUNK_HEADER.match(line)
        if hunk_match:
            current.start_hunk(hunk_match)
            continue
        if current.in_hunks:
            if line.startswith("-"):
                current._pending[1].append(line[1:])
            elif line.startswith("+"):
                current._pending[3].append(line[1:])
            continue

        if line.startswith("old mode "):
            current.old_mode = line[len("old mode ") :]
        elif line.startswith("new mode "):
            current.new_mode = line[len("new mode ") :]
        elif line.startswith("new file mode "):
            current.added_file = True
            current.new_mode = line[len("new file mode ") :]
        elif line.startswith("deleted file mode "):
            current.deleted_file = True
            current.old_mode = line[len("deleted file mode ") :]
        elif line.startswith("rename from "):
            current.rename_from = _unquote(line[len("rename from ") :])
        elif line.startswith("rename to "):
            current.rename_to = _unquote(line[len("rename to ") :])
        elif line.startswith("--- "):
            current.old_path = _strip_prefix(line[4:])
            current.explicit_paths = True
        elif line.startswith("+++ "):
            current.new_path = _strip_prefix(line[4:])
            current.explicit_paths = True
        elif line.startswith("Binary files ") or line.startswith("GIT binary patch"):
            current.binary = True

    if current is not None:
        diffs.append(current.build())
    return diffs


def map_new_to_old(hunks: Sequence[Hunk], line: int) -> Optional[int]:
    """Map a line of the new side of a diff to the old side; None if the line was added."""
    delta = 0
    for hunk in sorted(hunks, key=lambda h: h.new_start):
        if line < hunk.new_start:
            break
        added_end = hunk.new_start + len(hunk.added)
        if hunk.added and line < added_end:
            return None
        delta = (hunk.old_start + len(hunk.removed)) - added_end
    return line + delta


def format_patch(diff: FileDiff) -> str:
    """Render hunks in unified-zero form, the shape forges report per-file patches in."""
    chunks = []
    for hunk in diff.hunks:
        old_line = hunk.old_start if hunk.removed else hunk.old_start - 1
        new_line = hunk.new_start if hunk.added else hunk.new_start - 1
        chunks.append(f"@@ -{old_line},{len(hunk.removed)} +{new_line},{len(hunk.added)} @@")
        chunks.extend(f"-{text}" for _, text in hunk.removed)
        chunks.extend(f"+{text}" for _, text in hunk.added)
    return "\n".join(chunks)


def patch_added_lines(patch: Optional[str]) -> List[str]:
    """Added line texts of a forge-reported patch."""
    if not patch:
        return []
    return [
        line[1:]
        for line in patch.split("\n")
        if line.startswith("+") and not line.startswith("+++")
    ]


# Blame cache


class BlameCache:
    """Whole-file blame results keyed by (commit, path, options)."""

    def __init__(self):
        self._entries: Dict[str, Dict[int, Tuple[str, int, str]]] = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(at: str, path: str, whitespace: bool, moves: bool, ignored: Sequence[str]) -> str:
        return json.dumps([at, path, whitespace, moves, list(ignored)])

    def get(self, key: str) -> Optional[Dict[int, Tuple[str, int, str]]]:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, value: Dict[int, Tuple[str, int, str]]) -> None:
        with self._lock:
            self._entries[key] = value

    def __len__(self) -> int:
        return len(self._entries)

    def save(self, path: Path, state_id: str) -> None:
        with self._lock:
            payload = {
                "state": state_id,
                "entries": {
                    key: {str(line): list(origin) for line, origin in sorted(value.items())}
                    for key, value in sorted(self._entries.items())
                },
            }
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")

    def load(self, path: Path, state_id: str) -> bool:
        """Load a persisted cache; entries from another repository state are discarded."""
        if not path.exists():
            return False
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            logger.warning(f"Ignoring unreadable blame cache {path}: {e}")
            return False
        if payload.get("state") != state_id:
            logger.info("Blame cache invalidated by repository state change")
            return False
        with self._lock:
            for key, value in payload.get("entries", {}).items():
                self._entries[key] = {
                    int(line): (origin[0], int(origin[1]), origin[2])
                    for line, origin in value.items()
                }
        logger.info(f"Loaded {len(self._entries)} blame cache entries")
        return True


# Repository handle


class RepositoryHandle:
    """Read-only view of a git repository."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._local = threading.local()
        self._lock = threading.Lock()
        repo = self._open()
        self.bare = repo.bare
        self._commits: Dict[str, Commit] = {}
        self._reachable: Set[str] = set()
        self._children: Dict[str, List[str]] = defaultdict(list)
        self._diffs: Dict[Tuple[str, str], List[FileDiff]] = {}
        self._file_lines: Dict[Tuple[str, str], List[str]] = {}
        self._sizes: Dict[str, int] = {}
        self._mainline: Optional[List[str]] = None
        self.blame_cache = BlameCache()
        self._load_history()
        logger.info(f"Opened repository {self.path}: {len(self._reachable)} reachable commits")

    def _open(self) -> git.Repo:
        try:
            repo = git.Repo(str(self.path))
        except (InvalidGitRepositoryError, NoSuchPathError) as e:
            raise NotARepository(f"Not a git repository: {self.path}", path=self.path) from e
        self._local.repo = repo
        return repo

    @property
    def repo(self) -> git.Repo:
        repo = getattr(self._local, "repo", None)
        if repo is None:
            repo = git.Repo(str(self.path))
            self._local.repo = repo
        return repo

    def _load_history(self) -> None:
        try:
            output = self.repo.git.log("--all", f"--format={_LOG_FORMAT}")
        except GitCommandError as e:
            if "does not have any commits" in str(e) or "bad default revision" in str(e):
                return
            raise CorruptObjectDatabase(f"Cannot read history of {self.path}: {e}") from e
        for record in readable(output).split("\x1e"):
            record = record.lstrip("\n")
            if not record:
                continue
            commit = self._parse_record(record)
            self._commits[commit.id] = commit
            self._reachable.add(commit.id)
        for commit in self._commits.values():
            for parent in commit.parents:
                self._children[parent].append(commit.id)

    @staticmethod
    def _parse_record(record: str) -> Commit:
        sha, parents, name, email, author_time, commit_time, message = record.split("\x1f", 6)
        return Commit(
            id=sha,
            parents=tuple(parents.split()),
            author_name=name,
            author_email=email,
            author_time=int(author_time),
            commit_time=int(commit_time),
            message=message.rstrip("\n"),
        )

    # Commit graph

    def commit(self, commit_id: str) -> Commit:
        found = self._commits.get(commit_id)
        if found is not None:
            return found
        if not _COMMIT_ID.match(commit_id or ""):
            raise UnknownCommit(commit_id)
        try:
            output = self.repo.git.show("-s", f"--format={_LOG_FORMAT}", commit_id)
        except GitCommandError as e:
            raise UnknownCommit(commit_id) from e
        commit = self._parse_record(readable(output).strip("\n").rstrip("\x1e"))
        with self._lock:
            self._commits[commit.id] = commit
        return commit

    def has_commit(self, commit_id: str) -> bool:
        try:
            self.commit(commit_id)
        except UnknownCommit:
            return False
        return True

    def is_reachable(self, commit_id: Optional[str]) -> bool:
        """True for commits reachable from any ref."""
        return commit_id in self._reachable

    def reachable_commits(self) -> List[Commit]:
        """Reachable commits ordered by commit time, then id."""
        return sorted(
            (self._commits[c] for c in self._reachable), key=lambda c: (c.commit_time, c.id)
        )

    def head(self) -> Optional[str]:
        try:
            return self.repo.head.commit.hexsha
        except ValueError:
            return None

    def state_id(self) -> str:
        """Digest of HEAD and all refs; changes whenever history moves."""
        try:
            refs = self.repo.git.show_ref("--head")
        except GitCommandError:
            refs = ""
        return hashlib.sha1(refs.encode("utf-8")).hexdigest()

    def first_parent(self, commit_id: str) -> Optional[str]:
        parents = self.commit(commit_id).parents
        return parents[0] if parents else None

    def children(self, commit_id: str) -> List[str]:
        return sorted(
            self._children.get(commit_id, []),
            key=lambda c: (self._commits[c].commit_time, c),
        )

    def mainline(self) -> List[str]:
        """First-parent chain from HEAD, oldest first."""
        if self._mainline is None:
            chain = []
            current = self.head()
            while current is not None:
                chain.append(current)
                current = self.first_parent(current)
            self._mainline = list(reversed(chain))
        return self._mainline

    def is_ancestor(self, ancestor: str, descendant: str) -> bool:
        if ancestor == descendant:
            return True
        try:
            return self.repo.is_ancestor(ancestor, descendant)
        except GitCommandError as e:
            raise VcsError(f"Ancestry check failed for {ancestor}..{descendant}: {e}") from e

    def resolve_prefix(self, prefix: str) -> Optional[str]:
        """Expand an abbreviated hash against reachable commits; None unless unique."""
        prefix = prefix.lower()
        if len(prefix) == 40:
            return prefix if prefix in self._reachable else None
        matches = [c for c in self._reachable if c.startswith(prefix)]
        return matches[0] if len(matches) == 1 else None

    # File contents

    def file_lines(self, commit_id: str, path: str) -> List[str]:
        key = (commit_id, path)
        cached = self._file_lines.get(key)
        if cached is not None:
            return cached
        self.commit(commit_id)
        try:
            text = self.repo.git.show(f"{commit_id}:{path}")
        except GitCommandError as e:
            raise PathNotPresent(commit_id, path) from e
        lines = readable(text).split("\n") if text else []
        self._file_lines[key] = lines
        return lines

    def path_exists(self, commit_id: str, path: str) -> bool:
        try:
            self.repo.git.cat_file("-e", f"{commit_id}:{path}")
        except GitCommandError:
            return False
        return True

    # Diffs

    def diff_commits(self, base: Optional[str], target: str) -> List[FileDiff]:
        """File diffs between two commits; ``base=None`` diffs against the empty tree."""
        base = base or EMPTY_TREE
        if base != EMPTY_TREE:
            self.commit(base)
        self.commit(target)
        if base == target:
            return []
        key = (base, target)
        cached = self._diffs.get(key)
        if cached is not None:
            return cached
        try:
            output = self.repo.git(c="core.quotepath=off").diff(
                base,
                target,
                "--no-color",
                "--no-ext-diff",
                "--no-textconv",
                "--unified=0",
                "--find-renames=50%",
                "--full-index",
                "--src-prefix=a/",
                "--dst-prefix=b/",
            )
        except GitCommandError as e:
            raise CorruptObjectDatabase(f"Diff {base}..{target} failed: {e}") from e
        diffs = parse_diff(readable(output))
        self._diffs[key] = diffs
        return diffs

    def first_parent_diff(self, commit_id: str) -> List[FileDiff]:
        return self.diff_commits(self.first_parent(commit_id), commit_id)

    def is_meta_change(self, commit_id: str) -> bool:
        commit = self.commit(commit_id)
        if commit.is_merge:
            return True
        return all(d.change_kind == ChangeKind.META_ONLY for d in self.first_parent_diff(commit_id))

    def change_size(self, commit_id: str) -> int:
        """Changed files plus changed lines of the commit's first-parent diff."""
        size = self._sizes.get(commit_id)
        if size is None:
            diffs = [
                d for d in self.first_parent_diff(commit_id) if d.change_kind != ChangeKind.META_ONLY
            ]
            size = len(diffs) + sum(d.removed_count + d.added_count for d in diffs)
            self._sizes[commit_id] = size
        return size

    def map_line_across(
        self, from_commit: str, to_commit: str, path: str, line: int
    ) -> Optional[Tuple[str, int]]:
        """Position of a line of ``from_commit`` at ``to_commit``; None if it vanished."""
        lines = self.file_lines(from_commit, path)
        if line < 1 or line > len(lines):
            raise LineOutOfRange(from_commit, path, line, len(lines))
        for diff in self.diff_commits(to_commit, from_commit):
            if diff.new_path != path:
                continue
            if diff.old_path is None:
                return None
            mapped = map_new_to_old(diff.hunks, line)
            return (diff.old_path, mapped) if mapped is not None else None
        if not self.path_exists(to_commit, path):
            return None
        return path, line

    # Blame

    def blame_lines(
        self,
        at: str,
        path: str,
        lines: Iterable[int],
        ignore_whitespace: bool = False,
        detect_moves: bool = False,
        skip: Optional[Callable[[LineOrigin], bool]] = None,
        max_skips: int = 16,
    ) -> List[LineOrigin]:
        """Origins of the requested lines of ``path`` at ``at``.

        Origins accepted by ``skip`` are re-blamed with their commit ignored so the next
        commit in history is reported. Lines whose origin stays on an ignored commit are
        dropped.
        """
        content = self.file_lines(at, path)
        requested = sorted(set(lines))
        for line in requested:
            if line < 1 or line > len(content):
                raise LineOutOfRange(at, path, line, len(content))

        results: Dict[int, LineOrigin] = {}
        ignored: List[str] = []
        pending = requested
        for _ in range(max_skips + 1):
            blamed = self._blame_file(at, path, ignore_whitespace, detect_moves, tuple(ignored))
            retry: List[int] = []
            newly_ignored: Set[str] = set()
            for line in pending:
                origin = blamed.get(line)
                if origin is None or origin.origin_commit in ignored:
                    continue
                if skip is not None and skip(origin):
                    newly_ignored.add(origin.origin_commit)
                    retry.append(line)
                else:
                    results[line] = origin
            if not retry:
                break
            ignored.extend(sorted(newly_ignored))
            pending = retry
        else:
            logger.debug(f"Dropped {len(pending)} lines of {path}@{at[:10]} after skip limit")
        return [results[line] for line in sorted(results)]

    def _blame_file(
        self,
        at: str,
        path: str,
        ignore_whitespace: bool,
        detect_moves: bool,
        ignored: Tuple[str, ...],
    ) -> Dict[int, LineOrigin]:
        key = BlameCache.key(at, path, ignore_whitespace, detect_moves, ignored)
        cached = self.blame_cache.get(key)
        if cached is None:
            kwargs = {}
            if ignore_whitespace:
                kwargs["w"] = True
            if detect_moves:
                kwargs["M"] = True
            if ignored:
                kwargs["ignore_rev"] = list(ignored)
            cached = {}
            try:
                for entry in self.repo.blame_incremental(at, path, **kwargs):
                    for offset, line in enumerate(entry.linenos):
                        cached[line] = (
                            entry.commit.hexsha,
                            entry.orig_linenos[offset],
                            entry.orig_path or path,
                        )
            except GitCommandError as e:
                raise VcsError(f"Blame of {path} at {at} failed: {e}", path=path) from e
            self.blame_cache.put(key, cached)
        return {
            line: LineOrigin(path, line, origin[0], origin[1], origin[2])
            for line, origin in cached.items()
        }


def open_repository(path: Path) -> RepositoryHandle:
    """Open a (possibly bare) repository for read-only analysis."""
    return RepositoryHandle(Path(path))
