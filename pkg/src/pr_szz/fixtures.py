"""
Synthetic fixture generator.

A fixture script is a YAML list of actions (commits, pull requests, tickets, comments)
plus the ground truth it is meant to produce. The generator replays the actions into a
real git repository with fixed identities and timestamps, writes the matching forge
snapshot, checks the declared truth against the brute-force blame oracle and leaves a
``config.yaml`` that ``pr-szz run`` accepts as is.

Output layout::

    repo/          git repository (branch main)
    snapshot/      forge snapshot
    truth.json     ground truth with commit ids
    labels.json    commit label -> commit id
    config.yaml    project configuration
"""

import logging
import os
import random
import re
import shutil
import stat
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

import git
import yaml
from git.exc import GitCommandError
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dataset import GroundTruth
from .errors import FixtureError
from .forge_models import (
    Comment,
    InnerCommit,
    InnerFile,
    IntegratedLink,
    IssueRef,
    IssueSystem,
    IssueTicket,
    PrState,
    PullRequest,
    Snapshot,
)
from .oracle import BlameOracle
from .snapshot import save_snapshot, write_canonical
from .vcs import ChangeKind, RepositoryHandle, format_patch

logger = logging.getLogger(__name__)

BOT_NAME = "Fixture Bot"
BOT_EMAIL = "fixture@example.invalid"
BASE_TIME = 1600000000
TIME_STEP = 1000
MAIN = "main"
COMMIT_ID = re.compile(r"^[0-9a-f]{40}$")


class Identity(BaseModel):
    name: str = BOT_NAME
    email: str = BOT_EMAIL


# File changes


class CreateFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["create_file"]
    path: str
    lines: List[str] = Field(default_factory=list)
    executable: bool = False


class EditLines(BaseModel):
    """Edit around the single line whose stripped text equals ``find``."""

    model_config = ConfigDict(extra="forbid")

    op: Literal["edit_lines"]
    path: str
    find: str
    replace: Optional[List[str]] = None
    insert_after: Optional[List[str]] = None
    insert_before: Optional[List[str]] = None
    delete: bool = False

    @model_validator(mode="after")
    def one_edit(self) -> "EditLines":
        given = [
            self.replace is not None,
            self.insert_after is not None,
            self.insert_before is not None,
            self.delete,
        ]
        if sum(given) != 1:
            raise ValueError("edit_lines needs exactly one of replace, insert_after, insert_before, delete")
        return self


class ChmodFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["chmod_file"]
    path: str
    executable: bool = True


class RenameFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["rename_file"]
    path: str
    to: str


class DeleteFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["delete_file"]
    path: str


Change = Annotated[
    Union[CreateFile, EditLines, ChmodFile, RenameFile, DeleteFile], Field(discriminator="op")
]


# Actions


class LinkSpec(BaseModel):
    ref: str
    kind: str = "integrated"

    def to_link(self) -> IntegratedLink:
        return IntegratedLink(ref=_parse_ref(self.ref), kind=self.kind)


class CommitAction(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["commit"]
    label: str
    message: str
    changes: List[Change] = Field(default_factory=list)
    pr: Optional[int] = None
    author: Optional[Identity] = None


class OpenPr(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["open_pr"]
    number: int
    title: str
    description: str = ""
    strategy: Literal["merge", "squash", "rebase"] = "merge"
    branch_from: Optional[str] = None
    assignee: Optional[str] = None
    labels: List[str] = Field(default_factory=list)
    links: List[LinkSpec] = Field(default_factory=list)


class MergePr(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["merge_pr"]
    number: int
    label: str
    message: Optional[str] = None
    changes: List[Change] = Field(default_factory=list)


class ClosePr(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["close_pr"]
    number: int


class FileTicket(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["file_ticket"]
    system: Literal["github", "jira"]
    key: str
    title: str
    description: str = ""
    labels: List[str] = Field(default_factory=list)
    assignee: Optional[str] = None
    links: List[LinkSpec] = Field(default_factory=list)

    def ref(self) -> IssueRef:
        if self.system == "jira":
            return IssueRef.jira(self.key)
        return IssueRef.github(self.key)


class CloseTicket(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["close_ticket"]
    ref: str
    status: Optional[str] = None
    resolution: Optional[str] = None


class CommentAction(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["comment"]
    target: str
    text: str
    author: Optional[str] = None
    review: bool = False


Action = Annotated[
    Union[CommitAction, OpenPr, MergePr, ClosePr, FileTicket, CloseTicket, CommentAction],
    Field(discriminator="kind"),
]


class TruthSpec(BaseModel):
    """Ground truth in terms of commit labels; bugs are ``System:key`` labels."""

    fixing: Dict[str, Optional[str]] = Field(default_factory=dict)
    inducing: Dict[str, List[str]] = Field(default_factory=dict)


class FixtureScript(BaseModel):
    model_config = ConfigDict(extra="forbid")

    project_id: str = "fixture"
    jira_keys: List[str] = Field(default_factory=list)
    actions: List[Action]
    truth: TruthSpec = Field(default_factory=TruthSpec)

    @classmethod
    def load(cls, path: Path) -> "FixtureScript":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = yaml.safe_load(handle)
        except OSError as e:
            raise FixtureError(f"Cannot read fixture script {path}: {e}", path=path) from e
        except yaml.YAMLError as e:
            raise FixtureError(f"Fixture script {path} is not valid YAML: {e}", path=path) from e
        return cls.parse(data, str(path))

    @classmethod
    def parse(cls, data: Any, source: str = "<script>") -> "FixtureScript":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(part) for part in first.get("loc", ()))
            raise FixtureError(f"Invalid fixture script {source}: {where}: {first.get('msg')}") from e


def _parse_ref(label: str) -> IssueRef:
    try:
        return IssueRef.parse(label)
    except ValueError as e:
        raise FixtureError(f"'{label}' is not a System:key reference") from e


def action_time(index: int) -> int:
    return BASE_TIME + TIME_STEP * index


@dataclass
class FixtureResult:
    root: Path
    repo_path: Path
    snapshot_dir: Path
    truth_path: Path
    config_path: Path
    labels: Dict[str, str]
    truth: GroundTruth
    snapshot: Snapshot


@dataclass
class _PrState:
    opened: OpenPr
    created_at: int
    branch: str
    inner: List[InnerCommit] = field(default_factory=list)
    comments: List[Comment] = field(default_factory=list)
    reviews: List[Comment] = field(default_factory=list)
    branch_created: bool = False
    merged: bool = False
    merge_commit: Optional[str] = None
    closed_at: Optional[int] = None


@dataclass
class _TicketState:
    opened: FileTicket
    created_at: int
    comments: List[Comment] = field(default_factory=list)
    status: str = "Open"
    resolution: Optional[str] = None
    closed_at: Optional[int] = None


class FixtureBuilder:
    """Replays a fixture script into ``out``; the directory is recreated from scratch."""

    def __init__(self, script: FixtureScript, out: Path):
        self.script = script
        self.root = Path(out)
        self.repo_path = self.root / "repo"
        self.labels: Dict[str, str] = {}
        self.pulls: Dict[int, _PrState] = {}
        self.tickets: Dict[IssueRef, _TicketState] = {}
        self._repo: Optional[git.Repo] = None
        self._handle: Optional[RepositoryHandle] = None

    # git plumbing

    @property
    def repo(self) -> git.Repo:
        if self._repo is None:
            raise FixtureError("Repository is not initialized")
        return self._repo

    @property
    def handle(self) -> RepositoryHandle:
        if self._handle is None:
            self._handle = RepositoryHandle(self.repo_path)
        return self._handle

    def _init_repo(self) -> None:
        if self.root.exists():
            shutil.rmtree(self.root)
        self.repo_path.mkdir(parents=True)
        repo = git.Repo.init(str(self.repo_path), initial_branch=MAIN)
        with repo.config_writer() as writer:
            writer.set_value("user", "name", BOT_NAME)
            writer.set_value("user", "email", BOT_EMAIL)
            writer.set_value("core", "fileMode", "true")
            writer.set_value("core", "autocrlf", "false")
            writer.set_value("commit", "gpgsign", "false")
        self._repo = repo

    @staticmethod
    def _environment(when: int, author: Optional[Identity]) -> Dict[str, str]:
        author = author or Identity()
        stamp = f"@{when} +0000"
        return {
            "GIT_AUTHOR_NAME": author.name,
            "GIT_AUTHOR_EMAIL": author.email,
            "GIT_AUTHOR_DATE": stamp,
            "GIT_COMMITTER_NAME": BOT_NAME,
            "GIT_COMMITTER_EMAIL": BOT_EMAIL,
            "GIT_COMMITTER_DATE": stamp,
        }

    def _git(self, when: int, *args: str, author: Optional[Identity] = None) -> str:
        try:
            with self.repo.git.custom_environment(**self._environment(when, author)):
                return self.repo.git.execute(["git", *args])
        except GitCommandError as e:
            raise FixtureError(f"git {' '.join(args)} failed: {e.stderr.strip() or e}") from e

    def _head(self) -> str:
        return self.repo.head.commit.hexsha

    def _commit_id(self, label: str) -> str:
        if label in self.labels:
            return self.labels[label]
        raise FixtureError(f"Unknown commit label '{label}'")

    # working tree

    def _file(self, path: str) -> Path:
        return self.repo_path / path

    def _read_lines(self, path: str) -> List[str]:
        target = self._file(path)
        if not target.is_file():
            raise FixtureError(f"File {path} does not exist")
        return target.read_text(encoding="utf-8").splitlines()

    def _write_lines(self, path: str, lines: List[str]) -> None:
        target = self._file(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("".join(f"{line}\n" for line in lines))

    def _set_executable(self, path: str, executable: bool) -> None:
        target = self._file(path)
        mode = target.stat().st_mode
        bits = stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH
        os.chmod(target, mode | bits if executable else mode & ~bits)

    def _apply(self, change: Change, when: int) -> None:
        if isinstance(change, CreateFile):
            if self._file(change.path).exists():
                raise FixtureError(f"File {change.path} already exists")
            self._write_lines(change.path, change.lines)
            self._set_executable(change.path, change.executable)
        elif isinstance(change, EditLines):
            lines = self._read_lines(change.path)
            hits = [i for i, text in enumerate(lines) if text.strip() == change.find.strip()]
            if len(hits) != 1:
                raise FixtureError(
                    f"'{change.find}' matches {len(hits)} lines of {change.path}, expected one"
                )
            at = hits[0]
            if change.replace is not None:
                lines[at : at + 1] = change.replace
            elif change.insert_after is not None:
                lines[at + 1 : at + 1] = change.insert_after
            elif change.insert_before is not None:
                lines[at:at] = change.insert_before
            else:
                del lines[at]
            self._write_lines(change.path, lines)
        elif isinstance(change, ChmodFile):
            if not self._file(change.path).is_file():
                raise FixtureError(f"File {change.path} does not exist")
            self._set_executable(change.path, change.executable)
            self._git(when, "add", "--", change.path)
            self._git(when, "update-index", f"--chmod={'+x' if change.executable else '-x'}", "--", change.path)
        elif isinstance(change, RenameFile):
            self._git(when, "mv", "--", change.path, change.to)
        elif isinstance(change, DeleteFile):
            self._git(when, "rm", "-q", "--", change.path)

    def _stage(self, changes: List[Change], when: int) -> None:
        for change in changes:
            self._apply(change, when)
        self._git(when, "add", "--all")

    # actions

    def _checkout_for(self, action: CommitAction, when: int) -> None:
        if action.pr is None:
            self._git(when, "checkout", "-q", MAIN)
            return
        state = self.pulls.get(action.pr)
        if state is None:
            raise FixtureError(f"Commit {action.label} targets pull request #{action.pr}, which is not open")
        if state.merged or state.closed_at is not None:
            raise FixtureError(f"Pull request #{action.pr} is already closed")
        if not state.branch_created:
            start = self._commit_id(state.opened.branch_from) if state.opened.branch_from else MAIN
            self._git(when, "checkout", "-q", "-b", state.branch, start)
            state.branch_created = True
        else:
            self._git(when, "checkout", "-q", state.branch)

    def _inner_commit(self, commit_id: str) -> InnerCommit:
        commit = self.handle.commit(commit_id)
        files = []
        for diff in self.handle.diff_commits(self.handle.first_parent(commit_id), commit_id):
            files.append(
                InnerFile(
                    path=diff.new_path or diff.old_path,
                    previous_path=diff.old_path if diff.change_kind == ChangeKind.RENAMED else None,
                    additions=diff.added_count,
                    deletions=diff.removed_count,
                    patch=format_patch(diff),
                )
            )
        return InnerCommit(
            hash=commit.id,
            message=commit.message,
            author_name=commit.author_name,
            author_email=commit.author_email,
            author_time=commit.author_time,
            files=files,
        )

    def _commit(self, action: CommitAction, when: int) -> None:
        if action.label in self.labels:
            raise FixtureError(f"Commit label '{action.label}' is used twice")
        self._checkout_for(action, when)
        self._stage(action.changes, when)
        self._git(when, "commit", "-q", "--allow-empty", "-m", action.message, author=action.author)
        commit_id = self._head()
        self.labels[action.label] = commit_id
        if action.pr is not None:
            self.pulls[action.pr].inner.append(self._inner_commit(commit_id))
        self._git(when, "checkout", "-q", MAIN)
        logger.debug(f"Commit {action.label} -> {commit_id[:10]}")

    def _open_pr(self, action: OpenPr, when: int) -> None:
        if action.number in self.pulls:
            raise FixtureError(f"Pull request #{action.number} is opened twice")
        if IssueRef.github(action.number) in self.tickets:
            raise FixtureError(f"Number {action.number} is already used by an issue")
        self.pulls[action.number] = _PrState(action, when, f"pr/{action.number}")

    def _merge_pr(self, action: MergePr, when: int) -> None:
        state = self.pulls.get(action.number)
        if state is None or state.merged or state.closed_at is not None:
            raise FixtureError(f"Pull request #{action.number} is not open")
        if not state.inner:
            raise FixtureError(f"Pull request #{action.number} has no commits to merge")
        if action.label in self.labels:
            raise FixtureError(f"Commit label '{action.label}' is used twice")
        self._git(when, "checkout", "-q", MAIN)
        opened = state.opened
        if opened.strategy == "merge":
            self._git(when, "merge", "-q", "--no-ff", "--no-commit", state.branch)
            self._stage(action.changes, when)
            message = action.message or f"Merge pull request #{opened.number} from {state.branch}"
            self._git(when, "commit", "-q", "-m", message)
        elif opened.strategy == "squash":
            self._git(when, "merge", "-q", "--squash", state.branch)
            self._stage(action.changes, when)
            body = "\n".join(f"* {inner.first_line}" for inner in state.inner)
            message = action.message or f"{opened.title} (#{opened.number})\n\n{body}"
            self._git(when, "commit", "-q", "-m", message)
        else:
            if action.changes:
                raise FixtureError("Extra changes cannot be added to a rebase merge")
            for inner in state.inner:
                self._git(when, "cherry-pick", "--allow-empty", inner.hash)
        self._git(when, "branch", "-q", "-D", state.branch)
        state.merged = True
        state.merge_commit = self._head()
        state.closed_at = when
        self.labels[action.label] = state.merge_commit
        logger.debug(f"Merged pull request #{opened.number} ({opened.strategy}) -> {state.merge_commit[:10]}")

    def _close_pr(self, action: ClosePr, when: int) -> None:
        state = self.pulls.get(action.number)
        if state is None or state.merged or state.closed_at is not None:
            raise FixtureError(f"Pull request #{action.number} is not open")
        state.closed_at = when
        if state.branch_created:
            self._git(when, "branch", "-q", "-D", state.branch)

    def _file_ticket(self, action: FileTicket, when: int) -> None:
        ref = action.ref()
        if ref in self.tickets:
            raise FixtureError(f"Ticket {ref} is filed twice")
        if ref.system == IssueSystem.GITHUB_ISSUE and int(ref.key) in self.pulls:
            raise FixtureError(f"Number {ref.key} is already used by a pull request")
        self.tickets[ref] = _TicketState(action, when)

    def _close_ticket(self, action: CloseTicket, when: int) -> None:
        ref = _parse_ref(action.ref)
        state = self.tickets.get(ref)
        if state is None:
            raise FixtureError(f"Ticket {ref} was never filed")
        if ref.system == IssueSystem.JIRA_ISSUE:
            state.status = action.status or "Resolved"
            state.resolution = action.resolution or "Fixed"
        else:
            state.status = action.status or "closed"
            state.resolution = action.resolution
        state.closed_at = when

    def _comment(self, action: CommentAction, when: int) -> None:
        ref = _parse_ref(action.target)
        note = Comment(author=action.author, time=when, text=action.text)
        if ref.system == IssueSystem.PULL_REQUEST:
            state = self.pulls.get(int(ref.key))
            if state is None:
                raise FixtureError(f"Pull request {ref} was never opened")
            (state.reviews if action.review else state.comments).append(note)
            return
        ticket = self.tickets.get(ref)
        if ticket is None:
            raise FixtureError(f"Ticket {ref} was never filed")
        if action.review:
            raise FixtureError("Only pull requests take reviews")
        ticket.comments.append(note)

    # outputs

    def _snapshot(self, fetched_at: int) -> Snapshot:
        issues = []
        for ref, state in self.tickets.items():
            opened = state.opened
            issues.append(
                IssueTicket(
                    ref=ref,
                    title=opened.title,
                    description=opened.description,
                    labels=opened.labels,
                    created_at=state.created_at,
                    closed_at=state.closed_at,
                    assignee=opened.assignee,
                    comments=state.comments,
                    integrated_links=[link.to_link() for link in opened.links],
                    status=state.status,
                    resolution=state.resolution,
                )
            )
        pulls = []
        for number, state in self.pulls.items():
            opened = state.opened
            pulls.append(
                PullRequest(
                    ref=IssueRef.pull(number),
                    title=opened.title,
                    description=opened.description,
                    labels=opened.labels,
                    created_at=state.created_at,
                    closed_at=state.closed_at,
                    assignee=opened.assignee,
                    comments=state.comments,
                    reviews=state.reviews,
                    integrated_links=[link.to_link() for link in opened.links],
                    state=PrState.CLOSED if state.closed_at is not None else PrState.OPEN,
                    merged=state.merged,
                    merge_commit=state.merge_commit,
                    inner_commits=state.inner,
                )
            )
        return Snapshot(
            project_id=self.script.project_id, fetched_at=fetched_at, issues=issues, pulls=pulls
        )

    def _resolve(self, value: str) -> str:
        if value in self.labels:
            return self.labels[value]
        if COMMIT_ID.match(value):
            return value
        raise FixtureError(f"Truth refers to unknown commit label '{value}'")

    def _truth(self) -> GroundTruth:
        fixing = {}
        for bug, commit in self.script.truth.fixing.items():
            label = _parse_ref(bug).label
            fixing[label] = self._resolve(commit) if commit is not None else None
        inducing = {
            self._resolve(fix): sorted({self._resolve(c) for c in commits})
            for fix, commits in self.script.truth.inducing.items()
        }
        return GroundTruth(fixing=fixing, inducing=inducing)

    def _config(self) -> Dict[str, Any]:
        trackers: List[Dict[str, Any]] = [{"system": "github", "project": self.script.project_id}]
        keys = sorted(
            set(self.script.jira_keys)
            | {ref.key.rsplit("-", 1)[0] for ref in self.tickets if ref.system == IssueSystem.JIRA_ISSUE}
        )
        if keys:
            trackers.append({"system": "jira", "project": keys[0], "project_keys": keys})
        return {
            "project_id": self.script.project_id,
            "repo_path": "repo",
            "snapshot_dir": "snapshot",
            "output_dir": "out",
            "truth_path": "truth.json",
            "trackers": trackers,
            "jobs": 1,
        }

    def build(self) -> FixtureResult:
        self._init_repo()
        handlers = {
            "commit": self._commit,
            "open_pr": self._open_pr,
            "merge_pr": self._merge_pr,
            "close_pr": self._close_pr,
            "file_ticket": self._file_ticket,
            "close_ticket": self._close_ticket,
            "comment": self._comment,
        }
        last = BASE_TIME
        for index, action in enumerate(self.script.actions):
            last = action_time(index)
            try:
                handlers[action.kind](action, last)
            except FixtureError as e:
                raise FixtureError(f"Action {index} ({action.kind}): {e.message}") from e
        for number, state in self.pulls.items():
            if state.branch_created and not state.merged and state.closed_at is None:
                logger.debug(f"Pull request #{number} stays open on {state.branch}")

        truth = self._truth()
        verify_truth(RepositoryHandle(self.repo_path), truth)
        snapshot = self._snapshot(last)
        snapshot_dir = self.root / "snapshot"
        save_snapshot(snapshot, snapshot_dir)
        truth_path = self.root / "truth.json"
        truth.save(truth_path)
        write_canonical(self.root / "labels.json", self.labels)
        config_path = self.root / "config.yaml"
        with open(config_path, "w", encoding="utf-8", newline="\n") as handle:
            yaml.safe_dump(self._config(), handle, sort_keys=True)
        logger.info(
            f"Fixture {self.script.project_id}: {len(self.labels)} commits, "
            f"{len(self.tickets)} tickets, {len(self.pulls)} pull requests -> {self.root}"
        )
        return FixtureResult(
            root=self.root,
            repo_path=self.repo_path,
            snapshot_dir=snapshot_dir,
            truth_path=truth_path,
            config_path=config_path,
            labels=dict(self.labels),
            truth=truth,
            snapshot=snapshot,
        )


def verify_truth(repo: RepositoryHandle, truth: GroundTruth) -> None:
    """Raise FixtureError unless every declared inducing commit can be found by tracing.

    An inducing commit on the fix's first-parent chain must be the oracle origin of a line
    the fix removes; one that only reaches the fix through a merge must at least touch a
    file the fix changes.
    """
    oracle = BlameOracle(repo)
    for fix, inducing in sorted(truth.inducing.items()):
        if not repo.is_reachable(fix):
            raise FixtureError(f"Fixing commit {fix} is not part of the history")
        base = repo.first_parent(fix)
        if base is None:
            raise FixtureError(f"Fixing commit {fix} has no parent to trace from")
        origins = oracle.removed_line_origins(fix, base)
        chain = set(oracle.chain(base))
        fix_paths = {d.old_path for d in repo.diff_commits(base, fix) if d.old_path}
        for commit in inducing:
            if commit == fix or not repo.is_ancestor(commit, fix):
                raise FixtureError(f"Inducing commit {commit} does not precede fix {fix}")
            if commit in origins:
                continue
            touched = {d.path for d in repo.first_parent_diff(commit)}
            if commit not in chain and touched & fix_paths:
                continue
            raise FixtureError(f"Inducing commit {commit} is not an origin of any line fix {fix} removes")
    for bug, fix in truth.fixing.items():
        if fix is not None and not repo.is_reachable(fix):
            raise FixtureError(f"Fixing commit {fix} of {bug} is not part of the history")


def build_fixture(script: Union[FixtureScript, Path, str], out: Path) -> FixtureResult:
    if not isinstance(script, FixtureScript):
        script = FixtureScript.load(Path(script))
    return FixtureBuilder(script, out).build()


def random_script(seed: int, commits: int = 30, files: int = 3) -> FixtureScript:
    """A seeded linear history of line edits with unique line texts, for oracle checks."""
    rng = random.Random(seed)
    counter = 0
    contents: Dict[str, List[str]] = {}

    def fresh(count: int) -> List[str]:
        nonlocal counter
        lines = []
        for _ in range(count):
            counter += 1
            lines.append(f"value_{counter} = {rng.randint(0, 999)}")
        return lines

    first = []
    for index in range(files):
        path = f"module_{index}.txt"
        contents[path] = fresh(rng.randint(4, 10))
        first.append({"op": "create_file", "path": path, "lines": list(contents[path])})
    actions: List[Dict[str, Any]] = [
        {"kind": "commit", "label": "c1", "message": "Initial import", "changes": first}
    ]
    for number in range(2, commits + 1):
        changes: List[Dict[str, Any]] = []
        for path in rng.sample(sorted(contents), rng.randint(1, min(2, files))):
            for _ in range(rng.randint(1, 3)):
                lines = contents[path]
                at = rng.randrange(len(lines))
                roll = rng.random()
                if roll < 0.45:
                    new = fresh(rng.randint(1, 2))
                    changes.append({"op": "edit_lines", "path": path, "find": lines[at], "replace": new})
                    lines[at : at + 1] = new
                elif roll < 0.8 or len(lines) < 3:
                    new = fresh(rng.randint(1, 3))
                    changes.append({"op": "edit_lines", "path": path, "find": lines[at], "insert_after": new})
                    lines[at + 1 : at + 1] = new
                else:
                    changes.append({"op": "edit_lines", "path": path, "find": lines[at], "delete": True})
                    del lines[at]
        actions.append(
            {"kind": "commit", "label": f"c{number}", "message": f"Change {number}", "changes": changes}
        )
    return FixtureScript.parse({"project_id": f"random-{seed}", "actions": actions}, f"random seed {seed}")
