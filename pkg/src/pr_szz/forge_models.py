"""
Forge-side records: issue tickets, pull requests and their inner commits.

These models are the on-disk snapshot schema. Unknown fields are kept verbatim so that a
snapshot written by a newer fetcher survives a load/save cycle.
"""

import re
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

JIRA_KEY = re.compile(r"^[A-Z][A-Z0-9_]*-\d+$")


class IssueSystem(str, Enum):
    GITHUB_ISSUE = "GithubIssue"
    JIRA_ISSUE = "JiraIssue"
    PULL_REQUEST = "PullRequest"

    @property
    def tracker(self) -> str:
        """Pull requests live in the GitHub tracker alongside GitHub issues."""
        return "jira" if self is IssueSystem.JIRA_ISSUE else "github"


_SYSTEM_ORDER = {
    IssueSystem.GITHUB_ISSUE: 0,
    IssueSystem.JIRA_ISSUE: 1,
    IssueSystem.PULL_REQUEST: 2,
}


class IssueRef(BaseModel):
    """Identifier of a ticket or pull request within one project."""

    model_config = ConfigDict(frozen=True)

    system: IssueSystem
    key: str

    @field_validator("key", mode="before")
    @classmethod
    def normalize_key(cls, value) -> str:
        key = str(value).strip()
        return key[1:] if key.startswith("#") else key

    @model_validator(mode="after")
    def check_shape(self) -> "IssueRef":
        if self.system == IssueSystem.JIRA_ISSUE:
            if not JIRA_KEY.match(self.key):
                raise ValueError(f"Jira key '{self.key}' does not match PROJECT-NUMBER")
        elif not self.key.isdigit():
            raise ValueError(f"{self.system.value} key '{self.key}' is not a number")
        return self

    @classmethod
    def github(cls, number) -> "IssueRef":
        return cls(system=IssueSystem.GITHUB_ISSUE, key=str(number))

    @classmethod
    def jira(cls, key: str) -> "IssueRef":
        return cls(system=IssueSystem.JIRA_ISSUE, key=key)

    @classmethod
    def pull(cls, number) -> "IssueRef":
        return cls(system=IssueSystem.PULL_REQUEST, key=str(number))

    @classmethod
    def parse(cls, label: str) -> "IssueRef":
        """Parse the ``System:key`` form used in ground truth and CSV files."""
        system, _, key = label.partition(":")
        return cls(system=IssueSystem(system), key=key)

    @property
    def label(self) -> str:
        return f"{self.system.value}:{self.key}"

    @property
    def is_ticket(self) -> bool:
        return self.system != IssueSystem.PULL_REQUEST

    def sort_key(self) -> Tuple:
        if self.system == IssueSystem.JIRA_ISSUE:
            project, _, number = self.key.rpartition("-")
            return (_SYSTEM_ORDER[self.system], project, int(number))
        return (_SYSTEM_ORDER[self.system], "", int(self.key))

    def __str__(self) -> str:
        return self.label


class Comment(BaseModel):
    model_config = ConfigDict(extra="allow")

    author: Optional[str] = None
    time: int = 0
    text: str = ""


class IntegratedLink(BaseModel):
    """A forge-native link ("Linked issues", "Issue Links", remote links)."""

    model_config = ConfigDict(extra="allow")

    ref: IssueRef
    kind: str = "integrated"


class InnerFile(BaseModel):
    model_config = ConfigDict(extra="allow")

    path: str
    previous_path: Optional[str] = None
    additions: int = 0
    deletions: int = 0
    patch: Optional[str] = None


class InnerCommit(BaseModel):
    """A commit as listed inside a pull request; may be absent from VCS history."""

    model_config = ConfigDict(extra="allow")

    hash: str
    message: str = ""
    author_name: str = ""
    author_email: str = ""
    author_time: int = 0
    files: Optional[List[InnerFile]] = None

    @property
    def first_line(self) -> str:
        return self.message.split("\n", 1)[0].strip()

    def paths(self) -> List[str]:
        paths = []
        for item in self.files or []:
            paths.append(item.path)
            if item.previous_path:
                paths.append(item.previous_path)
        return paths


def _sorted_unique(values: List[str]) -> List[str]:
    return sorted(set(values))


class ForgeEntity(BaseModel):
    model_config = ConfigDict(extra="allow")

    ref: IssueRef
    title: str = ""
    description: str = ""
    labels: List[str] = Field(default_factory=list)
    created_at: int
    closed_at: Optional[int] = None
    assignee: Optional[str] = None
    comments: List[Comment] = Field(default_factory=list)
    integrated_links: List[IntegratedLink] = Field(default_factory=list)
    mentions: List[IssueRef] = Field(default_factory=list)
    commit_mentions: List[str] = Field(default_factory=list)

    @field_validator("labels")
    @classmethod
    def normalize_labels(cls, value: List[str]) -> List[str]:
        return _sorted_unique(value)

    @model_validator(mode="after")
    def check_times(self):
        if self.closed_at is not None and self.closed_at < self.created_at:
            raise ValueError("closed_at precedes created_at")
        return self

    def has_label(self, vocabulary) -> bool:
        wanted = {label.lower() for label in vocabulary}
        return any(label.lower() in wanted for label in self.labels)

    def text_fields(self) -> Iterator[Tuple[str, str]]:
        """(location, text) pairs searched for textual links."""
        yield "title", self.title
        yield "description", self.description
        for index, comment in enumerate(self.comments):
            yield f"comments[{index}]", comment.text


class IssueTicket(ForgeEntity):
    status: str = ""
    resolution: Optional[str] = None


class PrState(str, Enum):
    OPEN = "Open"
    CLOSED = "Closed"


class PullRequest(ForgeEntity):
    state: PrState = PrState.OPEN
    merged: bool = False
    merge_commit: Optional[str] = None
    inner_commits: List[InnerCommit] = Field(default_factory=list)
    reviews: List[Comment] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_merge_state(self) -> "PullRequest":
        if self.ref.system != IssueSystem.PULL_REQUEST:
            raise ValueError("pull request ref must use the PullRequest system")
        if self.merged and self.state != PrState.CLOSED:
            raise ValueError("merged pull request must be Closed")
        if self.merged and not self.inner_commits:
            raise ValueError("merged pull request has no inner commits")
        return self

    @property
    def number(self) -> int:
        return int(self.ref.key)

    def inner_files_available(self) -> bool:
        return bool(self.inner_commits) and all(c.files is not None for c in self.inner_commits)

    def text_fields(self) -> Iterator[Tuple[str, str]]:
        yield from super().text_fields()
        for index, review in enumerate(self.reviews):
            yield f"reviews[{index}]", review.text


class Snapshot(BaseModel):
    """Offline capture of one project's forge data."""

    model_config = ConfigDict(extra="allow")

    project_id: str
    fetched_at: int = 0
    issues: List[IssueTicket] = Field(default_factory=list)
    pulls: List[PullRequest] = Field(default_factory=list)

    _index: Optional[Dict[IssueRef, ForgeEntity]] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def sort_entries(self) -> "Snapshot":
        self.issues.sort(key=lambda t: t.ref.sort_key())
        self.pulls.sort(key=lambda p: p.ref.sort_key())
        return self

    def _lookup(self) -> Dict[IssueRef, ForgeEntity]:
        if self._index is None:
            self._index = {item.ref: item for item in self.entities()}
        return self._index

    def pull(self, number) -> Optional[PullRequest]:
        return self._lookup().get(IssueRef.pull(number))

    def entity(self, ref: IssueRef) -> Optional[ForgeEntity]:
        """The ticket or pull request for ``ref``, or None."""
        return self._lookup().get(ref)

    def entities(self) -> List[ForgeEntity]:
        return [*self.issues, *self.pulls]

    def merge(self, other: "Snapshot") -> "Snapshot":
        """Combine two partial snapshots (e.g. GitHub and Jira) of the same project."""
        return Snapshot(
            project_id=self.project_id,
            fetched_at=max(self.fetched_at, other.fetched_at),
            issues=[*self.issues, *other.issues],
            pulls=[*self.pulls, *other.pulls],
        )
