"""
GitHub REST v3 fetcher.

Captures issues and pull requests created inside a time window, with comments, reviews,
inner commits (optionally with per-file patches) and the issue timeline, which supplies
cross-reference mentions, commit references and "Linked issues" connections.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple
from urllib.parse import parse_qs, urlparse

import requests

from .forge_models import (
    Comment,
    InnerCommit,
    InnerFile,
    IntegratedLink,
    IssueRef,
    IssueTicket,
    PrState,
    PullRequest,
    Snapshot,
)
from .transport import ForgeClient, HttpResponse, LiveTransport, Transport

logger = logging.getLogger(__name__)

API_URL = "https://api.github.com"
TOKEN_ENV = "PRSZZ_GITHUB_TOKEN"
PER_PAGE = 100
LIST_PARAMS = {"state": "all", "sort": "created", "direction": "asc", "per_page": PER_PAGE}
DETAIL_PARAMS = {"per_page": PER_PAGE}


def parse_github_time(value: Optional[str]) -> Optional[int]:
    if not value:
        return None
    stamp = datetime.strptime(value, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def _page_number(url: str) -> Optional[int]:
    values = parse_qs(urlparse(url).query).get("page")
    return int(values[0]) if values else None


def _links(response: HttpResponse) -> Dict[str, str]:
    header = response.header("Link")
    if not header:
        return {}
    return {link.get("rel"): link.get("url") for link in requests.utils.parse_header_links(header)}


def _login(user: Optional[Dict[str, Any]]) -> Optional[str]:
    return (user or {}).get("login")


class GithubFetcher:
    def __init__(
        self,
        project: str,
        client: ForgeClient,
        base_url: str = API_URL,
        page_workers: int = 4,
        include_details: bool = True,
    ):
        self.project = project
        self.client = client
        self.base_url = base_url.rstrip("/")
        self.page_workers = page_workers
        self.include_details = include_details

    def _url(self, path: str) -> str:
        return f"{self.base_url}/repos/{self.project}{path}"

    def paginate(self, url: str, params: Dict[str, Any]) -> List[Any]:
        """Drain every page of a list endpoint, keeping page order."""
        first = self.client.get(url, {**params, "page": 1})
        items = list(first.body or [])
        links = _links(first)
        last = _page_number(links["last"]) if "last" in links else None
        if last and last > 1:
            with ThreadPoolExecutor(max_workers=self.page_workers) as pool:
                pages = pool.map(
                    lambda page: self.client.get(url, {**params, "page": page}).body or [],
                    range(2, last + 1),
                )
                for page_items in pages:
                    items.extend(page_items)
            return items
        page, response = 1, first
        while "next" in _links(response):
            page += 1
            response = self.client.get(url, {**params, "page": page})
            items.extend(response.body or [])
        return items

    def _comments(self, number: int) -> List[Comment]:
        return [
            Comment(
                author=_login(item.get("user")),
                time=parse_github_time(item.get("created_at")) or 0,
                text=item.get("body") or "",
            )
            for item in self.paginate(self._url(f"/issues/{number}/comments"), DETAIL_PARAMS)
        ]

    def _timeline(self, number: int) -> Tuple[List[IntegratedLink], List[IssueRef], List[str]]:
        links: List[IntegratedLink] = []
        mentions: List[IssueRef] = []
        commits: List[str] = []
        for event in self.paginate(self._url(f"/issues/{number}/timeline"), DETAIL_PARAMS):
            kind = event.get("event")
            source = (event.get("source") or {}).get("issue") or {}
            if kind in ("cross-referenced", "connected") and source.get("number") is not None:
                ref = (
                    IssueRef.pull(source["number"])
                    if "pull_request" in source
                    else IssueRef.github(source["number"])
                )
                if kind == "connected":
                    links.append(IntegratedLink(ref=ref, kind="integrated"))
                elif ref not in mentions:
                    mentions.append(ref)
            elif kind == "referenced" and event.get("commit_id"):
                if event["commit_id"] not in commits:
                    commits.append(event["commit_id"])
        return links, mentions, commits

    def _inner_commits(self, number: int) -> List[InnerCommit]:
        inner = []
        for item in self.paginate(self._url(f"/pulls/{number}/commits"), DETAIL_PARAMS):
            author = (item.get("commit") or {}).get("author") or {}
            files = None
            if self.include_details:
                detail = self.client.get(self._url(f"/commits/{item['sha']}")).body or {}
                files = [
                    InnerFile(
                        path=entry["filename"],
                        previous_path=entry.get("previous_filename"),
                        additions=entry.get("additions", 0),
                        deletions=entry.get("deletions", 0),
                        patch=entry.get("patch"),
                    )
                    for entry in detail.get("files", [])
                ]
            inner.append(
                InnerCommit(
                    hash=item["sha"],
                    message=(item.get("commit") or {}).get("message", ""),
                    author_name=author.get("name", ""),
                    author_email=author.get("email", ""),
                    author_time=parse_github_time(author.get("date")) or 0,
                    files=files,
                )
            )
        return inner

    def _issue(self, item: Dict[str, Any]) -> IssueTicket:
        number = item["number"]
        links, mentions, commits = self._timeline(number)
        return IssueTicket(
            ref=IssueRef.github(number),
            title=item.get("title") or "",
            description=item.get("body") or "",
            labels=[label["name"] for label in item.get("labels", [])],
            status=item.get("state", ""),
            resolution=item.get("state_reason"),
            created_at=parse_github_time(item["created_at"]),
            closed_at=parse_github_time(item.get("closed_at")),
            assignee=_login(item.get("assignee")),
            comments=self._comments(number),
            integrated_links=links,
            mentions=mentions,
            commit_mentions=commits,
        )

    def _pull(self, item: Dict[str, Any]) -> Optional[PullRequest]:
        number = item["number"]
        merged = item.get("merged_at") is not None
        inner = self._inner_commits(number)
        if merged and not inner:
            logger.warning(f"Skipping merged pull request #{number} without inner commits")
            return None
        links, mentions, commits = self._timeline(number)
        reviews = [
            Comment(
                author=_login(review.get("user")),
                time=parse_github_time(review.get("submitted_at")) or 0,
                text=review.get("body") or "",
            )
            for review in self.paginate(self._url(f"/pulls/{number}/reviews"), DETAIL_PARAMS)
        ]
        return PullRequest(
            ref=IssueRef.pull(number),
            title=item.get("title") or "",
            description=item.get("body") or "",
            labels=[label["name"] for label in item.get("labels", [])],
            state=PrState.CLOSED if item.get("state") == "closed" else PrState.OPEN,
            merged=merged,
            merge_commit=item.get("merge_commit_sha") if merged else None,
            created_at=parse_github_time(item["created_at"]),
            closed_at=parse_github_time(item.get("closed_at")),
            assignee=_login(item.get("assignee")),
            inner_commits=inner,
            comments=self._comments(number),
            reviews=reviews,
            integrated_links=links,
            mentions=mentions,
            commit_mentions=commits,
        )

    def fetch(self, window: Tuple[int, int]) -> Snapshot:
        start, end = window

        def in_window(item: Dict[str, Any]) -> bool:
            created = parse_github_time(item.get("created_at"))
            return created is not None and start <= created <= end

        raw_issues = [
            item
            for item in self.paginate(self._url("/issues"), LIST_PARAMS)
            if "pull_request" not in item and in_window(item)
        ]
        raw_pulls = [item for item in self.paginate(self._url("/pulls"), LIST_PARAMS) if in_window(item)]
        logger.info(
            f"GitHub {self.project}: {len(raw_issues)} issues, {len(raw_pulls)} pull requests in window"
        )
        with ThreadPoolExecutor(max_workers=self.page_workers) as pool:
            issues = list(pool.map(self._issue, raw_issues))
            pulls = [pr for pr in pool.map(self._pull, raw_pulls) if pr is not None]
        return Snapshot(project_id=self.project, fetched_at=end, issues=issues, pulls=pulls)


def github_client(
    token: Optional[str] = None, transport: Optional[Transport] = None, **policy
) -> ForgeClient:
    token = token or os.environ.get(TOKEN_ENV)
    headers = {"Accept": "application/vnd.github.v3+json"}
    if token:
        headers["Authorization"] = f"token {token}"
    return ForgeClient(transport or LiveTransport(), headers=headers, **policy)


def fetch_github(
    project: str,
    token: Optional[str],
    window: Tuple[int, int],
    transport: Optional[Transport] = None,
    include_details: bool = True,
    page_workers: int = 4,
    base_url: str = API_URL,
    client: Optional[ForgeClient] = None,
) -> Snapshot:
    """Fetch all issues and pull requests of ``owner/name`` created inside ``window``."""
    fetcher = GithubFetcher(
        project,
        client or github_client(token, transport),
        base_url=base_url,
        page_workers=page_workers,
        include_details=include_details,
    )
    return fetcher.fetch(window)
