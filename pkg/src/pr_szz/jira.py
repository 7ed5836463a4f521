"""
Jira REST v2 fetcher.

Issues are collected through ``/rest/api/2/search`` with a JQL window on the creation
date, paged by ``startAt``. The issue type is folded into the labels so the bug-label
vocabulary applies uniformly; "Issue Links" become integrated links, and remote links that
point to GitHub pull requests can be captured as well.
"""

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

from .errors import SchemaViolation
from .forge_models import Comment, IntegratedLink, IssueRef, IssueTicket, Snapshot
from .transport import ForgeClient, LiveTransport, Transport

logger = logging.getLogger(__name__)

TOKEN_ENV = "PRSZZ_JIRA_TOKEN"
PAGE_SIZE = 100
SEARCH_FIELDS = (
    "summary,description,labels,status,resolution,created,resolutiondate,"
    "assignee,comment,issuelinks,issuetype"
)
GITHUB_PULL_URL = re.compile(r"github\.com/[^/]+/[^/]+/pull/(\d+)")


def parse_jira_time(value: Optional[str]) -> Optional[int]:
    if not value:
        return None
    return int(datetime.strptime(value, "%Y-%m-%dT%H:%M:%S.%f%z").timestamp())


def _jql_time(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y/%m/%d %H:%M")


def search_params(project_key: str, window: Tuple[int, int], start_at: int) -> Dict[str, Any]:
    start, end = window
    jql = (
        f'project = "{project_key}" AND created >= "{_jql_time(start)}" '
        f'AND created <= "{_jql_time(end)}" ORDER BY key ASC'
    )
    return {"jql": jql, "startAt": start_at, "maxResults": PAGE_SIZE, "fields": SEARCH_FIELDS}


def _person(value: Optional[Dict[str, Any]]) -> Optional[str]:
    if not value:
        return None
    return value.get("name") or value.get("displayName")


class JiraFetcher:
    def __init__(
        self,
        base_url: str,
        project_key: str,
        client: ForgeClient,
        page_workers: int = 4,
        include_remote_links: bool = False,
    ):
        self.base_url = base_url.rstrip("/")
        self.project_key = project_key
        self.client = client
        self.page_workers = page_workers
        self.include_remote_links = include_remote_links

    def search(self, window: Tuple[int, int]) -> List[Dict[str, Any]]:
        url = f"{self.base_url}/rest/api/2/search"
        first = self.client.get(url, search_params(self.project_key, window, 0)).body or {}
        issues = list(first.get("issues", []))
        total = int(first.get("total", len(issues)))
        offsets = range(PAGE_SIZE, total, PAGE_SIZE)
        with ThreadPoolExecutor(max_workers=self.page_workers) as pool:
            pages = pool.map(
                lambda offset: self.client.get(
                    url, search_params(self.project_key, window, offset)
                ).body
                or {},
                offsets,
            )
            for page in pages:
                issues.extend(page.get("issues", []))
        logger.info(f"Jira {self.project_key}: {len(issues)} of {total} issues fetched")
        return issues

    def _remote_links(self, key: str) -> List[IntegratedLink]:
        url = f"{self.base_url}/rest/api/2/issue/{key}/remotelink"
        links = []
        for item in self.client.get(url).body or []:
            match = GITHUB_PULL_URL.search(((item.get("object") or {}).get("url")) or "")
            if match:
                links.append(IntegratedLink(ref=IssueRef.pull(match.group(1)), kind="remote"))
        return links

    def _ticket(self, item: Dict[str, Any]) -> IssueTicket:
        key = item["key"]
        fields = item.get("fields") or {}
        labels = list(fields.get("labels") or [])
        issue_type = (fields.get("issuetype") or {}).get("name")
        if issue_type:
            labels.append(issue_type)

        links = []
        for link in fields.get("issuelinks") or []:
            kind = ((link.get("type") or {}).get("name") or "relates").lower()
            other = link.get("inwardIssue") or link.get("outwardIssue") or {}
            if other.get("key"):
                links.append(IntegratedLink(ref=IssueRef.jira(other["key"]), kind=kind))
        if self.include_remote_links:
            links.extend(self._remote_links(key))

        created_at = parse_jira_time(fields.get("created"))
        if created_at is None:
            raise SchemaViolation(f"issue {key}", "created_at", "is missing in the Jira response")
        comments = [
            Comment(
                author=_person(comment.get("author")),
                time=parse_jira_time(comment.get("created")) or 0,
                text=comment.get("body") or "",
            )
            for comment in (fields.get("comment") or {}).get("comments", [])
        ]
        return IssueTicket(
            ref=IssueRef.jira(key),
            title=fields.get("summary") or "",
            description=fields.get("description") or "",
            labels=labels,
            status=(fields.get("status") or {}).get("name", ""),
            resolution=(fields.get("resolution") or {}).get("name"),
            created_at=created_at,
            closed_at=parse_jira_time(fields.get("resolutiondate")),
            assignee=_person(fields.get("assignee")),
            comments=comments,
            integrated_links=links,
        )

    def fetch(self, window: Tuple[int, int]) -> Snapshot:
        tickets = [self._ticket(item) for item in self.search(window)]
        return Snapshot(project_id=self.project_key, fetched_at=window[1], issues=tickets)


def jira_client(
    token: Optional[str] = None, transport: Optional[Transport] = None, **policy
) -> ForgeClient:
    token = token or os.environ.get(TOKEN_ENV)
    headers = {"Accept": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return ForgeClient(transport or LiveTransport(), headers=headers, **policy)


def fetch_jira(
    base_url: str,
    project_key: str,
    token: Optional[str],
    window: Tuple[int, int],
    transport: Optional[Transport] = None,
    include_remote_links: bool = False,
    page_workers: int = 4,
    client: Optional[ForgeClient] = None,
) -> Snapshot:
    """Fetch the issues of one Jira project created inside ``window`` (issues only)."""
    fetcher = JiraFetcher(
        base_url,
        project_key,
        client or jira_client(token, transport),
        page_workers=page_workers,
        include_remote_links=include_remote_links,
    )
    return fetcher.fetch(window)
