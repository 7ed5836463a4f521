"""
Snapshot persistence and bug ticket selection.

Layout of a snapshot directory::

    manifest.json          project id, fetch time, entity keys
    issues/<key>.json      one canonical-JSON file per ticket
    pulls/<key>.json       one canonical-JSON file per pull request

Canonical JSON: UTF-8, sorted keys, two-space indent, LF line endings, trailing newline.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, ValidationError

from .errors import SchemaViolation, SnapshotIoError
from .forge_models import (
    ForgeEntity,
    IssueSystem,
    IssueTicket,
    PrState,
    PullRequest,
    Snapshot,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

DEFAULT_BUG_LABELS = ("bug", "type: bug", "kind/bug", "defect")
RESOLVED_JIRA_STATUSES = {"resolved", "closed", "done"}
NON_FIX_RESOLUTIONS = {"won't fix", "wont fix", "invalid", "duplicate"}


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_canonical(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(canonical_json(data))
    except (OSError, UnicodeError) as e:
        raise SnapshotIoError(f"Cannot write {path}: {e}", path=path) from e


def read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise SnapshotIoError(f"Cannot read {path}: {e}", path=path) from e
    except ValueError as e:
        raise SchemaViolation(path.stem, "<document>", f"is not valid JSON ({e})") from e


def _dump(model: BaseModel) -> Dict[str, Any]:
    return model.model_dump(mode="json")


def _validate(model_type, data: Any, entity: str):
    try:
        return model_type.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first.get("loc", ())) or "<root>"
        raise SchemaViolation(entity, field, first.get("msg", "is invalid")) from e


def save_snapshot(snapshot: Snapshot, directory: Path) -> None:
    """Write a snapshot in canonical form; stale entity files are removed."""
    directory = Path(directory)
    manifest = {
        "format_version": FORMAT_VERSION,
        "project_id": snapshot.project_id,
        "fetched_at": snapshot.fetched_at,
        "issues": [ticket.ref.key for ticket in snapshot.issues],
        "pulls": [pr.ref.key for pr in snapshot.pulls],
    }
    extra = {
        key: value
        for key, value in _dump(snapshot).items()
        if key not in ("project_id", "fetched_at", "issues", "pulls")
    }
    if extra:
        manifest["extra"] = extra

    for sub, entities in (("issues", snapshot.issues), ("pulls", snapshot.pulls)):
        folder = directory / sub
        wanted = {f"{entity.ref.key}.json" for entity in entities}
        if folder.exists():
            for stale in folder.glob("*.json"):
                if stale.name not in wanted:
                    stale.unlink()
        for entity in entities:
            write_canonical(folder / f"{entity.ref.key}.json", _dump(entity))
    write_canonical(directory / "manifest.json", manifest)
    logger.info(
        f"Saved snapshot {snapshot.project_id}: {len(snapshot.issues)} issues, "
        f"{len(snapshot.pulls)} pull requests -> {directory}"
    )


def load_snapshot(directory: Path) -> Snapshot:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise SnapshotIoError(f"No snapshot manifest in {directory}", path=directory)
    manifest = read_json(manifest_path)
    if not isinstance(manifest, dict) or "project_id" not in manifest:
        raise SchemaViolation("manifest", "project_id", "is required")

    issues = [
        _validate(IssueTicket, read_json(directory / "issues" / f"{key}.json"), f"issue {key}")
        for key in manifest.get("issues", [])
    ]
    pulls = [
        _validate(PullRequest, read_json(directory / "pulls" / f"{key}.json"), f"pull {key}")
        for key in manifest.get("pulls", [])
    ]
    data = dict(manifest.get("extra", {}))
    data.update(
        project_id=manifest["project_id"],
        fetched_at=manifest.get("fetched_at", 0),
        issues=issues,
        pulls=pulls,
    )
    snapshot = _validate(Snapshot, data, "manifest")
    logger.debug(f"Loaded snapshot {snapshot.project_id} from {directory}")
    return snapshot


def is_resolved(entity: ForgeEntity) -> bool:
    if isinstance(entity, PullRequest):
        return entity.state == PrState.CLOSED
    if entity.ref.system == IssueSystem.JIRA_ISSUE:
        if entity.status.strip().lower() not in RESOLVED_JIRA_STATUSES:
            return False
        resolution = (entity.resolution or "").strip().lower()
        return bool(resolution) and resolution not in NON_FIX_RESOLUTIONS
    return entity.status.strip().lower() == "closed" or entity.closed_at is not None


def select_bug_tickets(
    snapshot: Snapshot, bug_labels: Optional[Iterable[str]] = None
) -> List[Union[IssueTicket, PullRequest]]:
    """Bug-labelled tickets and pull requests that are resolved."""
    labels = list(bug_labels) if bug_labels is not None else list(DEFAULT_BUG_LABELS)
    selected = [
        entity for entity in snapshot.entities() if entity.has_label(labels) and is_resolved(entity)
    ]
    logger.info(f"Selected {len(selected)} resolved bug tickets of {len(snapshot.entities())}")
    return selected
