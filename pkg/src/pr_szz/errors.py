"""
Error hierarchy for PR-SZZ.

Every error carries an exit code for the CLI and renders the machine-readable error
record used on stderr and in MCP tool responses.
"""

from datetime import datetime
from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_PIPELINE_FAILURE = 1
EXIT_USAGE = 2


class PrSzzError(Exception):
    """Base class for all PR-SZZ errors."""

    exit_code = EXIT_PIPELINE_FAILURE

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        record = {
            "status": "error",
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "timestamp": datetime.now().isoformat(),
        }
        if self.details:
            record["details"] = {key: str(value) for key, value in self.details.items()}
        return record


# Repository access


class VcsError(PrSzzError):
    pass


class NotARepository(VcsError):
    exit_code = EXIT_USAGE


class CorruptObjectDatabase(VcsError):
    pass


class UnknownCommit(VcsError):
    def __init__(self, commit: str):
        super().__init__(f"Unknown commit: {commit}", commit=commit)
        self.commit = commit


class PathNotPresent(VcsError):
    def __init__(self, commit: str, path: str):
        super().__init__(f"Path {path} not present at {commit}", commit=commit, path=path)
        self.commit = commit
        self.path = path


class LineOutOfRange(VcsError):
    def __init__(self, commit: str, path: str, line: int, length: int):
        super().__init__(
            f"Line {line} out of range for {path} at {commit} ({length} lines)",
            commit=commit,
            path=path,
            line=line,
        )
        self.line = line


# Forge data and snapshots


class ForgeError(PrSzzError):
    pass


class AuthFailure(ForgeError):
    exit_code = EXIT_USAGE


class RateLimitExhausted(ForgeError):
    pass


class NetworkError(ForgeError):
    pass


class SnapshotError(PrSzzError):
    pass


class SchemaViolation(SnapshotError):
    """A snapshot entity failed validation; names the entity and the offending field."""

    def __init__(self, entity: str, field: str, reason: str):
        super().__init__(
            f"Schema violation in {entity}: field '{field}' {reason}",
            entity=entity,
            field=field,
        )
        self.entity = entity
        self.field = field


class SnapshotIoError(SnapshotError):
    pass


# Pull request reconstruction


class ReconstructionError(PrSzzError):
    pass


class NotMerged(ReconstructionError):
    def __init__(self, pr_key: str):
        super().__init__(f"Pull request #{pr_key} is not merged", pr=pr_key)


class StrategyUnknown(ReconstructionError):
    def __init__(self, pr_key: str):
        super().__init__(f"Merge strategy of pull request #{pr_key} is unknown", pr=pr_key)


# Change filtering


class FilterError(PrSzzError):
    pass


class NoAncestorOutsidePr(FilterError):
    def __init__(self, commit: str):
        super().__init__(f"No ancestor of {commit} lies outside its pull request", commit=commit)


# Datasets and evaluation


class EvaluationError(PrSzzError):
    pass


class MissingTruth(EvaluationError):
    exit_code = EXIT_USAGE

    def __init__(self, item: str, message: Optional[str] = None):
        super().__init__(message or f"No ground truth for {item}", item=item)
        self.item = item


class DatasetIoError(EvaluationError):
    pass


# Configuration, stages and fixtures


class ConfigError(PrSzzError):
    exit_code = EXIT_USAGE


class FixtureError(PrSzzError):
    exit_code = EXIT_USAGE


class MissingStageOutput(PrSzzError):
    """A stage ran before the stage whose outputs it consumes."""

    exit_code = EXIT_USAGE

    def __init__(self, path, stage: str):
        super().__init__(f"Missing {path}; run the '{stage}' stage first", path=path, stage=stage)
