"""
Tracing of bug-inducing commits and the SZZ variant configurations.

A variant is a set of option flags plus an optional selection strategy. Tracing blames the
lines a filtered fix touched, turns the origins into suspects, rejects suspects by time
and pull request membership, secures suspects whose pull request is linked to the fixing
pull request, refines survivors to file and method level, and optionally selects one
inducing commit.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, Field, model_validator

from .errors import ConfigError, VcsError
from .fixes import FixRecord
from .filters import Filter, FilteredFix, filter_fix
from .forge_models import IssueRef, PullRequest, Snapshot
from .lexer import (
    MethodSpan,
    ProfileRegistry,
    enclosing_method_span,
    is_cosmetic_hunk,
    is_cosmetic_line,
    window_lines,
)
from .links import DistinctBug, LinkGraph
from .reconstruct import InnerCommitMap, MergeStrategy, normalize_line
from .vcs import LineOrigin, RepositoryHandle, patch_added_lines

logger = logging.getLogger(__name__)


class VariantOption(str, Enum):
    TEMPORAL = "temporal"
    COSMETIC_FILTER = "cosmetic_filter"
    META_FILTER = "meta_filter"
    LINE_MAPPING = "line_mapping"
    METHOD_TRACE = "method_trace"
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"
    SIZE_THRESHOLD = "size_threshold"
    INSIDE_FIX_PR = "inside_fix_pr"


class Selection(str, Enum):
    LARGEST = "Largest"
    RECENT = "Recent"
    PR_SELECT = "PrSelect"


@dataclass(frozen=True)
class VariantId:
    name: str
    options: FrozenSet[VariantOption]
    selection: Optional[Selection] = None

    def has(self, option: VariantOption) -> bool:
        return option in self.options


_B = frozenset({VariantOption.TEMPORAL})
_AG = _B | {VariantOption.COSMETIC_FILTER}
_MA = _AG | {VariantOption.META_FILTER}
_PR = frozenset(
    {
        VariantOption.F1,
        VariantOption.F2,
        VariantOption.F3,
        VariantOption.COSMETIC_FILTER,
        VariantOption.META_FILTER,
        VariantOption.LINE_MAPPING,
        VariantOption.METHOD_TRACE,
        VariantOption.TEMPORAL,
        VariantOption.S1,
        VariantOption.S2,
        VariantOption.S3,
        VariantOption.SIZE_THRESHOLD,
        VariantOption.INSIDE_FIX_PR,
    }
)

VARIANTS: Dict[str, VariantId] = {
    "B": VariantId("B", _B),
    "AG": VariantId("AG", _AG),
    "MA": VariantId("MA", _MA),
    "L": VariantId("L", _MA, Selection.LARGEST),
    "R": VariantId("R", _MA, Selection.RECENT),
    "PR": VariantId("PR", _PR),
    "PR_SELECT": VariantId("PR_SELECT", _PR, Selection.PR_SELECT),
}


def get_variant(name: str) -> VariantId:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ConfigError(f"Unknown variant '{name}'; known: {', '.join(VARIANTS)}") from None


class RejectionReason(str, Enum):
    META_CHANGE = "MetaChange"
    AFTER_BUG_REPORT = "AfterBugReport"
    AFTER_PR_CREATED = "AfterPrCreated"
    INSIDE_FIX_PR = "InsideFixPr"
    OUTRANKED_BY_SECURED = "OutrankedBySecured"


@dataclass(frozen=True)
class RejectionRuleSet:
    temporal: bool = True
    pr_temporal: bool = False
    inside_fix_pr: bool = False

    @classmethod
    def for_variant(cls, variant: VariantId) -> "RejectionRuleSet":
        return cls(
            temporal=variant.has(VariantOption.TEMPORAL),
            pr_temporal=variant.has(VariantOption.S1),
            inside_fix_pr=variant.has(VariantOption.INSIDE_FIX_PR),
        )


class Contribution(BaseModel):
    path: str
    base_line: int
    origin_path: str
    origin_line: int


class Suspect(BaseModel):
    commit: str
    commit_time: int
    contributions: List[Contribution] = Field(default_factory=list)
    secured: bool = False
    rejected_reason: Optional[RejectionReason] = None
    owner_pr: Optional[IssueRef] = None

    @model_validator(mode="after")
    def check_secured(self) -> "Suspect":
        if self.secured and self.rejected_reason is not None:
            raise ValueError("a secured suspect cannot be rejected")
        return self

    @property
    def live(self) -> bool:
        return self.rejected_reason is None


class Level(str, Enum):
    COMMIT = "Commit"
    FILE = "File"
    METHOD = "Method"


class FineGrainedEntry(BaseModel):
    level: Level
    inducing_commit: str
    path: Optional[str] = None
    method_header: Optional[str] = None
    method_span: Optional[Tuple[int, int]] = None
    fix_path: Optional[str] = None
    fix_method_header: Optional[str] = None
    inner_commits: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_level(self) -> "FineGrainedEntry":
        if self.level != Level.COMMIT and self.path is None:
            raise ValueError(f"{self.level.value} entry needs a path")
        if self.level == Level.METHOD and self.method_span is None:
            raise ValueError("method entry needs a span")
        return self


class TraceResult(BaseModel):
    bug: IssueRef
    fix: str
    fixing_pr: Optional[IssueRef] = None
    variant: str
    base: Optional[str] = None
    suspects: List[Suspect] = Field(default_factory=list)
    selected: Optional[str] = None
    fine_grained: List[FineGrainedEntry] = Field(default_factory=list)
    filters_applied: List[str] = Field(default_factory=list)
    size_rejection: Optional[str] = None
    skipped_files: List[str] = Field(default_factory=list)
    inner_restricted: bool = False

    @model_validator(mode="after")
    def check_selected(self) -> "TraceResult":
        if self.selected is not None and self.selected not in {s.commit for s in self.suspects}:
            raise ValueError("selected commit is not a suspect")
        return self

    def live_commits(self) -> List[str]:
        return [s.commit for s in self.suspects if s.live]


# Tracing


def _removed_to_trace(hunk, profile, cosmetic: bool) -> List[int]:
    removed_texts = [text for _, text in hunk.removed]
    added_texts = [text for _, text in hunk.added]
    if not cosmetic:
        return [line for line, _ in hunk.removed]
    if is_cosmetic_hunk(removed_texts, added_texts, profile):
        return []
    paired = len(removed_texts) == len(added_texts)
    lines = []
    for index, (line, text) in enumerate(hunk.removed):
        counterpart = added_texts[index] if paired else None
        if is_cosmetic_line(text, None, profile):
            continue
        if counterpart is not None and is_cosmetic_line(text, counterpart, profile):
            continue
        lines.append(line)
    return lines


def _method_lines(
    repo: RepositoryHandle, base: str, path: str, hunk, profile, cosmetic: bool
) -> List[int]:
    """Lines at the base standing in for a pure addition: its method, or a window."""
    if cosmetic and all(is_cosmetic_line(None, text, profile) for _, text in hunk.added):
        return []
    content = repo.file_lines(base, path)
    if not content:
        return []
    anchor = min(max(hunk.old_start - 1, 1), len(content))
    span = enclosing_method_span(repo, base, path, anchor, profile)
    if isinstance(span, MethodSpan):
        lines = range(span.start, span.end + 1)
    else:
        lines = window_lines(anchor, len(content))
    if cosmetic:
        return [n for n in lines if not is_cosmetic_line(content[n - 1], None, profile)]
    return list(lines)


def _cosmetic_origin(repo: RepositoryHandle, origin: LineOrigin, profiles: ProfileRegistry) -> bool:
    """True when the origin commit's change to the line was cosmetic."""
    profile = profiles.for_path(origin.origin_path)
    if profile is None:
        return False
    commit = repo.commit(origin.origin_commit)
    if not commit.parents:
        return False
    for diff in repo.first_parent_diff(commit.id):
        if diff.new_path != origin.origin_path:
            continue
        for hunk in diff.hunks:
            added = [line for line, _ in hunk.added]
            if origin.origin_line not in added:
                continue
            removed_texts = [text for _, text in hunk.removed]
            added_texts = [text for _, text in hunk.added]
            if not removed_texts:
                return is_cosmetic_line(None, added_texts[added.index(origin.origin_line)], profile)
            if is_cosmetic_hunk(removed_texts, added_texts, profile):
                return True
            index = added.index(origin.origin_line)
            if len(removed_texts) == len(added_texts):
                return is_cosmetic_line(removed_texts[index], added_texts[index], profile)
            return False
    return False


def blame_skip(
    repo: RepositoryHandle, variant: VariantId, profiles: ProfileRegistry
) -> Optional[Callable[[LineOrigin], bool]]:
    meta = variant.has(VariantOption.META_FILTER)
    cosmetic = variant.has(VariantOption.COSMETIC_FILTER)
    if not meta and not cosmetic:
        return None

    def skip(origin: LineOrigin) -> bool:
        if meta and repo.is_meta_change(origin.origin_commit):
            return True
        return cosmetic and _cosmetic_origin(repo, origin, profiles)

    return skip


def trace_suspects(
    repo: RepositoryHandle,
    filtered: FilteredFix,
    variant: VariantId,
    profiles: ProfileRegistry,
    skipped_files: Optional[List[str]] = None,
) -> List[Suspect]:
    """Blame removed lines (and method spans of pure additions) at the diff base."""
    if filtered.base is None or not filtered.files:
        return []
    cosmetic = variant.has(VariantOption.COSMETIC_FILTER)
    skip = blame_skip(repo, variant, profiles)
    by_commit: Dict[str, List[Contribution]] = {}

    for diff in filtered.files:
        path = diff.old_path
        if path is None:
            continue
        profile = profiles.for_path(path) if cosmetic or variant.has(VariantOption.METHOD_TRACE) else None
        try:
            lines: Set[int] = set()
            for hunk in diff.hunks:
                if hunk.removed:
                    lines.update(_removed_to_trace(hunk, profile if cosmetic else None, cosmetic))
                elif hunk.added and variant.has(VariantOption.METHOD_TRACE):
                    lines.update(
                        _method_lines(repo, filtered.base, path, hunk, profile, cosmetic)
                    )
            if not lines:
                continue
            origins = repo.blame_lines(
                filtered.base,
                path,
                lines,
                ignore_whitespace=cosmetic,
                detect_moves=variant.has(VariantOption.LINE_MAPPING),
                skip=skip,
            )
        except VcsError as e:
            logger.warning(f"Skipping {path} of fix {filtered.fixing_commit[:10]}: {e}")
            if skipped_files is not None:
                skipped_files.append(path)
            continue
        for origin in origins:
            by_commit.setdefault(origin.origin_commit, []).append(
                Contribution(
                    path=path,
                    base_line=origin.line,
                    origin_path=origin.origin_path,
                    origin_line=origin.origin_line,
                )
            )

    suspects = []
    for commit_id in sorted(by_commit):
        contributions = sorted(by_commit[commit_id], key=lambda c: (c.path, c.base_line))
        suspects.append(
            Suspect(
                commit=commit_id,
                commit_time=repo.commit(commit_id).commit_time,
                contributions=contributions,
            )
        )
    return suspects


def reject_suspects(
    suspects: Sequence[Suspect],
    bug: DistinctBug,
    fixing_pr: Optional[PullRequest],
    rules: RejectionRuleSet,
    fix_map: Optional[InnerCommitMap] = None,
) -> List[Suspect]:
    """Reject by membership in the fixing PR, then PR creation time, then report time."""
    inside = fix_map.pr_commits if fix_map is not None else set()
    result = []
    for suspect in suspects:
        reason = None
        if rules.inside_fix_pr and suspect.commit in inside:
            reason = RejectionReason.INSIDE_FIX_PR
        elif rules.pr_temporal and fixing_pr is not None and suspect.commit_time > fixing_pr.created_at:
            reason = RejectionReason.AFTER_PR_CREATED
        elif rules.temporal and suspect.commit_time > bug.created_at:
            reason = RejectionReason.AFTER_BUG_REPORT
        if reason is not None:
            logger.debug(f"{bug.canonical}: suspect {suspect.commit[:10]} rejected ({reason.value})")
        result.append(suspect.model_copy(update={"rejected_reason": reason, "secured": False}))
    return result


def owner_index(inner_maps: Dict[IssueRef, InnerCommitMap]) -> Dict[str, IssueRef]:
    """VCS commit -> the pull request that brought it in (lowest number on conflicts)."""
    owners: Dict[str, IssueRef] = {}
    for pr_ref in sorted(inner_maps, key=lambda r: r.sort_key()):
        for commit in sorted(inner_maps[pr_ref].pr_commits):
            owners.setdefault(commit, pr_ref)
    return owners


def mark_secured(
    suspects: Sequence[Suspect],
    fixing_pr: Optional[PullRequest],
    graph: LinkGraph,
    owners: Dict[str, IssueRef],
) -> List[Suspect]:
    """Secure suspects whose pull request is linked to the fixing one.

    A secured suspect loses an AfterBugReport rejection; AfterPrCreated and InsideFixPr
    still hold.
    """
    result = []
    for suspect in suspects:
        owner = owners.get(suspect.commit)
        update = {"owner_pr": owner}
        if fixing_pr is not None:
            linked = owner is not None and owner != fixing_pr.ref and graph.linked(owner, fixing_pr.ref)
            if linked or graph.has_edge(fixing_pr.ref, suspect.commit):
                if suspect.rejected_reason in (None, RejectionReason.AFTER_BUG_REPORT):
                    update.update(secured=True, rejected_reason=None)
        result.append(suspect.model_copy(update=update))
    return result


def secured_only(suspects: Sequence[Suspect]) -> List[Suspect]:
    """With any secured suspect present, reject the unsecured live ones."""
    if not any(s.secured for s in suspects):
        return list(suspects)
    return [
        s.model_copy(update={"rejected_reason": RejectionReason.OUTRANKED_BY_SECURED})
        if s.live and not s.secured
        else s
        for s in suspects
    ]


def select_inducing(
    suspects: Sequence[Suspect], strategy: Selection, repo: Optional[RepositoryHandle] = None
) -> Optional[str]:
    live = [s for s in suspects if s.live]
    if not live:
        return None
    if strategy == Selection.LARGEST:
        if repo is None:
            raise ValueError("largest-commit selection needs the repository for change sizes")
        return max(live, key=lambda s: (repo.change_size(s.commit), s.commit_time, s.commit)).commit
    if strategy == Selection.PR_SELECT:
        secured = [s for s in live if s.secured]
        if secured:
            live = secured
    return max(live, key=lambda s: (s.commit_time, s.commit)).commit


# Fine-grained refinement


def _inner_touching(
    repo: RepositoryHandle, suspect: Suspect, contribution: Contribution, pr: PullRequest
) -> List[str]:
    """Inner commits of a squashed PR whose patch added the blamed line's text."""
    lines = repo.file_lines(suspect.commit, contribution.origin_path)
    if contribution.origin_line > len(lines):
        return []
    text = normalize_line(lines[contribution.origin_line - 1])
    touching = []
    for inner in pr.inner_commits:
        for item in inner.files or []:
            if item.path != contribution.origin_path:
                continue
            if text in {normalize_line(added) for added in patch_added_lines(item.patch)}:
                touching.append(inner.hash)
                break
    return touching


def refine_fine_grained(
    suspect: Suspect,
    filtered: FilteredFix,
    repo: RepositoryHandle,
    profiles: ProfileRegistry,
    sus_pr: Optional[PullRequest] = None,
    sus_map: Optional[InnerCommitMap] = None,
    restrict_inner: bool = True,
) -> Tuple[List[FineGrainedEntry], bool]:
    """Commit, file and method entries for one suspect; flags an inner-commit restriction."""
    contributions = list(suspect.contributions)
    inner_by_contribution: Dict[int, List[str]] = {}
    restricted = False
    squashed = (
        restrict_inner
        and sus_pr is not None
        and sus_map is not None
        and sus_map.strategy == MergeStrategy.SQUASH
        and sus_pr.inner_files_available()
    )
    if squashed:
        kept = []
        for contribution in contributions:
            touching = _inner_touching(repo, suspect, contribution, sus_pr)
            if touching:
                inner_by_contribution[len(kept)] = touching
                kept.append(contribution)
        restricted = True
        contributions = kept

    all_inner = sorted({h for hashes in inner_by_contribution.values() for h in hashes})
    entries = [FineGrainedEntry(level=Level.COMMIT, inducing_commit=suspect.commit, inner_commits=all_inner)]
    files: Dict[str, FineGrainedEntry] = {}
    methods: Dict[Tuple[str, str], FineGrainedEntry] = {}
    for index, contribution in enumerate(contributions):
        inner = inner_by_contribution.get(index, [])
        file_entry = files.get(contribution.origin_path)
        if file_entry is None:
            files[contribution.origin_path] = FineGrainedEntry(
                level=Level.FILE,
                inducing_commit=suspect.commit,
                path=contribution.origin_path,
                fix_path=contribution.path,
                inner_commits=inner,
            )
        else:
            file_entry.inner_commits = sorted(set(file_entry.inner_commits) | set(inner))

        profile = profiles.for_path(contribution.origin_path)
        try:
            span = enclosing_method_span(
                repo, suspect.commit, contribution.origin_path, contribution.origin_line, profile
            )
            fix_span = enclosing_method_span(
                repo, filtered.base, contribution.path, contribution.base_line, profiles.for_path(contribution.path)
            )
        except VcsError as e:
            logger.debug(f"No method span for {contribution.origin_path}@{suspect.commit[:10]}: {e}")
            continue
        if not isinstance(span, MethodSpan):
            continue
        key = (contribution.origin_path, span.identity)
        if key in methods:
            methods[key].inner_commits = sorted(set(methods[key].inner_commits) | set(inner))
            continue
        methods[key] = FineGrainedEntry(
            level=Level.METHOD,
            inducing_commit=suspect.commit,
            path=contribution.origin_path,
            method_header=span.identity,
            method_span=(span.start, span.end),
            fix_path=contribution.path,
            fix_method_header=fix_span.identity if isinstance(fix_span, MethodSpan) else None,
            inner_commits=inner,
        )
    entries.extend(files[path] for path in sorted(files))
    entries.extend(methods[key] for key in sorted(methods))
    return entries, restricted


# Running a variant


@dataclass
class TraceContext:
    repo: RepositoryHandle
    snapshot: Snapshot
    graph: LinkGraph
    inner_maps: Dict[IssueRef, InnerCommitMap]
    bugs: Dict[IssueRef, DistinctBug]
    profiles: ProfileRegistry = field(default_factory=ProfileRegistry.builtin)
    max_files: int = 100
    max_lines: int = 10000
    secured_only: bool = False
    jobs: int = 1
    _owners: Optional[Dict[str, IssueRef]] = None

    @property
    def owners(self) -> Dict[str, IssueRef]:
        if self._owners is None:
            self._owners = owner_index(self.inner_maps)
        return self._owners


def trace_fix(variant: VariantId, fix: FixRecord, context: TraceContext) -> Optional[TraceResult]:
    if fix.fixing_commit is None:
        return None
    bug = context.bugs[fix.bug]
    filtered = filter_fix(
        fix,
        context.repo,
        context.snapshot,
        context.inner_maps,
        bug,
        use_f1=variant.has(VariantOption.F1),
        use_f2=variant.has(VariantOption.F2),
        use_f3=variant.has(VariantOption.F3),
        size_threshold=variant.has(VariantOption.SIZE_THRESHOLD),
        max_files=context.max_files,
        max_lines=context.max_lines,
    )
    skipped: List[str] = []
    suspects = trace_suspects(context.repo, filtered, variant, context.profiles, skipped)

    uses_pr = variant.has(VariantOption.S1) or variant.has(VariantOption.INSIDE_FIX_PR)
    fixing_pr = filtered.pr if uses_pr or variant.has(VariantOption.S2) else None
    suspects = reject_suspects(
        suspects,
        bug,
        fixing_pr,
        RejectionRuleSet.for_variant(variant),
        filtered.pr_map if variant.has(VariantOption.INSIDE_FIX_PR) else None,
    )
    if variant.has(VariantOption.S2):
        suspects = mark_secured(suspects, fixing_pr, context.graph, context.owners)
        if context.secured_only:
            suspects = secured_only(suspects)

    selected = None
    if variant.selection is not None:
        selected = select_inducing(suspects, variant.selection, context.repo)

    fine_grained: List[FineGrainedEntry] = []
    inner_restricted = False
    refined = [s for s in suspects if s.commit == selected] if variant.selection else suspects
    for suspect in refined:
        if not suspect.live:
            continue
        owner = context.owners.get(suspect.commit)
        sus_pr = context.snapshot.entity(owner) if owner is not None else None
        entries, restricted = refine_fine_grained(
            suspect,
            filtered,
            context.repo,
            context.profiles,
            sus_pr if isinstance(sus_pr, PullRequest) else None,
            context.inner_maps.get(owner) if owner is not None else None,
            restrict_inner=variant.has(VariantOption.S3),
        )
        fine_grained.extend(entries)
        inner_restricted = inner_restricted or restricted

    return TraceResult(
        bug=fix.bug,
        fix=filtered.fixing_commit,
        fixing_pr=fix.fixing_pr,
        variant=variant.name,
        base=filtered.base,
        suspects=suspects,
        selected=selected,
        fine_grained=fine_grained,
        filters_applied=sorted(f.value for f in filtered.filters_applied),
        size_rejection=filtered.rejected,
        skipped_files=sorted(skipped),
        inner_restricted=inner_restricted,
    )


def run_variant(variant: VariantId, fixes: Sequence[FixRecord], context: TraceContext) -> List[TraceResult]:
    """Trace every matched fix under one variant; unmatched bugs produce no result."""
    with ThreadPoolExecutor(max_workers=max(context.jobs, 1)) as pool:
        traced = list(pool.map(lambda fix: trace_fix(variant, fix, context), fixes))
    results = sorted(
        (r for r in traced if r is not None), key=lambda r: (r.bug.sort_key(), r.fix)
    )
    suspects = sum(len(r.suspects) for r in results)
    live = sum(len(r.live_commits()) for r in results)
    logger.info(
        f"Variant {variant.name}: {len(results)} fixes traced, {suspects} suspects, {live} not rejected"
    )
    return results


def applicability(results: Sequence[TraceResult]) -> Dict[str, int]:
    """How many traced fixes each filter or suspect rule affected."""
    counts = {name: 0 for name in ("f1", "f2", "f3", "size_threshold", "s1", "s2", "s3")}
    for result in results:
        applied = set(result.filters_applied)
        counts["f1"] += Filter.F1.value in applied
        counts["f2"] += Filter.F2.value in applied
        counts["f3"] += Filter.F3.value in applied
        counts["size_threshold"] += Filter.SIZE_THRESHOLD.value in applied
        counts["s1"] += any(s.rejected_reason == RejectionReason.AFTER_PR_CREATED for s in result.suspects)
        counts["s2"] += any(s.secured for s in result.suspects)
        counts["s3"] += result.inner_restricted
    return counts
