"""
Pipeline stages: ingest, match, trace and evaluate.

Each stage reads the outputs of the previous one from disk and writes its own artifacts
under the output directory, followed by ``manifest.json`` with a SHA-256 digest per
artifact::

    fixes.json, fixes_bszz.json, links.csv        match
    traces/<variant>.json                          trace
    datasets/<variant>/{commit,file,method}.csv    trace
    statistics.json                                trace
    metrics.json, fixing_metrics.json              evaluate
    cache/blame.json                               blame cache (not an artifact)

Artifacts are canonical, so re-running a stage on unchanged inputs rewrites identical bytes.
"""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .config import ProjectConfig, TrackerSystem
from .dataset import eval_fixing, eval_inducing, load_truth, metrics_payload, write_dataset
from .errors import ConfigError, MissingStageOutput, MissingTruth
from .fixes import FixRecord, fixing_coverage, match_all_fixes, match_all_fixes_bszz
from .forge_models import IssueRef, Snapshot
from .github import API_URL, fetch_github
from .jira import fetch_jira
from .links import (
    DistinctBug,
    LinkGraph,
    add_transitive_edges,
    build_graph,
    merge_duplicate_bugs,
    write_links_csv,
)
from .reconstruct import InnerCommitMap, reconstruct_all
from .snapshot import load_snapshot, read_json, save_snapshot, select_bug_tickets, write_canonical
from .tracer import Level, TraceContext, TraceResult, applicability, get_variant, run_variant
from .transport import LiveTransport, ReplayTransport, Transport
from .vcs import RepositoryHandle, open_repository

logger = logging.getLogger(__name__)

FIXES = "fixes.json"
FIXES_BSZZ = "fixes_bszz.json"
LINKS = "links.csv"
TRACES = "traces"
DATASETS = "datasets"
STATISTICS = "statistics.json"
METRICS = "metrics.json"
FIXING_METRICS = "fixing_metrics.json"
MANIFEST = "manifest.json"
CACHE = "cache"


@dataclass
class Analysis:
    """Everything derived from the repository and the snapshot before matching."""

    repo: RepositoryHandle
    snapshot: Snapshot
    inner_maps: Dict[IssueRef, InnerCommitMap]
    graph: LinkGraph
    bugs: List[DistinctBug]

    @classmethod
    def prepare(cls, config: ProjectConfig) -> "Analysis":
        repo = open_repository(config.repo_path)
        snapshot = load_snapshot(config.snapshot_dir)
        inner_maps = reconstruct_all(snapshot, repo)
        graph = build_graph(
            snapshot, repo, inner_maps, config.project_keys, config.link_patterns()
        )
        add_transitive_edges(graph)
        tickets = select_bug_tickets(snapshot, config.bug_labels)
        bugs = merge_duplicate_bugs(tickets, graph, config.merge_duplicates)
        return cls(repo, snapshot, inner_maps, graph, bugs)


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_fixes(records: Sequence[FixRecord]) -> Dict[str, Any]:
    return {"fixes": [record.model_dump(mode="json") for record in records]}


class Pipeline:
    def __init__(self, config: ProjectConfig):
        self.config = config
        self.out = Path(config.output_dir)
        self._analysis: Optional[Analysis] = None

    def analysis(self) -> Analysis:
        if self._analysis is None:
            self._analysis = Analysis.prepare(self.config)
        return self._analysis

    # helpers

    def _write_manifest(self) -> None:
        artifacts = {}
        for path in sorted(self.out.rglob("*")):
            relative = path.relative_to(self.out)
            if not path.is_file() or relative.parts[0] == CACHE or relative.as_posix() == MANIFEST:
                continue
            artifacts[relative.as_posix()] = file_digest(path)
        write_canonical(
            self.out / MANIFEST, {"project_id": self.config.project_id, "artifacts": artifacts}
        )

    def _load_fixes(self, name: str) -> List[FixRecord]:
        path = self.out / name
        if not path.is_file():
            raise MissingStageOutput(path, "match")
        return [FixRecord.model_validate(item) for item in read_json(path)["fixes"]]

    def _load_traces(self, name: str) -> List[TraceResult]:
        path = self.out / TRACES / f"{name}.json"
        if not path.is_file():
            raise MissingStageOutput(path, "trace")
        return [TraceResult.model_validate(item) for item in read_json(path)["results"]]

    def _transport(self) -> Transport:
        if self.config.live:
            return LiveTransport(record_dir=self.config.replay_dir)
        if self.config.replay_dir is not None:
            return ReplayTransport(self.config.replay_dir)
        raise ConfigError("Ingest needs live access (--live) or recorded responses (--replay-dir)")

    def _variant_names(self, variants: Optional[Sequence[str]]) -> List[str]:
        names = list(variants) if variants else list(self.config.variants)
        for name in names:
            get_variant(name)
        return names

    # stages

    def ingest(self) -> Dict[str, Any]:
        """Fetch every configured tracker into one snapshot."""
        config = self.config
        if config.window is None:
            raise ConfigError("Ingest needs a time window (window.start, window.end)")
        window = config.window.as_tuple()
        transport = self._transport()
        parts: List[Snapshot] = []
        for tracker in config.trackers:
            if tracker.system == TrackerSystem.GITHUB:
                logger.info(f"Fetching GitHub project {tracker.project}")
                parts.append(
                    fetch_github(
                        tracker.project,
                        None,
                        window,
                        transport,
                        include_details=config.fetch_details,
                        page_workers=config.jobs,
                        base_url=tracker.base_url or API_URL,
                    )
                )
                continue
            if not tracker.base_url:
                raise ConfigError(f"Jira tracker {tracker.project} needs a base_url", field="trackers")
            for key in tracker.keys:
                logger.info(f"Fetching Jira project {key} from {tracker.base_url}")
                parts.append(
                    fetch_jira(
                        tracker.base_url,
                        key,
                        None,
                        window,
                        transport,
                        include_remote_links=True,
                        page_workers=config.jobs,
                    )
                )
        merged = parts[0]
        for part in parts[1:]:
            merged = merged.merge(part)
        snapshot = Snapshot(
            project_id=config.project_id,
            fetched_at=merged.fetched_at,
            issues=merged.issues,
            pulls=merged.pulls,
        )
        save_snapshot(snapshot, config.snapshot_dir)
        self._analysis = None
        return {
            "stage": "ingest",
            "issues": len(snapshot.issues),
            "pulls": len(snapshot.pulls),
            "snapshot_dir": str(config.snapshot_dir),
        }

    def match(self) -> Dict[str, Any]:
        """Fixing commits for every distinct bug, by PR-SZZ and by message matching alone."""
        config = self.config
        analysis = self.analysis()
        records = match_all_fixes(
            analysis.bugs,
            analysis.snapshot,
            analysis.repo,
            analysis.graph,
            analysis.inner_maps,
            config.project_keys,
            config.link_patterns(),
            jobs=config.jobs,
        )
        baseline = match_all_fixes_bszz(
            analysis.bugs, analysis.repo, config.project_keys, config.link_patterns()
        )
        write_canonical(self.out / FIXES, _dump_fixes(records))
        write_canonical(self.out / FIXES_BSZZ, _dump_fixes(baseline))
        write_links_csv(analysis.graph, self.out / LINKS)
        self._write_manifest()
        return {
            "stage": "match",
            "bugs": len(analysis.bugs),
            "mapped": sum(1 for r in records if r.is_mapped),
            "mapped_bszz": sum(1 for r in baseline if r.is_mapped),
            "links": analysis.graph.number_of_edges(),
        }

    def trace(self, variants: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """Run the SZZ variants over the matched fixes and write traces and datasets."""
        config = self.config
        names = self._variant_names(variants)
        fixes = self._load_fixes(FIXES)
        analysis = self.analysis()
        repo = analysis.repo
        cache_path = self.out / CACHE / "blame.json"
        state = repo.state_id()
        repo.blame_cache.load(cache_path, state)

        context = TraceContext(
            repo=repo,
            snapshot=analysis.snapshot,
            graph=analysis.graph,
            inner_maps=analysis.inner_maps,
            bugs={bug.canonical: bug for bug in analysis.bugs},
            profiles=config.profile_registry(),
            max_files=config.thresholds.max_files,
            max_lines=config.thresholds.max_lines,
            secured_only=config.secured_only,
            jobs=config.jobs,
        )
        summary: Dict[str, Any] = {}
        counters: Dict[str, Dict[str, int]] = {}
        for name in names:
            results = run_variant(get_variant(name), fixes, context)
            write_canonical(
                self.out / TRACES / f"{name}.json",
                {"variant": name, "results": [r.model_dump(mode="json") for r in results]},
            )
            rows = {
                level.value.lower(): write_dataset(
                    results, level, self.out / DATASETS / name / f"{level.value.lower()}.csv"
                )
                for level in Level
            }
            counters[name] = applicability(results)
            summary[name] = {"traced": len(results), "rows": rows}
        repo.blame_cache.save(cache_path, state)

        self._write_statistics(analysis, fixes, counters)
        self._write_manifest()
        return {"stage": "trace", "variants": summary}

    def _write_statistics(
        self, analysis: Analysis, fixes: List[FixRecord], counters: Dict[str, Dict[str, int]]
    ) -> None:
        path = self.out / STATISTICS
        previous = read_json(path).get("applicability", {}) if path.is_file() else {}
        coverage = {"PR-SZZ": fixing_coverage(fixes)}
        if (self.out / FIXES_BSZZ).is_file():
            coverage["B-SZZ"] = fixing_coverage(self._load_fixes(FIXES_BSZZ))
        strategies: Dict[str, int] = {}
        for pr_map in analysis.inner_maps.values():
            strategies[pr_map.strategy.value] = strategies.get(pr_map.strategy.value, 0) + 1
        write_canonical(
            path,
            {
                "bugs": len(analysis.bugs),
                "bug_tickets": sum(len(bug.aliases) for bug in analysis.bugs),
                "fixing_coverage": coverage,
                "merge_strategies": strategies,
                "applicability": {**previous, **counters},
            },
        )

    def evaluate(self, truth_path: Optional[Path] = None) -> Dict[str, Any]:
        """Precision, recall and F-score of fixing and inducing predictions."""
        path = truth_path or self.config.truth_path
        if path is None:
            raise MissingTruth("<truth>", "No ground truth file given (truth_path or --truth)")
        truth = load_truth(Path(path))

        fixing = {"PR-SZZ": eval_fixing(self._load_fixes(FIXES), truth)}
        if (self.out / FIXES_BSZZ).is_file():
            fixing["B-SZZ"] = eval_fixing(self._load_fixes(FIXES_BSZZ), truth)

        traced = [
            name for name in self.config.variants if (self.out / TRACES / f"{name}.json").is_file()
        ]
        if not traced:
            raise MissingStageOutput(self.out / TRACES, "trace")
        inducing = {}
        for name in traced:
            variant = get_variant(name)
            inducing[name] = eval_inducing(
                self._load_traces(name),
                truth,
                use_selected=variant.selection is not None,
                skip_unknown=True,
            )
        write_canonical(self.out / METRICS, metrics_payload(inducing))
        write_canonical(self.out / FIXING_METRICS, metrics_payload(fixing))
        self._write_manifest()
        for name, metrics in sorted(inducing.items()):
            logger.info(
                f"{name}: precision {metrics.precision:.3f}, recall {metrics.recall:.3f}, "
                f"F {metrics.f_score:.3f}"
            )
        return {
            "stage": "evaluate",
            "inducing": metrics_payload(inducing),
            "fixing": metrics_payload(fixing),
        }

    def run(self, variants: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """All stages; ingest only with a data source, evaluate only with ground truth."""
        stages: Dict[str, Any] = {}
        if self.config.live or self.config.replay_dir is not None:
            stages["ingest"] = self.ingest()
        stages["match"] = self.match()
        stages["trace"] = self.trace(variants)
        if self.config.truth_path is not None:
            stages["evaluate"] = self.evaluate()
        return stages
