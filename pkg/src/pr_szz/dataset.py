"""
Defect datasets and evaluation against ground truth.

Datasets are CSV files at commit, file or method level. Ground truth is canonical JSON
with a ``fixing`` map (bug label -> commit or null) and an ``inducing`` map (fixing
commit -> inducing commits). Metrics are micro-averaged counts; a macro average over
projects is available as well.
"""

import csv
import json
import logging
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

from .errors import DatasetIoError, EvaluationError, MissingTruth
from .fixes import FixRecord
from .snapshot import canonical_json, write_canonical
from .tracer import Level, TraceResult

logger = logging.getLogger(__name__)

DATASET_HEADER = [
    "level",
    "bug_system",
    "bug_key",
    "variant",
    "fixing_commit",
    "inducing_commit",
    "path",
    "method_header",
    "secured",
]


@dataclass(frozen=True)
class DatasetRow:
    level: str
    bug_system: str
    bug_key: str
    variant: str
    fixing_commit: str
    inducing_commit: str
    path: str
    method_header: str
    secured: str

    def sort_key(self):
        return (self.bug_system, self.bug_key, self.inducing_commit, self.path, self.method_header)


def dataset_rows(results: Iterable[TraceResult], level: Level) -> List[DatasetRow]:
    rows = set()
    for result in results:
        secured = {s.commit: s.secured for s in result.suspects}
        for entry in result.fine_grained:
            if entry.level != level:
                continue
            rows.add(
                DatasetRow(
                    level=level.value,
                    bug_system=result.bug.system.value,
                    bug_key=result.bug.key,
                    variant=result.variant,
                    fixing_commit=result.fix,
                    inducing_commit=entry.inducing_commit,
                    path=entry.path or "",
                    method_header=entry.method_header or "",
                    secured=str(secured.get(entry.inducing_commit, False)).lower(),
                )
            )
    return sorted(rows, key=lambda row: (row.sort_key(), astuple(row)))


def write_dataset(results: Sequence[TraceResult], level: Level, out: Path) -> int:
    """Write one dataset level; returns the number of rows."""
    rows = dataset_rows(results, level)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(DATASET_HEADER)
            for row in rows:
                writer.writerow(astuple(row))
    except (OSError, UnicodeError) as e:
        raise DatasetIoError(f"Cannot write dataset {out}: {e}", path=out) from e
    logger.debug(f"Wrote {len(rows)} {level.value.lower()}-level rows to {out}")
    return len(rows)


class GroundTruth(BaseModel):
    fixing: Dict[str, Optional[str]] = Field(default_factory=dict)
    inducing: Dict[str, List[str]] = Field(default_factory=dict)

    def fixing_for(self, record: FixRecord) -> Optional[str]:
        """Truth for a bug under its canonical label or any alias label."""
        for ref in [record.bug, *record.aliases]:
            if ref.label in self.fixing:
                return self.fixing[ref.label]
        raise MissingTruth(record.bug.label)

    def inducing_for(self, fix: str) -> List[str]:
        if fix not in self.inducing:
            raise MissingTruth(fix)
        return self.inducing[fix]

    def save(self, path: Path) -> None:
        write_canonical(path, self.model_dump(mode="json"))


def load_truth(path: Path) -> GroundTruth:
    path = Path(path)
    if not path.is_file():
        raise MissingTruth(str(path), f"Ground truth file not found: {path}")
    try:
        return GroundTruth.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (ValueError, ValidationError) as e:
        raise EvaluationError(f"Invalid ground truth file {path}: {e}", path=path) from e


class Metrics(BaseModel):
    precision: float = 0.0
    recall: float = 0.0
    f_score: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    # fixes without ground truth, left out of the counts
    skipped: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, skipped: int = 0) -> "Metrics":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f_score = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(
            precision=precision, recall=recall, f_score=f_score, tp=tp, fp=fp, fn=fn, skipped=skipped
        )

    def rounded(self, digits: int = 6) -> Dict[str, float]:
        data = self.model_dump()
        for key in ("precision", "recall", "f_score"):
            data[key] = round(data[key], digits)
        return data


def eval_fixing(predictions: Sequence[FixRecord], truth: GroundTruth) -> Metrics:
    """A wrong prediction counts as a false positive and, when a fix exists, a false negative."""
    tp = fp = fn = 0
    for record in predictions:
        expected = truth.fixing_for(record)
        predicted = record.fixing_commit
        if predicted is not None:
            if predicted == expected:
                tp += 1
            else:
                fp += 1
                if expected is not None:
                    fn += 1
        elif expected is not None:
            fn += 1
    return Metrics.from_counts(tp, fp, fn)


def predicted_inducing(result: TraceResult, use_selected: bool) -> set:
    if use_selected:
        return {result.selected} if result.selected else set()
    return set(result.live_commits())


def eval_inducing(
    results: Sequence[TraceResult],
    truth: GroundTruth,
    use_selected: bool,
    skip_unknown: bool = False,
) -> Metrics:
    """Set-based micro average over fixes.

    With ``skip_unknown`` fixes absent from the truth are left out instead of failing.
    """
    tp = fp = fn = 0
    skipped = 0
    for result in results:
        if skip_unknown and result.fix not in truth.inducing:
            skipped += 1
            continue
        expected = set(truth.inducing_for(result.fix))
        predicted = predicted_inducing(result, use_selected)
        tp += len(predicted & expected)
        fp += len(predicted - expected)
        fn += len(expected - predicted)
    if skipped:
        logger.info(f"Left out {skipped} fixes without inducing ground truth")
    return Metrics.from_counts(tp, fp, fn, skipped)


def macro_average(metrics: Sequence[Metrics]) -> Metrics:
    """Mean of per-project precision, recall and F-score; counts are summed."""
    if not metrics:
        return Metrics()
    count = len(metrics)
    return Metrics(
        precision=sum(m.precision for m in metrics) / count,
        recall=sum(m.recall for m in metrics) / count,
        f_score=sum(m.f_score for m in metrics) / count,
        tp=sum(m.tp for m in metrics),
        fp=sum(m.fp for m in metrics),
        fn=sum(m.fn for m in metrics),
        skipped=sum(m.skipped for m in metrics),
    )


def metrics_payload(metrics: Dict[str, Metrics]) -> Dict[str, Dict[str, float]]:
    return {name: m.rounded() for name, m in sorted(metrics.items())}


def metrics_report(metrics: Dict[str, Metrics]) -> str:
    """Canonical JSON {variant -> metrics}."""
    return canonical_json(metrics_payload(metrics))
