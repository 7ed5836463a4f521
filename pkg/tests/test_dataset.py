import csv
import json

import pytest

from pr_szz.dataset import (
    DATASET_HEADER,
    GroundTruth,
    Metrics,
    eval_fixing,
    eval_inducing,
    load_truth,
    macro_average,
    metrics_report,
    write_dataset,
)
from pr_szz.errors import DatasetIoError, EvaluationError, MissingTruth
from pr_szz.fixes import FixRecord, FixVia
from pr_szz.forge_models import IssueRef
from pr_szz.tracer import FineGrainedEntry, Level, RejectionReason, Suspect, TraceResult

A, B, C = ("a" * 40, "b" * 40, "c" * 40)
FIX1, FIX2, FIX3 = ("1" * 40, "2" * 40, "3" * 40)


def _result(fix=FIX1, selected=None):
    method = FineGrainedEntry(
        level=Level.METHOD,
        inducing_commit=A,
        path="src/X.java",
        method_header="void f()",
        method_span=(1, 3),
    )
    return TraceResult(
        bug=IssueRef.jira("K-1"),
        fix=fix,
        variant="PR",
        suspects=[
            Suspect(commit=A, commit_time=1, secured=True),
            Suspect(commit=B, commit_time=2, rejected_reason=RejectionReason.AFTER_BUG_REPORT),
        ],
        selected=selected,
        fine_grained=[
            FineGrainedEntry(level=Level.COMMIT, inducing_commit=A),
            FineGrainedEntry(level=Level.FILE, inducing_commit=A, path="src/X.java"),
            method,
            method.model_copy(),
        ],
    )


def _rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def test_dataset_levels(tmp_path):
    results = [_result()]
    assert write_dataset(results, Level.COMMIT, tmp_path / "commit.csv") == 1
    assert _rows(tmp_path / "commit.csv") == [
        DATASET_HEADER,
        ["Commit", "JiraIssue", "K-1", "PR", FIX1, A, "", "", "true"],
    ]
    # duplicate entries collapse into one row
    assert write_dataset(results, Level.METHOD, tmp_path / "method.csv") == 1
    assert _rows(tmp_path / "method.csv")[1][6:8] == ["src/X.java", "void f()"]


def test_empty_dataset_has_only_the_header(tmp_path):
    out = tmp_path / "nested" / "file.csv"
    assert write_dataset([], Level.FILE, out) == 0
    assert out.read_text(encoding="utf-8") == ",".join(DATASET_HEADER) + "\n"


def test_unencodable_text_is_a_dataset_error(tmp_path):
    result = _result()
    broken = {"method_header": "void caf\udce9()"}
    result.fine_grained[2] = result.fine_grained[2].model_copy(update=broken)
    with pytest.raises(DatasetIoError) as caught:
        write_dataset([result], Level.METHOD, tmp_path / "method.csv")
    assert caught.value.exit_code == 1


def test_metrics_arithmetic():
    metrics = Metrics.from_counts(1, 1, 2)
    assert metrics.precision == 0.5
    assert metrics.recall == pytest.approx(1 / 3)
    assert metrics.f_score == pytest.approx(0.4)
    assert Metrics.from_counts(0, 0, 0).f_score == 0.0


def _record(key, commit):
    via = FixVia.MESSAGE_MATCH if commit else FixVia.NONE
    return FixRecord(bug=IssueRef.jira(key), aliases=[IssueRef.jira(key)], fixing_commit=commit, via=via)


def test_fixing_evaluation_counts_wrong_predictions_twice():
    truth = GroundTruth(fixing={"JiraIssue:K-1": FIX1, "JiraIssue:K-2": FIX2, "JiraIssue:K-3": FIX3, "JiraIssue:K-4": None})
    predictions = [_record("K-1", FIX1), _record("K-2", A), _record("K-3", None), _record("K-4", None)]
    metrics = eval_fixing(predictions, truth)
    assert (metrics.tp, metrics.fp, metrics.fn) == (1, 1, 2)
    assert metrics.precision == 0.5


def test_fixing_truth_is_looked_up_by_alias():
    record = FixRecord(bug=IssueRef.jira("K-9"), aliases=[IssueRef.github(7), IssueRef.jira("K-9")])
    assert GroundTruth(fixing={"GithubIssue:7": None}).fixing_for(record) is None
    with pytest.raises(MissingTruth):
        eval_fixing([record], GroundTruth())


def test_inducing_evaluation():
    truth = GroundTruth(inducing={FIX1: [A, C]})
    live = eval_inducing([_result()], truth, use_selected=False)
    assert (live.tp, live.fp, live.fn) == (1, 0, 1)
    assert (live.precision, live.recall) == (1.0, 0.5)

    unselected = eval_inducing([_result()], truth, use_selected=True)
    assert (unselected.tp, unselected.fp, unselected.fn) == (0, 0, 2)
    selected = eval_inducing([_result(selected=A)], truth, use_selected=True)
    assert selected.tp == 1


def test_inducing_evaluation_of_fixes_without_truth():
    truth = GroundTruth(inducing={FIX1: [A]})
    results = [_result(), _result(fix=FIX2)]
    with pytest.raises(MissingTruth):
        eval_inducing(results, truth, use_selected=False)
    metrics = eval_inducing(results, truth, use_selected=False, skip_unknown=True)
    assert (metrics.tp, metrics.fp, metrics.fn) == (1, 0, 0)
    assert metrics.skipped == 1
    assert metrics.rounded()["skipped"] == 1


def test_macro_average():
    average = macro_average([Metrics.from_counts(1, 0, 0), Metrics.from_counts(0, 1, 1)])
    assert (average.precision, average.recall, average.f_score) == (0.5, 0.5, 0.5)
    assert (average.tp, average.fp, average.fn) == (1, 1, 1)
    assert macro_average([Metrics(skipped=2), Metrics(skipped=1)]).skipped == 3
    assert macro_average([]) == Metrics()


def test_metrics_report_is_rounded_canonical_json():
    report = metrics_report({"R": Metrics.from_counts(1, 0, 2), "B": Metrics.from_counts(1, 1, 0)})
    data = json.loads(report)
    assert list(data) == ["B", "R"]
    assert data["R"]["recall"] == 0.333333
    assert report.endswith("}\n")


def test_truth_files(tmp_path):
    with pytest.raises(MissingTruth) as caught:
        load_truth(tmp_path / "truth.json")
    assert caught.value.exit_code == 2

    truth = GroundTruth(fixing={"JiraIssue:K-1": FIX1}, inducing={FIX1: [A]})
    truth.save(tmp_path / "truth.json")
    assert load_truth(tmp_path / "truth.json") == truth

    (tmp_path / "bad.json").write_text('{"fixing": [1]}', encoding="utf-8")
    with pytest.raises(EvaluationError):
        load_truth(tmp_path / "bad.json")
