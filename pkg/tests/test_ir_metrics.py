import csv
import math
import os

import numpy as np
import pytest

from qppm.dataclasses.run_data import JudgmentSet, RankedList
from qppm.dataclasses.specs import MetricKind, MetricSpec
from qppm.exceptions import ConfigurationError
from qppm.ir_metrics import (
    average_precision_at_k,
    effectiveness_matrix,
    metric_value,
    ndcg_at_k,
    parse_metric_spec,
)
from qppm.trec_io import assemble_run_matrix, parse_qrels, parse_run_file
from tests.fixtures import AP50, DATA_DIR, NDCG10, ranked_list


def _list(doc_ids, query_id="q1", ranker_id="r1") -> RankedList:
    rows = [(doc_id, float(len(doc_ids) - i), "t") for i, doc_id in enumerate(doc_ids)]
    return RankedList.from_scored(query_id, ranker_id, rows)


def test_parse_metric_spec() -> None:
    assert parse_metric_spec("ap@50") == MetricSpec(MetricKind.AP, 50)
    assert parse_metric_spec("NDCG@10") == MetricSpec(MetricKind.NDCG, 10)
    assert parse_metric_spec("ap@50:rel=1") == MetricSpec(MetricKind.AP, 50, rel_threshold=1)
    assert parse_metric_spec("ap@50:rel=1").label == "ap@50:rel=1"
    assert parse_metric_spec("ap@50:rel=2").label == "ap@50"
    assert NDCG10.label == "ndcg@10"


@pytest.mark.parametrize("text", ["ap", "p@10", "ap@0", "ndcg@10:rel=1", "ap@-5", "ap@50:rel=0"])
def test_parse_metric_spec_errors(text: str) -> None:
    with pytest.raises(ConfigurationError):
        parse_metric_spec(text)


def test_average_precision() -> None:
    judgments = JudgmentSet({("q1", "d1"): 2, ("q1", "d2"): 0, ("q1", "d3"): 2})
    assert average_precision_at_k(_list(["d1", "d2", "d3"]), judgments, 50) == pytest.approx(0.833333, abs=1e-6)
    assert average_precision_at_k(_list(["d2", "d4"]), judgments, 50) == 0.0
    assert average_precision_at_k(_list(["d3", "d1", "d2"]), judgments, 50) == 1.0


def test_average_precision_cutoff_and_threshold() -> None:
    judgments = JudgmentSet({("q1", "d1"): 1, ("q1", "d3"): 3})
    ranked = _list(["d1", "d2", "d3"])
    # d1 is not relevant at the default threshold 2
    assert average_precision_at_k(ranked, judgments, 50) == pytest.approx(1 / 3)
    assert average_precision_at_k(ranked, judgments, 50, rel_threshold=1) == pytest.approx((1 + 2 / 3) / 2)
    assert average_precision_at_k(ranked, judgments, 2, rel_threshold=1) == pytest.approx(0.5)
    assert average_precision_at_k(ranked, JudgmentSet({}), 50) == 0.0
    with pytest.raises(ValueError):
        average_precision_at_k(ranked, judgments, 0)


def test_ndcg() -> None:
    judgments = JudgmentSet({("q1", "d1"): 3, ("q1", "d2"): 1})
    assert ndcg_at_k(_list(["d2", "d1"]), judgments, 10) == pytest.approx(0.796706, abs=1e-6)
    assert ndcg_at_k(_list(["d1", "d2"]), judgments, 10) == 1.0
    assert ndcg_at_k(_list(["d5"]), JudgmentSet({("q1", "d5"): 1}), 10) == 1.0
    assert ndcg_at_k(_list(["d1"]), JudgmentSet({}), 10) == 0.0


def test_ndcg_ideal_uses_unretrieved_judgments() -> None:
    judgments = JudgmentSet({("q1", "d1"): 1, ("q1", "d9"): 2})
    expected = 1.0 / (2.0 + 1.0 / math.log2(3))
    assert ndcg_at_k(_list(["d1", "d2"]), judgments, 10) == pytest.approx(expected)


def test_metric_value_dispatch() -> None:
    judgments = JudgmentSet({("q1", "d2"): 2})
    ranked = _list(["d1", "d2"])
    assert metric_value(ranked, judgments, AP50) == pytest.approx(0.5)
    assert metric_value(ranked, judgments, NDCG10) == pytest.approx(1.0 / math.log2(3))


def test_effectiveness_matrix() -> None:
    judgments = JudgmentSet({("q1", "d1"): 2, ("q1", "d3"): 2, ("q2", "d1"): 3, ("q2", "d2"): 1})
    per_ranker = {
        "r1": {"q1": _list(["d1", "d2", "d3"], "q1", "r1"), "q2": _list(["d1", "d2"], "q2", "r1")},
        "r2": {"q1": _list(["d2", "d4"], "q1", "r2"), "q2": _list(["d2", "d1"], "q2", "r2")},
    }
    run_matrix = assemble_run_matrix(per_ranker)

    ap = effectiveness_matrix(run_matrix, judgments, AP50)
    assert ap.value("q1", "r1") == pytest.approx(0.833333, abs=1e-6)
    assert ap.value("q1", "r2") == 0.0
    assert ap.zero_relevant == ()

    ndcg = effectiveness_matrix(run_matrix, judgments, NDCG10, workers=3)
    assert ndcg.value("q2", "r2") == pytest.approx(0.796706, abs=1e-6)
    assert ndcg.value("q2", "r1") == 1.0
    assert ndcg.metric is NDCG10


def test_effectiveness_matrix_zero_relevant(caplog) -> None:
    judgments = JudgmentSet({("q1", "d1"): 1})
    run_matrix = assemble_run_matrix({"r1": {"q1": ranked_list([2.0, 1.0], "q1", "r1")}})
    ap = effectiveness_matrix(run_matrix, judgments, AP50)
    assert ap.zero_relevant == ("q1",)
    np.testing.assert_array_equal(ap.values, [[0.0]])
    assert "no relevant document" in caplog.text
    assert effectiveness_matrix(run_matrix, judgments, NDCG10).zero_relevant == ()


def test_cutoff_beyond_list_length() -> None:
    judgments = JudgmentSet({("q1", "d0"): 2})
    run_matrix = assemble_run_matrix({"r1": {"q1": ranked_list([1.0], "q1", "r1")}})
    deep = effectiveness_matrix(run_matrix, judgments, MetricSpec(MetricKind.AP, 1000))
    np.testing.assert_array_equal(deep.values, [[1.0]])


def test_matches_trec_eval_reference() -> None:
    """map_cut_50 and ndcg_cut_10 of trec_eval on 5 graded queries and 3 runs."""

    directory = os.path.join(DATA_DIR, "trec_eval")
    judgments = parse_qrels(os.path.join(directory, "qrels.txt"))
    names = ("runA", "runB", "runC")
    per_ranker = {name: parse_run_file(os.path.join(directory, f"{name}.run"), name) for name in names}
    run_matrix = assemble_run_matrix(per_ranker)
    ap = effectiveness_matrix(run_matrix, judgments, parse_metric_spec("ap@50:rel=1"))
    ndcg = effectiveness_matrix(run_matrix, judgments, NDCG10)

    with open(os.path.join(directory, "expected.tsv"), "r", encoding="utf-8") as f:
        rows = list(csv.DictReader(f, delimiter="\t"))
    assert len(rows) == 15
    for row in rows:
        assert ap.value(row["qid"], row["run"]) == pytest.approx(float(row["map_cut_50"]), abs=1e-4)
        assert ndcg.value(row["qid"], row["run"]) == pytest.approx(float(row["ndcg_cut_10"]), abs=1e-4)
    # a relevant document at rank 11 counts for AP@50 only
    assert ap.value("q3", "runC") > 0.0
    assert ndcg.value("q3", "runC") == 0.0


def test_moving_a_relevant_document_up_never_hurts() -> None:
    rng = np.random.default_rng(5)
    for _ in range(200):
        doc_ids = [f"d{i}" for i in range(12)]
        judgments = JudgmentSet({("q1", d): int(g) for d, g in zip(doc_ids, rng.integers(0, 4, size=12)) if g > 0})
        order = [str(doc_id) for doc_id in rng.permutation(doc_ids)]
        grades = [judgments.grade("q1", doc_id) for doc_id in order]
        better = [i for i in range(1, len(order)) if grades[i] > grades[i - 1]]
        if not better:
            continue
        i = int(rng.choice(better))
        swapped = order[: i - 1] + [order[i], order[i - 1]] + order[i + 1 :]
        before, after = _list(order), _list(swapped)
        for k in (5, 10, 50):
            assert ndcg_at_k(after, judgments, k) >= ndcg_at_k(before, judgments, k) - 1e-12
            ap_before = average_precision_at_k(before, judgments, k, rel_threshold=1)
            assert average_precision_at_k(after, judgments, k, rel_threshold=1) >= ap_before - 1e-12


def test_metrics_ignore_order_preserving_score_transforms() -> None:
    rng = np.random.default_rng(8)
    judgments = JudgmentSet({("q1", f"d{i}"): int(g) for i, g in enumerate(rng.integers(0, 3, size=30))})
    for _ in range(20):
        scores = rng.normal(size=30)
        scale, shift = float(rng.uniform(0.1, 10.0)), float(rng.normal(0.0, 50.0))
        original = RankedList.from_scored("q1", "r1", [(f"d{i}", float(s), "t") for i, s in enumerate(scores)])
        moved = RankedList.from_scored("q1", "r1", [(f"d{i}", scale * s + shift, "t") for i, s in enumerate(scores)])
        assert moved.doc_ids() == original.doc_ids()
        for metric in (AP50, NDCG10, MetricSpec(MetricKind.AP, 10, rel_threshold=1)):
            assert metric_value(moved, judgments, metric) == metric_value(original, judgments, metric)
