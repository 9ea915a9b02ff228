"""Target IR effectiveness measures (AP@k, nDCG@k) with trec_eval map_cut / ndcg_cut conventions."""

import logging
import re
from typing import Optional

import numpy as np

from qppm.cell_workers import CellWorkerPool
from qppm.dataclasses.matrices import EffectivenessMatrix
from qppm.dataclasses.run_data import JudgmentSet, RankedList, RunMatrix
from qppm.dataclasses.specs import MetricKind, MetricSpec
from qppm.defaults import DEFAULT_REL_THRESHOLD
from qppm.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

_METRIC_SPEC_RE = re.compile(r"^(?P<kind>[a-z]+)@(?P<cutoff>\d+)(?::rel=(?P<rel>\d+))?$")


def parse_metric_spec(text: str) -> MetricSpec:
    """Parse a metric spec string such as "ap@50", "ndcg@10" or "ap@50:rel=1".

    Raises:
        ConfigurationError: Unknown metric, malformed string or ":rel=" used with nDCG.
    """

    match = _METRIC_SPEC_RE.match(text.strip().lower())
    if match is None:
        raise ConfigurationError(f"Malformed metric spec '{text}', expected e.g. 'ap@50' or 'ndcg@10:rel=2'")
    try:
        kind = MetricKind(match.group("kind"))
    except ValueError:
        raise ConfigurationError(f"Unknown metric '{match.group('kind')}' in '{text}'") from None
    rel: Optional[str] = match.group("rel")
    if rel is not None and kind is not MetricKind.AP:
        raise ConfigurationError(f"':rel=' applies to AP only, got '{text}'")
    return MetricSpec(kind, int(match.group("cutoff")), int(rel) if rel is not None else DEFAULT_REL_THRESHOLD)


def average_precision_at_k(
    ranked: RankedList, judgments: JudgmentSet, k: int, rel_threshold: int = DEFAULT_REL_THRESHOLD
) -> float:
    """AP@k, the sum of P@i over relevant documents at ranks i <= k divided by all R relevant documents.

    Args:
        ranked (RankedList): Ranked list of one (query, ranker) cell.
        judgments (JudgmentSet): Relevance judgments.
        k (int): Rank cutoff.
        rel_threshold (int): Minimal grade of a relevant document.

    Returns:
        AP@k in [0, 1], 0 when the query has no relevant document.
    """

    if k < 1:
        raise ValueError(f"Cutoff must be >= 1, got {k}")
    relevant = {doc_id for doc_id, grade in judgments.for_query(ranked.query_id).items() if grade >= rel_threshold}
    if not relevant:
        return 0.0

    hits = 0
    precision_sum = 0.0
    for rank, doc_id in enumerate(ranked.doc_ids(k), start=1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / len(relevant)


def _dcg(gains: np.ndarray) -> float:
    return float(np.sum(gains / np.log2(np.arange(2, gains.size + 2))))


def ndcg_at_k(ranked: RankedList, judgments: JudgmentSet, k: int) -> float:
    """nDCG@k with linear gain (the grade) and log2(i + 1) discount.

    The ideal DCG ranks all judged documents of the query by descending grade.

    Returns:
        nDCG@k in [0, 1], 0 when the ideal DCG is 0.
    """

    if k < 1:
        raise ValueError(f"Cutoff must be >= 1, got {k}")
    judged = judgments.for_query(ranked.query_id)
    ideal = np.array(sorted(judged.values(), reverse=True)[:k], dtype=np.float64)
    idcg = _dcg(ideal)
    if idcg == 0.0:
        return 0.0
    gains = np.array([judged.get(doc_id, 0) for doc_id in ranked.doc_ids(k)], dtype=np.float64)
    return min(1.0, _dcg(gains) / idcg)


def metric_value(ranked: RankedList, judgments: JudgmentSet, metric: MetricSpec) -> float:
    """μ of one ranked list."""

    if metric.kind is MetricKind.AP:
        return average_precision_at_k(ranked, judgments, metric.cutoff, metric.rel_threshold)
    return ndcg_at_k(ranked, judgments, metric.cutoff)


def _is_zero_relevant(query_id: str, judgments: JudgmentSet, metric: MetricSpec) -> bool:
    grades = judgments.for_query(query_id).values()
    if metric.kind is MetricKind.AP:
        return not any(grade >= metric.rel_threshold for grade in grades)
    return not any(grade > 0 for grade in grades)


def effectiveness_matrix(
    run_matrix: RunMatrix, judgments: JudgmentSet, metric: MetricSpec, workers: int = 1
) -> EffectivenessMatrix:
    """Evaluate the metric on every cell of the run matrix.

    Args:
        run_matrix (RunMatrix): Validated run matrix.
        judgments (JudgmentSet): Relevance judgments.
        metric (MetricSpec): Target metric.
        workers (int): Number of worker threads. Default is 1.

    Returns:
        Effectiveness matrix on the run matrix axes, queries without relevant documents are listed in
        zero_relevant.
    """

    zero_relevant = tuple(q for q in run_matrix.queries if _is_zero_relevant(q, judgments, metric))
    for query_id in zero_relevant:
        logger.warning(f"Query '{query_id}' has no relevant document for {metric.label}, its cells score 0")

    def evaluate_cell(i: int, j: int) -> float:
        return metric_value(run_matrix.cell(run_matrix.queries[i], run_matrix.rankers[j]), judgments, metric)

    values = CellWorkerPool(workers).map_cells(run_matrix.shape, evaluate_cell)
    logger.info(f"Computed {metric.label} for {values.size} cells ({len(zero_relevant)} zero-relevant queries)")
    return EffectivenessMatrix(run_matrix.queries, run_matrix.rankers, values, metric, zero_relevant)
