import logging

import numpy as np

from qppm.dataclasses.matrices import EffectivenessMatrix, PredictionMatrix
from qppm.dataclasses.results import RoutingResult
from qppm.exceptions import ValidationError

logger = logging.getLogger(__name__)


def route_queries(mu: EffectivenessMatrix, phi: PredictionMatrix) -> RoutingResult:
    """Send every query to the ranker with the highest predicted performance.

    Ties go to the first ranker in axis order. The routed mean μ is reported next to the mean μ of the best single
    ranker and of the per-query oracle.

    Raises:
        ValidationError: The matrices do not share axes.
    """

    if not mu.same_axes(phi):
        raise ValidationError("Effectiveness and prediction matrices must share query and ranker axes")

    rows = np.arange(len(mu.queries))
    selected = np.argmax(phi.values, axis=1)
    column_means = mu.values.mean(axis=0)
    best_fixed = int(np.argmax(column_means))

    result = RoutingResult(
        predictor_id=phi.name,
        metric=mu.metric.label,
        choices={query_id: mu.rankers[j] for query_id, j in zip(mu.queries, selected)},
        routed_mean=float(mu.values[rows, selected].mean()),
        best_fixed_ranker=mu.rankers[best_fixed],
        best_fixed_mean=float(column_means[best_fixed]),
        oracle_mean=float(mu.values.max(axis=1).mean()),
    )
    logger.debug(
        f"Routing by {phi.name}: {result.routed_mean:.4f} vs fixed {result.best_fixed_mean:.4f} "
        f"vs oracle {result.oracle_mean:.4f}"
    )
    return result
