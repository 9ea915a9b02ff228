"""Evaluation of a predictor across queries (per ranker), across rankers (per query) and over all cells at once."""

import logging
from itertools import combinations
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from qppm.cell_workers import CellWorkerPool
from qppm.dataclasses.matrices import AxisMatrix, EffectivenessMatrix, PredictionMatrix
from qppm.dataclasses.results import EvalResult, EvaluationSummary, Exclusion, Measure, TauResult, UnitSummary
from qppm.exceptions import UndefinedCorrelation, ValidationError
from qppm.rank_correlation import TauVariant, kendall_tau

logger = logging.getLogger(__name__)

ALL_DEGENERATE = "all-degenerate"

# Measures compared when marking the measure a predictor does best on.
BASE_MEASURES = (Measure.SRMQ, Measure.MRSQ, Measure.MRMQ)


def _check_axes(mu: AxisMatrix, phi: AxisMatrix) -> None:
    if not mu.same_axes(phi):
        raise ValidationError("Effectiveness and prediction matrices must share query and ranker axes")


def srmq_per_ranker(
    mu: EffectivenessMatrix, phi: PredictionMatrix, ranker_id: str, variant: TauVariant = TauVariant.B
) -> TauResult:
    """τ between μ and φ of one ranker across all queries.

    Raises:
        UndefinedCorrelation: Fewer than 2 queries.
    """

    _check_axes(mu, phi)
    return kendall_tau(mu.column(ranker_id), phi.column(ranker_id), variant)


def srmq_taus(
    mu: EffectivenessMatrix, phi: PredictionMatrix, variant: TauVariant = TauVariant.B
) -> Dict[str, TauResult]:
    return {ranker_id: srmq_per_ranker(mu, phi, ranker_id, variant) for ranker_id in mu.rankers}


def mrsq_per_query(
    mu: EffectivenessMatrix, phi: PredictionMatrix, query_id: str, variant: TauVariant = TauVariant.B
) -> TauResult:
    """τ between μ and φ of one query across all rankers.

    Raises:
        UndefinedCorrelation: Fewer than 2 rankers.
    """

    _check_axes(mu, phi)
    return kendall_tau(mu.row(query_id), phi.row(query_id), variant)


def mrsq_taus(
    mu: EffectivenessMatrix, phi: PredictionMatrix, variant: TauVariant = TauVariant.B
) -> Dict[str, TauResult]:
    return {query_id: mrsq_per_query(mu, phi, query_id, variant) for query_id in mu.queries}


def average_taus(taus: Mapping[str, TauResult], measure: Measure) -> Tuple[TauResult, List[Exclusion]]:
    """Arithmetic mean of the defined per-unit τ values, in unit order.

    Returns:
        The mean (undefined with reason "all-degenerate" when no unit is defined) and one exclusion per undefined
        unit.
    """

    exclusions = [Exclusion(measure, unit, tau.reason) for unit, tau in taus.items() if tau.reason is not None]
    defined = [tau.value for tau in taus.values() if tau.defined]
    if not defined:
        return TauResult.undefined(ALL_DEGENERATE), exclusions
    return TauResult(float(np.mean(defined))), exclusions


def _mean_or_raise(taus: Mapping[str, TauResult], measure: Measure) -> float:
    mean, exclusions = average_taus(taus, measure)
    for exclusion in exclusions:
        logger.info(f"{measure.value}: unit '{exclusion.unit}' excluded ({exclusion.reason})")
    if not mean.defined:
        raise UndefinedCorrelation(ALL_DEGENERATE, f"{measure.value}: every unit is degenerate")
    return mean.value


def srmq_mean(mu: EffectivenessMatrix, phi: PredictionMatrix, variant: TauVariant = TauVariant.B) -> float:
    """Mean per-ranker τ over the rankers with a defined τ.

    Raises:
        UndefinedCorrelation: All rankers are degenerate.
    """

    return _mean_or_raise(srmq_taus(mu, phi, variant), Measure.SRMQ)


def mrsq_mean(mu: EffectivenessMatrix, phi: PredictionMatrix, variant: TauVariant = TauVariant.B) -> float:
    """Mean per-query τ over the queries with a defined τ.

    Raises:
        UndefinedCorrelation: All queries are degenerate.
    """

    return _mean_or_raise(mrsq_taus(mu, phi, variant), Measure.MRSQ)


def _mrmq(mu: EffectivenessMatrix, phi: PredictionMatrix, variant: TauVariant) -> TauResult:
    _check_axes(mu, phi)
    return kendall_tau(mu.values.ravel(), phi.values.ravel(), variant)


def mrmq_global(mu: EffectivenessMatrix, phi: PredictionMatrix, variant: TauVariant = TauVariant.B) -> float:
    """τ over all n·m (query, ranker) cells.

    Raises:
        UndefinedCorrelation: Fewer than 2 cells or a degenerate side.
    """

    result = _mrmq(mu, phi, variant)
    if not result.defined:
        assert result.reason is not None
        raise UndefinedCorrelation(result.reason, f"mrmq: correlation over all cells is undefined ({result.reason})")
    return result.value


def f1_combination(p_srmq: float, p_mrsq: float) -> float:
    """Harmonic mean 2ab / (a + b) of the two averaged measures, negatives clamped to 0."""

    a, b = max(p_srmq, 0.0), max(p_mrsq, 0.0)
    if a + b == 0.0:
        return 0.0
    return 2.0 * a * b / (a + b)


def _f1_result(srmq: TauResult, mrsq: TauResult) -> TauResult:
    if not srmq.defined:
        return TauResult.undefined(srmq.reason or ALL_DEGENERATE)
    if not mrsq.defined:
        return TauResult.undefined(mrsq.reason or ALL_DEGENERATE)
    return TauResult(f1_combination(srmq.value, mrsq.value))


def cross_measure_correlation(measure_a: Mapping[str, float], measure_b: Mapping[str, float]) -> TauResult:
    """τ-b between two per-predictor measure vectors.

    Predictors with an undefined (NaN) value in either vector are left out.

    Raises:
        ValidationError: Different predictor sets.
        UndefinedCorrelation: Fewer than 2 predictors.
    """

    if set(measure_a) != set(measure_b):
        raise ValidationError("Measure vectors must cover the same predictors")
    keys = [key for key in measure_a if not (np.isnan(measure_a[key]) or np.isnan(measure_b[key]))]
    return kendall_tau([measure_a[key] for key in keys], [measure_b[key] for key in keys])


def discriminativeness(values: Mapping[str, float]) -> float:
    """Sample standard deviation of a measure across predictors.

    Raises:
        ValidationError: Fewer than 2 values.
    """

    if len(values) < 2:
        raise ValidationError(f"Discriminativeness needs at least 2 predictors, got {len(values)}")
    return float(np.std(list(values.values()), ddof=1))


def unit_summary(taus: Mapping[str, TauResult]) -> Optional[UnitSummary]:
    """Quartiles of the defined per-unit τ values, None when no unit is defined."""

    defined = np.array([tau.value for tau in taus.values() if tau.defined])
    if defined.size == 0:
        return None
    q1, median, q3 = np.percentile(defined, [25, 50, 75])
    return UnitSummary(
        int(defined.size), float(defined.min()), float(q1), float(median), float(q3), float(defined.max())
    )


def _safe(compute: Callable[[], TauResult]) -> TauResult:
    try:
        return compute()
    except UndefinedCorrelation as e:
        return TauResult.undefined(e.reason)


def _unit_taus(compute: Callable[[str], TauResult], units: Sequence[str]) -> Dict[str, TauResult]:
    return {unit: _safe(lambda: compute(unit)) for unit in units}


def evaluate_predictor(
    mu: EffectivenessMatrix, phi: PredictionMatrix, variant: TauVariant = TauVariant.B
) -> EvalResult:
    """All measures of one predictor, undefined units are excluded and recorded instead of raising."""

    _check_axes(mu, phi)
    per_ranker = _unit_taus(lambda r: srmq_per_ranker(mu, phi, r, variant), mu.rankers)
    per_query = _unit_taus(lambda q: mrsq_per_query(mu, phi, q, variant), mu.queries)
    srmq, srmq_excluded = average_taus(per_ranker, Measure.SRMQ)
    mrsq, mrsq_excluded = average_taus(per_query, Measure.MRSQ)
    mrmq = _safe(lambda: _mrmq(mu, phi, variant))

    excluded = tuple(srmq_excluded + mrsq_excluded)
    if excluded:
        logger.warning(
            f"{phi.name} on {mu.metric.label}: excluded {len(srmq_excluded)} rankers and {len(mrsq_excluded)} "
            f"queries with undefined correlation"
        )
    return EvalResult(
        predictor_id=phi.name,
        metric=mu.metric.label,
        srmq_per_ranker=per_ranker,
        srmq_mean=srmq,
        mrsq_per_query=per_query,
        mrsq_mean=mrsq,
        mrmq_global=mrmq,
        f1=_f1_result(srmq, mrsq),
        excluded_units=excluded,
    )


def _measure_vector(results: Sequence[EvalResult], measure: Measure) -> Dict[str, float]:
    return {result.predictor_id: result.measure(measure).value for result in results}


def _best_predictors(results: Sequence[EvalResult], measure: Measure) -> Tuple[str, ...]:
    defined = [(r.predictor_id, r.measure(measure).value) for r in results if r.measure(measure).defined]
    if not defined:
        return ()
    best = max(value for _, value in defined)
    return tuple(predictor_id for predictor_id, value in defined if value == best)


def _best_measure(result: EvalResult) -> Optional[Measure]:
    defined = [m for m in BASE_MEASURES if result.measure(m).defined]
    if not defined:
        return None
    return max(defined, key=lambda m: result.measure(m).value)


def evaluate_all(
    mu: EffectivenessMatrix,
    phis: Sequence[PredictionMatrix],
    variant: TauVariant = TauVariant.B,
    workers: int = 1,
) -> EvaluationSummary:
    """Evaluate all predictors against one target metric and compare the measures across predictors.

    Args:
        mu (EffectivenessMatrix): Target effectiveness.
        phis (Sequence[PredictionMatrix]): Prediction matrices with unique names, evaluated in this order.
        variant (TauVariant): Kendall τ variant. Default is τ-b.
        workers (int): Number of worker threads. Default is 1.

    Raises:
        ValidationError: No predictors, duplicate names or mismatching axes.

    Returns:
        Evaluation summary, deterministic for given inputs.
    """

    if not phis:
        raise ValidationError("At least one prediction matrix is required")
    names = [phi.name for phi in phis]
    if len(set(names)) != len(names):
        raise ValidationError(f"Predictor names must be unique, got {', '.join(names)}")
    for phi in phis:
        _check_axes(mu, phi)

    results: List[EvalResult] = CellWorkerPool(workers).map(lambda phi: evaluate_predictor(mu, phi, variant), phis)
    summary = EvaluationSummary(metric=mu.metric.label, results=results)

    vectors = {measure: _measure_vector(results, measure) for measure in Measure}
    for measure_a, measure_b in combinations(Measure, 2):
        summary.cross_measure[(measure_a, measure_b)] = _safe(
            lambda: cross_measure_correlation(vectors[measure_a], vectors[measure_b])
        )
    for measure in Measure:
        defined = {key: value for key, value in vectors[measure].items() if not np.isnan(value)}
        if len(defined) >= 2:
            summary.discriminativeness[measure] = TauResult(discriminativeness(defined))
        else:
            summary.discriminativeness[measure] = TauResult.undefined("singleton")
        summary.best_per_measure[measure] = _best_predictors(results, measure)

    for result in results:
        best = _best_measure(result)
        if best is not None:
            summary.best_measure_per_predictor[result.predictor_id] = best
        for measure, taus in ((Measure.SRMQ, result.srmq_per_ranker), (Measure.MRSQ, result.mrsq_per_query)):
            stats = unit_summary(taus)
            if stats is not None:
                summary.unit_summaries[(result.predictor_id, measure)] = stats

    logger.info(f"Evaluated {len(results)} predictors on {mu.metric.label}")
    return summary
