"""Paired two-tailed t-tests between predictors over per-unit correlations."""

import logging
import math
from itertools import combinations
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from qppm.dataclasses.results import (
    Direction,
    EvalResult,
    Measure,
    SignificanceCell,
    SignificanceMatrix,
    TTestResult,
)
from qppm.defaults import DEFAULT_ALPHA
from qppm.exceptions import ConfigurationError, ValidationError

logger = logging.getLogger(__name__)

_MAX_ITERATIONS = 300
_CF_EPSILON = 1e-15
_FP_MIN = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction of the incomplete beta function, modified Lentz evaluation."""

    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FP_MIN:
        d = _FP_MIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITERATIONS + 1):
        m2 = 2 * m
        for numerator in (
            m * (b - m) * x / ((qam + m2) * (a + m2)),
            -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2)),
        ):
            d = 1.0 + numerator * d
            if abs(d) < _FP_MIN:
                d = _FP_MIN
            c = 1.0 + numerator / c
            if abs(c) < _FP_MIN:
                c = _FP_MIN
            d = 1.0 / d
            delta = d * c
            h *= delta
        if abs(delta - 1.0) < _CF_EPSILON:
            return h
    logger.warning(f"Incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")
    return h


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for 0 <= x <= 1 and a, b > 0."""

    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x))
    # the fraction converges fast on the side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _two_tailed(t: float, df: int) -> float:
    """P(|T| >= |t|) = I_{df/(df+t²)}(df/2, 1/2)."""

    return min(1.0, max(0.0, regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)))


def student_t_cdf(t: float, df: int) -> float:
    """P(T <= t) of the Student t distribution with df degrees of freedom.

    Raises:
        ValidationError: t is not finite.
    """

    if not math.isfinite(t):
        raise ValidationError(f"t statistic must be finite, got {t}")
    if df < 1:
        raise ValueError(f"Degrees of freedom must be >= 1, got {df}")
    tail = 0.5 * _two_tailed(t, df)
    return 1.0 - tail if t > 0 else tail


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Paired two-tailed t-test of a against b.

    Units where either value is NaN (an undefined correlation) are dropped pairwise.

    Raises:
        ValidationError: Vectors of different length, or fewer than 2 units left after dropping.

    Returns:
        t statistic, degrees of freedom, two-tailed p-value and mean difference. A zero standard deviation of the
        differences gives t = 0 and p = 1.
    """

    xs, ys = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValidationError(f"Paired vectors differ in length: {xs.size} and {ys.size}")
    keep = ~(np.isnan(xs) | np.isnan(ys))
    diffs = xs[keep] - ys[keep]
    n = int(diffs.size)
    if n < 2:
        raise ValidationError(f"Paired t-test needs at least 2 units defined in both vectors, got {n}")

    mean_diff = float(np.mean(diffs))
    sd = float(np.std(diffs, ddof=1))
    if sd == 0.0:
        return TTestResult(0.0, n - 1, 1.0, mean_diff)
    t_stat = mean_diff / (sd / math.sqrt(n))
    return TTestResult(t_stat, n - 1, _two_tailed(t_stat, n - 1), mean_diff)


def _direction(mean_diff: float) -> Direction:
    if mean_diff > 0:
        return Direction.A_BETTER
    if mean_diff < 0:
        return Direction.B_BETTER
    return Direction.TIE


def significance_matrix(
    per_unit_taus: Mapping[str, Sequence[float]], alpha: float = DEFAULT_ALPHA, bonferroni: bool = False
) -> SignificanceMatrix:
    """Pairwise significance of all predictors.

    Args:
        per_unit_taus (Mapping[str, Sequence[float]]): Per-unit τ vector of each predictor over one shared unit axis
            (NaN for undefined units). Pairs are formed in mapping order.
        alpha (float): Significance level, 0 < alpha < 1.
        bonferroni (bool): Divide alpha by the number of pairs.

    Raises:
        ConfigurationError: alpha out of range.
        ValidationError: Vectors of different length.

    Returns:
        One cell per unordered pair, significant when p < alpha.
    """

    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must be in (0, 1), got {alpha}")
    predictors = tuple(per_unit_taus)
    lengths = {len(values) for values in per_unit_taus.values()}
    if len(lengths) > 1:
        raise ValidationError(f"Per-unit vectors must share one unit axis, got lengths {sorted(lengths)}")

    pairs = list(combinations(predictors, 2))
    level = alpha / len(pairs) if bonferroni and pairs else alpha
    cells: Dict[Tuple[str, str], SignificanceCell] = {}
    for a, b in pairs:
        try:
            test = paired_t_test(per_unit_taus[a], per_unit_taus[b])
        except ValidationError as e:
            logger.warning(f"No significance test for {a} vs {b}: {e}")
            cells[(a, b)] = SignificanceCell(a, b, Direction.TIE, False, math.nan)
            continue
        cells[(a, b)] = SignificanceCell(a, b, _direction(test.mean_diff), test.p_value < level, test.p_value, test)
    return SignificanceMatrix(predictors, alpha, cells, bonferroni)


def unit_vectors(results: Sequence[EvalResult], measure: Measure) -> Tuple[List[str], Dict[str, List[float]]]:
    """Per-unit τ vectors of a measure, per ranker for SRMQ and per query for MRSQ.

    Returns:
        The unit axis and the vector of every predictor (NaN for undefined units).
    """

    if measure not in (Measure.SRMQ, Measure.MRSQ):
        raise ValueError(f"Per-unit vectors exist for srmq and mrsq only, got {measure.value}")
    if not results:
        return [], {}
    per_unit = [r.srmq_per_ranker if measure is Measure.SRMQ else r.mrsq_per_query for r in results]
    units = list(per_unit[0])
    return units, {r.predictor_id: [taus[u].value for u in units] for r, taus in zip(results, per_unit)}


def significance_from_dump(
    dump: Mapping[str, Any], alpha: Optional[float] = None, bonferroni: Optional[bool] = None
) -> Dict[Tuple[str, Measure], SignificanceMatrix]:
    """Re-run the significance tests from a per-unit τ dump.

    Args:
        dump (Mapping[str, Any]): Loaded dump, {"alpha", "bonferroni", "metrics": {label: {measure: {"units",
            "predictors", "taus"}}}} with null for undefined units.
        alpha (float, optional): Overrides the level stored in the dump.
        bonferroni (bool, optional): Overrides the correction flag stored in the dump.

    Raises:
        ValidationError: Malformed dump.

    Returns:
        Significance matrix for every (metric label, measure) in the dump.
    """

    try:
        level = float(alpha if alpha is not None else dump.get("alpha", DEFAULT_ALPHA))
        correct = bool(bonferroni if bonferroni is not None else dump.get("bonferroni", False))
        matrices: Dict[Tuple[str, Measure], SignificanceMatrix] = {}
        for label, measures in dump["metrics"].items():
            for measure_name, block in measures.items():
                units = block["units"]
                vectors = {}
                for predictor_id in block["predictors"]:
                    values = block["taus"][predictor_id]
                    if len(values) != len(units):
                        raise ValidationError(f"Dump vector of '{predictor_id}' does not match the {label} units")
                    vectors[predictor_id] = [math.nan if v is None else float(v) for v in values]
                matrices[(label, Measure(measure_name))] = significance_matrix(vectors, level, correct)
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        raise ValidationError(f"Malformed per-unit τ dump: {e!r}") from e
    return matrices
