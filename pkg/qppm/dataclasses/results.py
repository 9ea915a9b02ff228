import math
from dataclasses import dataclass, field
from enum import Enum, unique
from typing import Dict, List, Optional, Tuple


@dataclass(frozen=True)
class TauResult:
    """A correlation (or an average of correlations) that may be undefined.

    Args:
        value (float): The value, NaN when undefined.
        reason (str, optional): Why the value is undefined, e.g. "x degenerate" or "all-degenerate".
    """

    value: float
    reason: Optional[str] = None

    @classmethod
    def undefined(cls, reason: str) -> "TauResult":
        return cls(math.nan, reason)

    @property
    def defined(self) -> bool:
        return self.reason is None


@unique
class Measure(Enum):
    """Evaluation measures of a predictor."""

    SRMQ = "srmq"
    """Per-ranker correlation across queries, averaged over rankers."""

    MRSQ = "mrsq"
    """Per-query correlation across rankers, averaged over queries."""

    MRMQ = "mrmq"
    """Single correlation over all (query, ranker) cells."""

    F1 = "f1"
    """Harmonic mean of SRMQ and MRSQ."""


@dataclass(frozen=True)
class Exclusion:
    """A ranker column or query row left out of an average because its correlation is undefined."""

    measure: Measure
    unit: str
    reason: str


@dataclass(frozen=True)
class UnitSummary:
    """Distribution of the defined per-unit correlations of one measure (box plot numbers)."""

    count: int
    minimum: float
    lower_quartile: float
    median: float
    upper_quartile: float
    maximum: float


@dataclass
class EvalResult:
    """All evaluation measures of one predictor against one target metric."""

    predictor_id: str
    metric: str
    srmq_per_ranker: Dict[str, TauResult]
    srmq_mean: TauResult
    mrsq_per_query: Dict[str, TauResult]
    mrsq_mean: TauResult
    mrmq_global: TauResult
    f1: TauResult
    excluded_units: Tuple[Exclusion, ...] = ()

    def measure(self, measure: Measure) -> TauResult:
        return {
            Measure.SRMQ: self.srmq_mean,
            Measure.MRSQ: self.mrsq_mean,
            Measure.MRMQ: self.mrmq_global,
            Measure.F1: self.f1,
        }[measure]


@dataclass
class EvaluationSummary:
    """Results of all predictors for one target metric plus the analyses across predictors."""

    metric: str
    results: List[EvalResult]
    cross_measure: Dict[Tuple[Measure, Measure], TauResult] = field(default_factory=dict)
    discriminativeness: Dict[Measure, TauResult] = field(default_factory=dict)
    best_per_measure: Dict[Measure, Tuple[str, ...]] = field(default_factory=dict)
    best_measure_per_predictor: Dict[str, Measure] = field(default_factory=dict)
    unit_summaries: Dict[Tuple[str, Measure], UnitSummary] = field(default_factory=dict)

    def result(self, predictor_id: str) -> EvalResult:
        for result in self.results:
            if result.predictor_id == predictor_id:
                return result
        raise KeyError(predictor_id)


@dataclass(frozen=True)
class TTestResult:
    """Paired two-tailed t-test outcome."""

    t_stat: float
    df: int
    p_value: float
    mean_diff: float


@unique
class Direction(Enum):
    """Which predictor of a pair has the higher mean correlation."""

    A_BETTER = ">"
    B_BETTER = "<"
    TIE = "="

    def flipped(self) -> "Direction":
        if self is Direction.A_BETTER:
            return Direction.B_BETTER
        if self is Direction.B_BETTER:
            return Direction.A_BETTER
        return self


@dataclass(frozen=True)
class SignificanceCell:
    """Comparison of predictor a against predictor b."""

    a: str
    b: str
    direction: Direction
    significant: bool
    p_value: float
    test: Optional[TTestResult] = None

    def swapped(self) -> "SignificanceCell":
        test = self.test
        if test is not None:
            test = TTestResult(-test.t_stat, test.df, test.p_value, -test.mean_diff)
        return SignificanceCell(self.b, self.a, self.direction.flipped(), self.significant, self.p_value, test)


@dataclass
class SignificanceMatrix:
    """Pairwise significance of predictor differences, one cell per unordered pair."""

    predictors: Tuple[str, ...]
    alpha: float
    cells: Dict[Tuple[str, str], SignificanceCell]
    bonferroni: bool = False

    def cell(self, a: str, b: str) -> SignificanceCell:
        """Comparison of a against b, regardless of the order the pair is stored in.

        Raises:
            KeyError: a == b or an unknown predictor.
        """

        if (a, b) in self.cells:
            return self.cells[(a, b)]
        return self.cells[(b, a)].swapped()


@dataclass(frozen=True)
class RoutingResult:
    """Per-query ranker selection driven by a predictor.

    Args:
        predictor_id (str): Predictor used for the selection.
        metric (str): Target metric label.
        choices (Dict[str, str]): Selected ranker for each query.
        routed_mean (float): Mean μ of the selected rankers.
        best_fixed_ranker (str): Ranker with the highest mean μ over all queries.
        best_fixed_mean (float): Mean μ of that ranker.
        oracle_mean (float): Mean of the per-query best μ.
    """

    predictor_id: str
    metric: str
    choices: Dict[str, str]
    routed_mean: float
    best_fixed_ranker: str
    best_fixed_mean: float
    oracle_mean: float
