from dataclasses import dataclass
from typing import Tuple

import numpy as np

from qppm.dataclasses.specs import MetricSpec, PredictorSpec
from qppm.exceptions import ValidationError


@dataclass(frozen=True)
class AxisMatrix:
    """|Q|×|Θ| array of per-cell values with its query and ranker axes."""

    queries: Tuple[str, ...]
    rankers: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.queries), len(self.rankers)):
            raise ValidationError(
                f"Values of shape {self.values.shape} do not match axes {len(self.queries)}x{len(self.rankers)}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("Matrix contains non-finite values")
        # Matrices are shared read-only between stages.
        self.values.setflags(write=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.queries), len(self.rankers)

    def row(self, query_id: str) -> np.ndarray:
        return self.values[self.queries.index(query_id), :]

    def column(self, ranker_id: str) -> np.ndarray:
        return self.values[:, self.rankers.index(ranker_id)]

    def value(self, query_id: str, ranker_id: str) -> float:
        return float(self.values[self.queries.index(query_id), self.rankers.index(ranker_id)])

    def same_axes(self, other: "AxisMatrix") -> bool:
        return self.queries == other.queries and self.rankers == other.rankers


@dataclass(frozen=True)
class EffectivenessMatrix(AxisMatrix):
    """μ(L_k(q, θ)) for every cell, values in [0, 1].

    Args:
        metric (MetricSpec): Target metric.
        zero_relevant (Tuple[str, ...]): Queries without any relevant (AP) or judged (nDCG) document, they score 0.
    """

    metric: MetricSpec = None  # type: ignore[assignment]
    zero_relevant: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.metric is None:
            raise ValidationError("Effectiveness matrix requires a metric")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValidationError("Effectiveness values must lie in [0, 1]")


@dataclass(frozen=True)
class PredictionMatrix(AxisMatrix):
    """φ(L_k(q, θ)) estimates of one predictor for every cell.

    Args:
        predictor (PredictorSpec): Predictor specification.
        name (str): Display id of the predictor in reports.
    """

    predictor: PredictorSpec = None  # type: ignore[assignment]
    name: str = ""

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.predictor is None:
            raise ValidationError("Prediction matrix requires a predictor spec")
        if not self.name:
            object.__setattr__(self, "name", self.predictor.predictor.value)
