from dataclasses import dataclass
from enum import Enum, unique
from typing import Optional

from qppm.defaults import DEFAULT_REL_THRESHOLD
from qppm.exceptions import ConfigurationError


@unique
class MetricKind(Enum):
    """Target IR effectiveness measure."""

    AP = "ap"
    NDCG = "ndcg"


@dataclass(frozen=True)
class MetricSpec:
    """Target metric μ with its cutoff.

    Args:
        kind (MetricKind): AP or nDCG.
        cutoff (int): Rank cutoff k, >= 1.
        rel_threshold (int): Minimal grade of a relevant document for AP, >= 1.
        gain (str): nDCG gain function, only "linear" is supported.
    """

    kind: MetricKind
    cutoff: int
    rel_threshold: int = DEFAULT_REL_THRESHOLD
    gain: str = "linear"

    def __post_init__(self) -> None:
        if self.cutoff < 1:
            raise ConfigurationError(f"Metric cutoff must be >= 1, got {self.cutoff}")
        if self.rel_threshold < 1:
            raise ConfigurationError(f"Relevance threshold must be >= 1, got {self.rel_threshold}")
        if self.gain != "linear":
            raise ConfigurationError(f"Unsupported nDCG gain: {self.gain}")

    @property
    def label(self) -> str:
        """Canonical spec string, e.g. "ap@50" or "ap@50:rel=1"."""

        text = f"{self.kind.value}@{self.cutoff}"
        if self.kind is MetricKind.AP and self.rel_threshold != DEFAULT_REL_THRESHOLD:
            text += f":rel={self.rel_threshold}"
        return text


@unique
class PredictorId(Enum):
    """Supported QPP models. EXTERNAL covers predictors ingested from prediction files."""

    NQC = "nqc"
    WIG = "wig"
    SIGMA_MAX = "sigma_max"
    SIGMA_FRAC = "sigma_frac"
    SMV = "smv"
    UEF = "uef"
    RSD = "rsd"
    SCNQC = "scnqc"
    QV_NQC = "qv_nqc"
    DM = "dm"
    EXTERNAL = "external"


@unique
class ScoreNorm(Enum):
    """Score normalization divisor D of the score-based predictors."""

    NONE = "none"
    """D = 1."""

    MEAN_ABS = "mean_abs"
    """D = |mean of the full retrieved list's scores|, floored at EPSILON."""

    PROVIDED = "provided"
    """D = |collection score of the query| from a collection score file."""


@dataclass(frozen=True)
class PredictorSpec:
    """Predictor φ and its hyperparameters.

    Fields that do not apply to the predictor keep their defaults and are ignored.
    """

    predictor: PredictorId
    k: int = 100
    x: float = 0.5
    norm: ScoreNorm = ScoreNorm.MEAN_ABS
    samples: int = 30
    sub: int = 50
    exhaustive: bool = False
    lam: float = 0.5
    alpha: float = 1.0
    beta_p: float = 2.0
    gamma: float = 0.0
    seed: Optional[int] = None
    external_source: Optional[str] = None
    shift: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigurationError(f"{self.predictor.value}: k must be >= 1, got {self.k}")
        if not 0.0 < self.x <= 1.0:
            raise ConfigurationError(f"{self.predictor.value}: x must be in (0, 1], got {self.x}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"{self.predictor.value}: lambda must be in [0, 1], got {self.lam}")
        if self.beta_p <= 0.0:
            raise ConfigurationError(f"{self.predictor.value}: beta must be > 0, got {self.beta_p}")
        if self.samples < 1:
            raise ConfigurationError(f"{self.predictor.value}: samples must be >= 1, got {self.samples}")
        if self.predictor in (PredictorId.UEF, PredictorId.RSD) and self.sub < 2:
            raise ConfigurationError(f"{self.predictor.value}: sub must be >= 2, got {self.sub}")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"{self.predictor.value}: seed must be an unsigned 64-bit integer")
        if self.predictor is PredictorId.EXTERNAL and not self.external_source:
            raise ConfigurationError("external: the 'file' key is required")


@unique
class ReportFormat(Enum):
    """Rendering of report tables."""

    CSV = "csv"
    MARKDOWN = "markdown"
    LATEX = "latex"

    @property
    def extension(self) -> str:
        return {ReportFormat.CSV: "csv", ReportFormat.MARKDOWN: "md", ReportFormat.LATEX: "tex"}[self]


@unique
class DumpFormat(Enum):
    """Serialization of the per-unit τ dump."""

    JSON = "json"
    JSON_LZ4 = "json_lz4"
