"""Post-retrieval QPP predictors computed from retrieval scores and document embeddings."""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from qppm.cell_workers import CellWorkerPool
from qppm.dataclasses.matrices import PredictionMatrix
from qppm.dataclasses.run_data import EmbeddingTable, ExternalPredictions, QueryMeta, RankedList, RunMatrix
from qppm.dataclasses.specs import PredictorId, PredictorSpec, ScoreNorm
from qppm.defaults import DEFAULT_SEED, EPSILON, EXHAUSTIVE_LIMIT
from qppm.exceptions import ConfigurationError, ValidationError
from qppm.rank_correlation import permutation_tau
from qppm.trec_io import check_prediction_coverage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreList:
    """Retrieval scores of one ranked list, the input of the score-based predictors.

    Args:
        scores (np.ndarray): Scores in descending order.
        full_list_scores (np.ndarray, optional): Scores of the complete retrieved list, default is scores.
        collection_score (float, optional): Collection score of the query (norm=provided, WIG).
    """

    scores: np.ndarray
    full_list_scores: Optional[np.ndarray] = None
    collection_score: Optional[float] = None

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("Score list contains non-finite values")
        if np.any(np.diff(self.scores) > 0):
            raise ValidationError("Score list must be in descending order")
        if self.full_list_scores is None:
            object.__setattr__(self, "full_list_scores", self.scores)

    @classmethod
    def of(
        cls,
        scores: Sequence[float],
        full_list_scores: Optional[Sequence[float]] = None,
        collection_score: Optional[float] = None,
    ) -> "ScoreList":
        full = None if full_list_scores is None else np.asarray(full_list_scores, dtype=np.float64)
        return cls(np.asarray(scores, dtype=np.float64), full, collection_score)

    @classmethod
    def from_ranked(cls, ranked: RankedList, collection_score: Optional[float] = None) -> "ScoreList":
        return cls(ranked.scores(), None, collection_score)

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    def top(self, k: Optional[int] = None) -> np.ndarray:
        """Top-k prefix of the scores.

        Raises:
            ValidationError: The list is empty.
        """

        if len(self) == 0:
            raise ValidationError("Predictors are undefined for an empty score list")
        return self.scores[:k]

    def full(self) -> np.ndarray:
        assert self.full_list_scores is not None
        return self.full_list_scores


def norm_divisor(scores: ScoreList, norm: ScoreNorm) -> float:
    """Score normalization divisor D.

    Raises:
        ConfigurationError: norm=provided without a collection score.
    """

    if norm is ScoreNorm.NONE:
        return 1.0
    if norm is ScoreNorm.PROVIDED:
        if scores.collection_score is None:
            raise ConfigurationError("norm=provided requires a collection score for every query")
        return max(abs(scores.collection_score), EPSILON)
    full = scores.full()
    if full.size == 0:
        return 1.0
    return max(abs(float(np.mean(full))), EPSILON)


def nqc(scores: ScoreList, k: int = 100, norm: ScoreNorm = ScoreNorm.MEAN_ABS) -> float:
    """Normalized query commitment, σ(top-k scores) / D."""

    return float(np.std(scores.top(k))) / norm_divisor(scores, norm)


def wig_collection_score(scores: ScoreList, norm: ScoreNorm) -> float:
    """Reference score c of WIG: the collection score, or the mean of the full list as its surrogate."""

    if norm is ScoreNorm.PROVIDED:
        if scores.collection_score is None:
            raise ConfigurationError("wig with norm=provided requires a collection score for every query")
        return scores.collection_score
    return float(np.mean(scores.full()))


def wig(scores: ScoreList, k: int = 5, collection_score: float = 0.0, query_len: Optional[int] = None) -> float:
    """Weighted information gain, mean of (s_i − c) over the top-k divided by sqrt(|q|).

    Args:
        scores (ScoreList): Scores.
        k (int): Cutoff depth. Default is 5.
        collection_score (float): Reference score c.
        query_len (int, optional): Number of query terms |q|, treated as 1 when absent.
    """

    top = scores.top(k)
    return float(np.mean(top - collection_score)) / math.sqrt(query_len or 1)


def sigma_max(scores: ScoreList, k: Optional[int] = None) -> float:
    """Maximum population standard deviation over the prefixes top-1 .. top-k."""

    top = scores.top(k)
    # variance is shift-invariant, centering on s_1 keeps the prefix sums small
    deltas = top - top[0]
    counts = np.arange(1, top.size + 1)
    means = np.cumsum(deltas) / counts
    variances = np.maximum(np.cumsum(deltas * deltas) / counts - means * means, 0.0)
    return float(np.sqrt(variances.max()))


def n_sigma_frac(scores: ScoreList, x: float = 0.5, k: Optional[int] = None) -> float:
    """σ over the prefix of scores >= x · s_1, the prefix always contains s_1."""

    top = scores.top(k)
    count = max(1, int(np.count_nonzero(top >= x * top[0])))
    return float(np.std(top[:count]))


def smv(scores: ScoreList, k: int = 100, norm: ScoreNorm = ScoreNorm.MEAN_ABS, shift: bool = False) -> float:
    """Score magnitude and variance, mean of s_i · |ln(s_i / μ̄)| over the top-k divided by D.

    Args:
        shift (bool): Subtract (min of the full list − EPSILON) from all scores first.

    Raises:
        ValidationError: A non-positive top-k score (after the optional shift).
    """

    if shift:
        offset = float(np.min(scores.full())) - EPSILON
        scores = ScoreList(scores.scores - offset, scores.full() - offset, scores.collection_score)
    top = scores.top(k)
    if np.any(top <= 0.0):
        raise ValidationError("SMV requires positive scores, enable the shift policy for non-positive scores")
    mean = float(np.mean(top))
    return float(np.mean(top * np.abs(np.log(top / mean)))) / norm_divisor(scores, norm)


def _sublist_indices(n: int, sub: int, samples: int, rng: np.random.Generator, exhaustive: bool) -> np.ndarray:
    """Index sets of the sampled sublists, one sorted row per sublist.

    Raises:
        ValidationError: sub exceeds the list length.
        ConfigurationError: Exhaustive enumeration over EXHAUSTIVE_LIMIT sublists.
    """

    if sub > n:
        raise ValidationError(f"Sublist size {sub} exceeds the list length {n}")
    if exhaustive:
        count = math.comb(n, sub)
        if count > EXHAUSTIVE_LIMIT:
            raise ConfigurationError(
                f"Exhaustive enumeration of C({n}, {sub}) = {count} sublists exceeds the limit of {EXHAUSTIVE_LIMIT}"
            )
        return np.array(list(combinations(range(n), sub)), dtype=np.intp)
    return np.vstack([np.sort(rng.choice(n, size=sub, replace=False)) for _ in range(samples)])


def rsd(
    scores: ScoreList,
    k: int = 100,
    sub: int = 50,
    samples: int = 30,
    rng: Optional[np.random.Generator] = None,
    exhaustive: bool = False,
    norm: ScoreNorm = ScoreNorm.MEAN_ABS,
) -> float:
    """Robust standard deviation, mean of NQC over sublists of the top-k.

    Args:
        scores (ScoreList): Scores.
        k (int): Cutoff depth.
        sub (int): Sublist size k′.
        samples (int): Number of sampled sublists m_s (ignored when exhaustive).
        rng (np.random.Generator, optional): Source of randomness, default is a generator seeded with DEFAULT_SEED.
        exhaustive (bool): Enumerate all C(len, k′) sublists instead of sampling.
        norm (ScoreNorm): Normalization of the base NQC.
    """

    top = scores.top(k)
    rng = rng if rng is not None else np.random.default_rng(DEFAULT_SEED)
    indices = _sublist_indices(top.size, sub, samples, rng, exhaustive)
    return float(np.mean(np.std(top[indices], axis=1))) / norm_divisor(scores, norm)


def _cosine_similarities(vectors: np.ndarray, centroid: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(centroid)
    dots = vectors @ centroid
    return np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0.0)


def uef(
    ranked: RankedList,
    embeddings: Optional[EmbeddingTable] = None,
    k: int = 100,
    sub: int = 50,
    samples: int = 30,
    rng: Optional[np.random.Generator] = None,
    exhaustive: bool = False,
    norm: ScoreNorm = ScoreNorm.MEAN_ABS,
    collection_score: Optional[float] = None,
) -> float:
    """Utility estimation with an embedding-centroid re-ranking.

    Every sampled sublist of the top-k defines a centroid, the top-k is re-ranked by cosine similarity to it and the
    agreement with the original order gives the weight (1 + τ) / 2 of the base NQC estimate. Without embeddings all
    weights are 1 and the result is NQC on the top-k.

    Raises:
        ValidationError: A top-k document has no embedding vector.
    """

    scores = ScoreList.from_ranked(ranked, collection_score)
    base = nqc(scores, k, norm)
    if embeddings is None:
        return base

    doc_ids = ranked.doc_ids(k)
    vectors = embeddings.matrix(doc_ids)
    rng = rng if rng is not None else np.random.default_rng(DEFAULT_SEED)
    indices = _sublist_indices(len(doc_ids), sub, samples, rng, exhaustive)

    positions = np.empty(indices.shape[:1] + (len(doc_ids),), dtype=np.intp)
    for row, sample in enumerate(indices):
        order = np.argsort(-_cosine_similarities(vectors, vectors[sample].mean(axis=0)), kind="stable")
        positions[row, order] = np.arange(len(doc_ids))
    weights = (1.0 + permutation_tau(positions)) / 2.0
    return float(np.mean(weights * base))


def scnqc(
    scores: ScoreList,
    k: int = 100,
    alpha: float = 1.0,
    beta_p: float = 2.0,
    gamma: float = 0.0,
    doc_weights: Optional[np.ndarray] = None,
    norm: ScoreNorm = ScoreNorm.MEAN_ABS,
) -> float:
    """Scaled and calibrated NQC, ((1/k′) Σ w_i^γ |s_i − μ̄|^β)^(1/β) / D^α.

    With the defaults (α=1, β=2, γ=0) it equals NQC.

    Raises:
        ValidationError: Fewer document weights than top-k scores.
    """

    top = scores.top(k)
    if doc_weights is not None and len(doc_weights) < top.size:
        raise ValidationError(f"scnqc needs {top.size} document weights, got {len(doc_weights)}")
    weights = np.ones(top.size) if doc_weights is None else np.asarray(doc_weights, dtype=np.float64)[: top.size]
    deviations = np.abs(top - np.mean(top))
    scaled = weights**gamma
    if beta_p == 2.0:
        spread = float(np.sqrt(np.mean(scaled * (deviations * deviations))))
    else:
        spread = float(np.mean(scaled * deviations**beta_p)) ** (1.0 / beta_p)
    return spread / norm_divisor(scores, norm) ** alpha


def qv_nqc(
    original: ScoreList,
    variants: Sequence[ScoreList] = (),
    lam: float = 0.5,
    k: int = 100,
    norm: ScoreNorm = ScoreNorm.MEAN_ABS,
) -> float:
    """Query-variant NQC, λ · NQC(original) + (1 − λ) · mean NQC(variant), NQC(original) without variants."""

    base = nqc(original, k, norm)
    if not variants:
        return base
    variant_mean = float(np.mean([nqc(variant, k, norm) for variant in variants]))
    return lam * base + (1.0 - lam) * variant_mean


def dm(ranked: RankedList, embeddings: Optional[EmbeddingTable], k: int = 5) -> float:
    """Negated diameter, −max Euclidean distance between the embeddings of the top-k documents.

    Raises:
        ValidationError: No embeddings or a top-k document without a vector.
    """

    if k < 1:
        raise ConfigurationError(f"dm: k must be >= 1, got {k}")
    if embeddings is None:
        raise ValidationError("DM requires document embeddings")
    vectors = embeddings.matrix(ranked.doc_ids(k))
    diameter = 0.0
    for i in range(len(vectors) - 1):
        diameter = max(diameter, float(np.linalg.norm(vectors[i + 1 :] - vectors[i], axis=1).max()))
    return -diameter if diameter > 0.0 else 0.0


_DEFAULT_K = {PredictorId.WIG: 5, PredictorId.DM: 5}
_NORM_KEYS = {"k", "norm"}
_SAMPLING_KEYS = _NORM_KEYS | {"samples", "sub", "seed", "exhaustive"}
_ALLOWED_KEYS: Dict[PredictorId, set] = {
    PredictorId.NQC: _NORM_KEYS,
    PredictorId.WIG: _NORM_KEYS,
    PredictorId.SIGMA_MAX: {"k"},
    PredictorId.SIGMA_FRAC: {"k", "x"},
    PredictorId.SMV: _NORM_KEYS | {"shift"},
    PredictorId.UEF: _SAMPLING_KEYS,
    PredictorId.RSD: _SAMPLING_KEYS,
    PredictorId.SCNQC: _NORM_KEYS | {"alpha", "beta", "gamma"},
    PredictorId.QV_NQC: _NORM_KEYS | {"lambda"},
    PredictorId.DM: {"k"},
    PredictorId.EXTERNAL: {"file"},
}


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: '{value}'")


_CONVERTERS: Dict[str, Callable[[str], object]] = {
    "k": int,
    "x": float,
    "norm": ScoreNorm,
    "samples": int,
    "sub": int,
    "seed": int,
    "exhaustive": _parse_bool,
    "shift": _parse_bool,
    "lambda": float,
    "alpha": float,
    "beta": float,
    "gamma": float,
    "file": str,
}

_FIELD_NAMES = {"lambda": "lam", "beta": "beta_p", "file": "external_source"}


def parse_predictor_spec(text: str) -> PredictorSpec:
    """Parse a predictor spec string such as "nqc:k=100,norm=mean_abs" or "external:file=bertqpp".

    Keys not given keep their defaults (k=5 for wig and dm, k=100 otherwise).

    Raises:
        ConfigurationError: Unknown predictor, unknown or inapplicable key, malformed or out-of-range value.
    """

    name, _, params = text.strip().partition(":")
    try:
        predictor = PredictorId(name.strip().lower())
    except ValueError:
        raise ConfigurationError(f"Unknown predictor '{name}' in '{text}'") from None

    values: Dict[str, object] = {"predictor": predictor, "k": _DEFAULT_K.get(predictor, 100)}
    for item in filter(None, (part.strip() for part in params.split(","))):
        key, sep, raw = item.partition("=")
        key = key.strip().lower()
        if not sep:
            raise ConfigurationError(f"Malformed parameter '{item}' in '{text}', expected key=value")
        if key not in _ALLOWED_KEYS[predictor]:
            allowed = ", ".join(sorted(_ALLOWED_KEYS[predictor]))
            raise ConfigurationError(f"Unknown key '{key}' for predictor '{predictor.value}' (allowed: {allowed})")
        try:
            values[_FIELD_NAMES.get(key, key)] = _CONVERTERS[key](raw.strip())
        except ValueError as e:
            raise ConfigurationError(f"Invalid value of '{key}' in '{text}': {e}") from None
    return PredictorSpec(**values)  # type: ignore[arg-type]


def cell_rng(seed: int, query_id: str, ranker_id: str) -> np.random.Generator:
    """Random generator of one cell, derived from the global seed and a stable digest of the cell ids."""

    digest = hashlib.blake2b(f"{query_id}\x1f{ranker_id}".encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(np.random.SeedSequence([seed, int.from_bytes(digest, "little")]))


@dataclass
class SideInputs:
    """Optional inputs of the predictors besides the run matrix.

    Args:
        embeddings (EmbeddingTable, optional): Document vectors (UEF, DM).
        query_meta (Dict[str, QueryMeta]): Query lengths (WIG) and variants (QV-NQC).
        collection_scores (Dict[str, float]): Per-query collection scores (norm=provided).
        external (Dict[str, ExternalPredictions]): Precomputed predictions keyed by file id.
        smv_shift (bool): Apply the SMV shift policy to every SMV spec.
    """

    embeddings: Optional[EmbeddingTable] = None
    query_meta: Dict[str, QueryMeta] = field(default_factory=dict)
    collection_scores: Dict[str, float] = field(default_factory=dict)
    external: Dict[str, ExternalPredictions] = field(default_factory=dict)
    smv_shift: bool = False


def _variant_lists(run_matrix: RunMatrix, query_id: str, ranker_id: str, side: SideInputs) -> List[ScoreList]:
    meta = side.query_meta.get(query_id)
    if meta is None:
        return []
    lists = []
    for variant_id in meta.variants:
        ranked = run_matrix.lookup(variant_id, ranker_id)
        if ranked is None or len(ranked) == 0:
            logger.debug(f"Variant '{variant_id}' of '{query_id}' has no ranked list from '{ranker_id}', skipped")
            continue
        lists.append(ScoreList.from_ranked(ranked, side.collection_scores.get(variant_id)))
    return lists


def predict_cell(
    spec: PredictorSpec,
    run_matrix: RunMatrix,
    query_id: str,
    ranker_id: str,
    side: SideInputs,
    seed: int = DEFAULT_SEED,
) -> float:
    """Value of a native predictor on one (query, ranker) cell."""

    ranked = run_matrix.cell(query_id, ranker_id)
    scores = ScoreList.from_ranked(ranked, side.collection_scores.get(query_id))
    predictor = spec.predictor

    if predictor is PredictorId.NQC:
        return nqc(scores, spec.k, spec.norm)
    if predictor is PredictorId.WIG:
        meta = side.query_meta.get(query_id)
        query_len = meta.term_count if meta is not None else None
        return wig(scores, spec.k, wig_collection_score(scores, spec.norm), query_len)
    if predictor is PredictorId.SIGMA_MAX:
        return sigma_max(scores, spec.k)
    if predictor is PredictorId.SIGMA_FRAC:
        return n_sigma_frac(scores, spec.x, spec.k)
    if predictor is PredictorId.SMV:
        return smv(scores, spec.k, spec.norm, spec.shift or side.smv_shift)
    if predictor is PredictorId.SCNQC:
        return scnqc(scores, spec.k, spec.alpha, spec.beta_p, spec.gamma, None, spec.norm)
    if predictor is PredictorId.QV_NQC:
        return qv_nqc(scores, _variant_lists(run_matrix, query_id, ranker_id, side), spec.lam, spec.k, spec.norm)
    if predictor is PredictorId.DM:
        return dm(ranked, side.embeddings, spec.k)

    rng = cell_rng(spec.seed if spec.seed is not None else seed, query_id, ranker_id)
    if predictor is PredictorId.RSD:
        return rsd(scores, spec.k, spec.sub, spec.samples, rng, spec.exhaustive, spec.norm)
    if predictor is PredictorId.UEF:
        return uef(
            ranked,
            side.embeddings,
            spec.k,
            spec.sub,
            spec.samples,
            rng,
            spec.exhaustive,
            spec.norm,
            side.collection_scores.get(query_id),
        )
    raise ConfigurationError(f"Predictor '{predictor.value}' is not computed natively")


def build_prediction_matrix(
    run_matrix: RunMatrix,
    spec: PredictorSpec,
    side_inputs: Optional[SideInputs] = None,
    seed: int = DEFAULT_SEED,
    name: Optional[str] = None,
    workers: int = 1,
) -> PredictionMatrix:
    """Evaluate a predictor on every cell of the run matrix.

    Args:
        run_matrix (RunMatrix): Validated run matrix.
        spec (PredictorSpec): Predictor and its hyperparameters.
        side_inputs (SideInputs, optional): Embeddings, query metadata, collection scores and external predictions.
        seed (int): Global seed, overridden by spec.seed. Every cell derives its own generator from it, so the
            matrix does not depend on the evaluation order.
        name (str, optional): Display id, default is the predictor name.
        workers (int): Number of worker threads. Default is 1.

    Raises:
        ConfigurationError: Missing side input required by the predictor.
        ValidationError: Invalid cell input, the message names the cell.

    Returns:
        Prediction matrix on the run matrix axes.
    """

    side = side_inputs if side_inputs is not None else SideInputs()
    display = name or spec.predictor.value

    if spec.predictor is PredictorId.EXTERNAL:
        assert spec.external_source is not None
        predictions = side.external.get(spec.external_source)
        if predictions is None:
            raise ConfigurationError(f"No external prediction file '{spec.external_source}' for '{display}'")
        covered = check_prediction_coverage(predictions, run_matrix)
        values = np.array(
            [[covered.values[(q, r)] for r in run_matrix.rankers] for q in run_matrix.queries], dtype=np.float64
        )
        return PredictionMatrix(run_matrix.queries, run_matrix.rankers, values, spec, display)

    def evaluate_cell(i: int, j: int) -> float:
        query_id, ranker_id = run_matrix.queries[i], run_matrix.rankers[j]
        try:
            return predict_cell(spec, run_matrix, query_id, ranker_id, side, seed)
        except ValidationError as e:
            raise ValidationError(f"{display} on ({query_id}, {ranker_id}): {e}") from e

    values = CellWorkerPool(workers).map_cells(run_matrix.shape, evaluate_cell)
    logger.info(f"Computed predictor '{display}' for {values.size} cells")
    return PredictionMatrix(run_matrix.queries, run_matrix.rankers, values, spec, display)
