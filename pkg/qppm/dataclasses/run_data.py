import math
from dataclasses import dataclass, field
from enum import Enum, unique
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from qppm.exceptions import ValidationError

CellKey = Tuple[str, str]  # (query_id, ranker_id)


@unique
class MissingCellPolicy(Enum):
    """What to do with (query, ranker) cells that are declared but have no ranked list."""

    STRICT = "strict"
    """Any missing cell is an error."""

    INTERSECT = "intersect"
    """Restrict the queries to those present in the runs of all rankers."""


@dataclass(frozen=True)
class RunEntry:
    """One line of a TREC run file after normalization.

    Args:
        query_id (str): Query id.
        doc_id (str): Document id.
        rank (int): 1-based rank after re-sorting by score.
        score (float): Retrieval score, finite.
        tag (str): Run tag.
    """

    query_id: str
    doc_id: str
    rank: int
    score: float
    tag: str

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValidationError(f"Score of ({self.query_id}, {self.doc_id}) is not finite: {self.score}")
        if self.rank < 1:
            raise ValidationError(f"Rank of ({self.query_id}, {self.doc_id}) must be >= 1, got {self.rank}")


@dataclass(frozen=True)
class RankedList:
    """Scored document list retrieved by one ranker for one query.

    Entries are sorted by descending score with ties broken by ascending doc_id, ranks are 1..len and doc ids are
    unique. Use from_scored() to build a normalized list from unordered (doc_id, score, tag) rows.
    """

    query_id: str
    ranker_id: str
    entries: Tuple[RunEntry, ...]

    @classmethod
    def from_scored(cls, query_id: str, ranker_id: str, rows: Iterable[Tuple[str, float, str]]) -> "RankedList":
        """Build a normalized ranked list.

        Args:
            query_id (str): Query id.
            ranker_id (str): Ranker id.
            rows (Iterable[Tuple[str, float, str]]): Unordered (doc_id, score, tag) rows.

        Raises:
            ValidationError: Duplicate doc_id or non-finite score.

        Returns:
            Normalized ranked list.
        """

        ordered = sorted(rows, key=lambda row: (-row[1], row[0]))
        seen = set()
        entries: List[RunEntry] = []
        for rank, (doc_id, score, tag) in enumerate(ordered, start=1):
            if doc_id in seen:
                raise ValidationError(f"Duplicate (query, doc) pair ({query_id}, {doc_id}) in run '{ranker_id}'")
            seen.add(doc_id)
            entries.append(RunEntry(query_id, doc_id, rank, float(score), tag))
        return cls(query_id, ranker_id, tuple(entries))

    def __len__(self) -> int:
        return len(self.entries)

    def top(self, k: int) -> Tuple[RunEntry, ...]:
        """Top-k prefix of the list (the whole list when k exceeds its length)."""

        return self.entries[:k]

    def doc_ids(self, k: Optional[int] = None) -> List[str]:
        return [entry.doc_id for entry in self.entries[:k]]

    def scores(self, k: Optional[int] = None) -> np.ndarray:
        return np.fromiter((entry.score for entry in self.entries[:k]), dtype=np.float64)


@dataclass(frozen=True)
class RunMatrix:
    """Ranked lists of every (query, ranker) cell.

    Args:
        queries (Tuple[str, ...]): Query axis Q, lexicographically ordered.
        rankers (Tuple[str, ...]): Ranker axis Θ, lexicographically ordered.
        lists (Dict[CellKey, RankedList]): Ranked list of each cell of Q×Θ.
        auxiliary (Dict[CellKey, RankedList]): Parsed lists of queries outside Q (e.g. query variants).
    """

    queries: Tuple[str, ...]
    rankers: Tuple[str, ...]
    lists: Dict[CellKey, RankedList]
    auxiliary: Dict[CellKey, RankedList] = field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.queries), len(self.rankers)

    def cell(self, query_id: str, ranker_id: str) -> RankedList:
        return self.lists[(query_id, ranker_id)]

    def lookup(self, query_id: str, ranker_id: str) -> Optional[RankedList]:
        """Ranked list of a cell or of an auxiliary query, None when the ranker did not retrieve for it."""

        key = (query_id, ranker_id)
        return self.lists.get(key, self.auxiliary.get(key))

    def cells(self) -> Iterator[Tuple[int, int, RankedList]]:
        """Iterate (row, column, ranked list) in row-major order."""

        for i, query_id in enumerate(self.queries):
            for j, ranker_id in enumerate(self.rankers):
                yield i, j, self.lists[(query_id, ranker_id)]


class JudgmentSet:
    """Graded relevance judgments, unjudged (query, doc) pairs have grade 0."""

    def __init__(self, grades: Mapping[CellKey, int]) -> None:
        """Constructor.

        Args:
            grades (Mapping[Tuple[str, str], int]): Grade for each (query_id, doc_id), non-negative.
        """

        self._grades: Dict[CellKey, int] = dict(grades)
        self._by_query: Dict[str, Dict[str, int]] = {}
        for (query_id, doc_id), grade in self._grades.items():
            if grade < 0:
                raise ValidationError(f"Negative grade {grade} for ({query_id}, {doc_id})")
            self._by_query.setdefault(query_id, {})[doc_id] = grade

    @property
    def grades(self) -> Dict[CellKey, int]:
        return dict(self._grades)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._grades.get((query_id, doc_id), 0)

    def for_query(self, query_id: str) -> Dict[str, int]:
        """Judged documents of a query and their grades."""

        return self._by_query.get(query_id, {})

    def query_ids(self) -> List[str]:
        return sorted(self._by_query)

    def __len__(self) -> int:
        return len(self._grades)


@dataclass(frozen=True)
class ExternalPredictions:
    """Precomputed predictor values (e.g. from a supervised QPP model) for (query, ranker) cells."""

    predictor_id: str
    values: Dict[CellKey, float]


class EmbeddingTable:
    """Dense document vectors, all of the same dimension."""

    def __init__(self, vectors: Mapping[str, np.ndarray], dim: Optional[int] = None) -> None:
        self._vectors: Dict[str, np.ndarray] = {}
        for doc_id, vector in vectors.items():
            vector = np.asarray(vector, dtype=np.float64)
            if dim is None:
                dim = int(vector.shape[0])
            if vector.shape != (dim,):
                raise ValidationError(f"Vector of '{doc_id}' has dimension {vector.shape[0]}, expected {dim}")
            if not np.all(np.isfinite(vector)):
                raise ValidationError(f"Vector of '{doc_id}' has a non-finite component")
            self._vectors[doc_id] = vector
        self.dim = dim

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._vectors

    def vector(self, doc_id: str) -> np.ndarray:
        try:
            return self._vectors[doc_id]
        except KeyError:
            raise ValidationError(f"No embedding vector for document '{doc_id}'") from None

    def matrix(self, doc_ids: Iterable[str]) -> np.ndarray:
        """Stack the vectors of the given documents into a (len, dim) array.

        Raises:
            ValidationError: Table is empty or a document has no vector.
        """

        if self.dim is None:
            raise ValidationError("Embedding table is empty")
        rows = [self.vector(doc_id) for doc_id in doc_ids]
        if not rows:
            return np.zeros((0, self.dim))
        return np.vstack(rows)


@dataclass(frozen=True)
class QueryMeta:
    """Query metadata used by WIG (query length) and QV-NQC (variant queries)."""

    query_id: str
    text: Optional[str] = None
    term_count: Optional[int] = None
    variants: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.term_count is not None and self.term_count < 1:
            raise ValidationError(f"Term count of query '{self.query_id}' must be >= 1, got {self.term_count}")
