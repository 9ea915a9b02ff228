"""Parsers and validators for TREC runs, qrels, prediction, embedding, query metadata and collection score files."""

import io
import logging
import math
import os
from collections import defaultdict
from typing import IO, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from qppm.dataclasses.run_data import (
    CellKey,
    EmbeddingTable,
    ExternalPredictions,
    JudgmentSet,
    MissingCellPolicy,
    QueryMeta,
    RankedList,
    RunMatrix,
)
from qppm.exceptions import ConfigurationError, ParseError, ValidationError

logger = logging.getLogger(__name__)

Source = Union[str, "os.PathLike[str]", bytes, IO[str], IO[bytes]]

# Number of missing cells quoted in coverage errors.
MAX_REPORTED_CELLS = 10


def _source_name(source: Source) -> str:
    if isinstance(source, (str, os.PathLike)):
        return str(source)
    return str(getattr(source, "name", "<stream>"))


def _iter_lines(source: Source) -> Iterator[Tuple[int, str]]:
    """Yield (1-based line number, line without the line terminator) of a path, bytes or a text/byte stream."""

    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            yield from _iter_lines(f)
        return
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    for line_no, line in enumerate(source, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ParseError(f"invalid UTF-8 ({e.reason})", _source_name(source), line_no) from None
        yield line_no, line.rstrip("\r\n")


def _parse_float(text: str, what: str, name: str, line_no: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{what} is not a number: '{text}'", name, line_no) from None


def _parse_int(text: str, what: str, name: str, line_no: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{what} is not an integer: '{text}'", name, line_no) from None


def _iter_tsv(source: Source, header_prefix: Optional[str] = None) -> Iterator[Tuple[int, List[str]]]:
    """Yield tab-separated fields of non-empty lines, skipping a leading header line."""

    first = True
    for line_no, line in _iter_lines(source):
        if not line.strip():
            continue
        if first and header_prefix is not None and line.startswith(header_prefix):
            first = False
            continue
        first = False
        yield line_no, line.split("\t")


def parse_run_file(source: Source, ranker_id: str) -> Dict[str, RankedList]:
    """Parse a 6-column TREC run file.

    The rank column is advisory: entries are re-sorted by descending score (ties by ascending doc_id) and renumbered.

    Args:
        source (Source): Path, bytes or stream with lines "qid Q0 docid rank score tag".
        ranker_id (str): Id of the ranker which produced the run.

    Raises:
        ParseError: Line with other than 6 fields or a non-numeric rank or score.
        ValidationError: Duplicate (qid, docid) pair or non-finite score.

    Returns:
        Ranked list of every query in the run.
    """

    name = _source_name(source)
    rows: Dict[str, List[Tuple[str, float, str]]] = defaultdict(list)
    seen: Dict[CellKey, int] = {}
    for line_no, line in _iter_lines(source):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", name, line_no)
        query_id, _, doc_id, rank_text, score_text, tag = fields
        _parse_int(rank_text, "rank", name, line_no)
        score = _parse_float(score_text, "score", name, line_no)
        if not math.isfinite(score):
            raise ValidationError(f"{name}:{line_no}: score of ({query_id}, {doc_id}) is not finite")
        if (query_id, doc_id) in seen:
            raise ValidationError(
                f"{name}:{line_no}: duplicate (query, doc) pair ({query_id}, {doc_id}), "
                f"first seen at line {seen[(query_id, doc_id)]}"
            )
        seen[(query_id, doc_id)] = line_no
        rows[query_id].append((doc_id, score, tag))

    lists = {query_id: RankedList.from_scored(query_id, ranker_id, query_rows) for query_id, query_rows in rows.items()}
    logger.info(f"Parsed run '{ranker_id}' from {name}: {len(lists)} queries, {len(seen)} entries")
    return lists


def serialize_run(lists: Iterable[RankedList]) -> str:
    """Write ranked lists in the 6-column TREC run format, scores are written exactly (repr)."""

    lines = []
    for ranked in sorted(lists, key=lambda ranked_list: ranked_list.query_id):
        for entry in ranked.entries:
            lines.append(f"{entry.query_id} Q0 {entry.doc_id} {entry.rank} {entry.score!r} {entry.tag}\n")
    return "".join(lines)


def parse_qrels(source: Source) -> JudgmentSet:
    """Parse a 4-column qrels file "qid iteration docid grade".

    Repeated (qid, docid) judgments keep the last occurrence and log a warning.

    Raises:
        ParseError: Malformed line.
        ValidationError: Negative grade.
    """

    name = _source_name(source)
    grades: Dict[CellKey, int] = {}
    for line_no, line in _iter_lines(source):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", name, line_no)
        query_id, _, doc_id, grade_text = fields
        grade = _parse_int(grade_text, "grade", name, line_no)
        if grade < 0:
            raise ValidationError(f"{name}:{line_no}: negative grade {grade} for ({query_id}, {doc_id})")
        if (query_id, doc_id) in grades:
            logger.warning(
                f"{name}:{line_no}: repeated judgment for ({query_id}, {doc_id}), "
                f"grade {grades[(query_id, doc_id)]} replaced by {grade}"
            )
        grades[(query_id, doc_id)] = grade

    judgments = JudgmentSet(grades)
    logger.info(f"Parsed qrels from {name}: {len(judgments)} judgments, {len(judgments.query_ids())} queries")
    return judgments


def parse_prediction_file(source: Source, predictor_id: str) -> ExternalPredictions:
    """Parse precomputed predictions, TSV lines "qid<TAB>ranker_id<TAB>score" with an optional "qid..." header.

    Raises:
        ParseError: Line with other than 3 fields or a non-numeric score.
        ValidationError: Non-finite score or duplicate (qid, ranker_id).
    """

    name = _source_name(source)
    values: Dict[CellKey, float] = {}
    for line_no, fields in _iter_tsv(source, header_prefix="qid"):
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", name, line_no)
        query_id, ranker_id, score_text = fields
        score = _parse_float(score_text, "score", name, line_no)
        if not math.isfinite(score):
            raise ValidationError(f"{name}:{line_no}: prediction for ({query_id}, {ranker_id}) is not finite")
        if (query_id, ranker_id) in values:
            raise ValidationError(f"{name}:{line_no}: duplicate prediction for ({query_id}, {ranker_id})")
        values[(query_id, ranker_id)] = score

    logger.info(f"Parsed {len(values)} predictions of '{predictor_id}' from {name}")
    return ExternalPredictions(predictor_id, values)


def check_prediction_coverage(predictions: ExternalPredictions, run_matrix: RunMatrix) -> ExternalPredictions:
    """Restrict external predictions to the cells of a run matrix.

    Raises:
        ValidationError: Some cell of the matrix has no prediction (the first missing cells are listed).

    Returns:
        Predictions of exactly the matrix cells.
    """

    missing = [key for key in run_matrix.lists if key not in predictions.values]
    if missing:
        listed = ", ".join(f"({q}, {r})" for q, r in sorted(missing)[:MAX_REPORTED_CELLS])
        raise ValidationError(
            f"Predictions of '{predictions.predictor_id}' miss {len(missing)} of {len(run_matrix.lists)} cells: "
            f"{listed}"
        )
    extra = len(predictions.values) - len(run_matrix.lists)
    if extra > 0:
        logger.warning(f"Ignoring {extra} predictions of '{predictions.predictor_id}' outside the run matrix")
    return ExternalPredictions(predictions.predictor_id, {key: predictions.values[key] for key in run_matrix.lists})


def parse_embeddings(source: Source) -> EmbeddingTable:
    """Parse document embeddings, TSV lines "doc_id<TAB>v1,v2,...,vd".

    An empty file gives an empty table with undefined dimension.

    Raises:
        ParseError: Malformed line or non-numeric component.
        ValidationError: Ragged dimensions, non-finite component or duplicate doc_id.
    """

    name = _source_name(source)
    vectors: Dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    for line_no, fields in _iter_tsv(source):
        if len(fields) != 2:
            raise ParseError(f"expected 2 tab-separated fields, got {len(fields)}", name, line_no)
        doc_id, components = fields
        vector = np.array([_parse_float(c, "component", name, line_no) for c in components.split(",")])
        if dim is None:
            dim = len(vector)
        elif len(vector) != dim:
            raise ValidationError(f"{name}:{line_no}: vector of '{doc_id}' has dimension {len(vector)}, expected {dim}")
        if not np.all(np.isfinite(vector)):
            raise ValidationError(f"{name}:{line_no}: vector of '{doc_id}' has a non-finite component")
        if doc_id in vectors:
            raise ValidationError(f"{name}:{line_no}: duplicate vector for '{doc_id}'")
        vectors[doc_id] = vector

    logger.info(f"Parsed {len(vectors)} embeddings of dimension {dim} from {name}")
    return EmbeddingTable(vectors, dim)


def parse_query_meta(source: Source) -> Dict[str, QueryMeta]:
    """Parse query metadata, TSV lines "qid<TAB>term_count<TAB>variant_ids[<TAB>text]".

    term_count and variant_ids (comma-separated) may be empty, a header line starting with "qid" is skipped.

    Raises:
        ParseError: Malformed line or non-integer term count.
        ValidationError: Term count < 1 or duplicate qid.
    """

    name = _source_name(source)
    metas: Dict[str, QueryMeta] = {}
    for line_no, fields in _iter_tsv(source, header_prefix="qid"):
        if not 1 <= len(fields) <= 4:
            raise ParseError(f"expected 1 to 4 tab-separated fields, got {len(fields)}", name, line_no)
        fields += [""] * (4 - len(fields))
        query_id, count_text, variants_text, text = fields
        term_count = _parse_int(count_text, "term count", name, line_no) if count_text.strip() else None
        variants = tuple(v.strip() for v in variants_text.split(",") if v.strip())
        if query_id in metas:
            raise ValidationError(f"{name}:{line_no}: duplicate metadata for query '{query_id}'")
        try:
            metas[query_id] = QueryMeta(query_id, text or None, term_count, variants)
        except ValidationError as e:
            raise ValidationError(f"{name}:{line_no}: {e}") from e
    return metas


def parse_collection_scores(source: Source) -> Dict[str, float]:
    """Parse per-query collection scores, TSV lines "qid<TAB>score".

    Raises:
        ParseError: Malformed line.
        ValidationError: Non-finite score or duplicate qid.
    """

    name = _source_name(source)
    scores: Dict[str, float] = {}
    for line_no, fields in _iter_tsv(source, header_prefix="qid"):
        if len(fields) != 2:
            raise ParseError(f"expected 2 tab-separated fields, got {len(fields)}", name, line_no)
        query_id, score_text = fields
        score = _parse_float(score_text, "collection score", name, line_no)
        if not math.isfinite(score):
            raise ValidationError(f"{name}:{line_no}: collection score of '{query_id}' is not finite")
        if query_id in scores:
            raise ValidationError(f"{name}:{line_no}: duplicate collection score for '{query_id}'")
        scores[query_id] = score
    return scores


def assemble_run_matrix(
    per_ranker: Mapping[str, Mapping[str, RankedList]],
    declared_queries: Optional[Sequence[str]] = None,
    declared_rankers: Optional[Sequence[str]] = None,
    policy: MissingCellPolicy = MissingCellPolicy.STRICT,
    auxiliary_queries: Iterable[str] = (),
) -> RunMatrix:
    """Assemble the (query, ranker) matrix of ranked lists.

    Both axes are ordered lexicographically. Lists of queries outside the final query axis are kept as auxiliary lists
    (they serve as query variants).

    Args:
        per_ranker (Mapping[str, Mapping[str, RankedList]]): parse_run_file() result of every ranker.
        declared_queries (Sequence[str], optional): Query set Q, default is the union of the queries of all runs.
        declared_rankers (Sequence[str], optional): Ranker set Θ, default is all parsed rankers.
        policy (MissingCellPolicy): STRICT fails on any missing cell, INTERSECT keeps the queries every ranker has.
        auxiliary_queries (Iterable[str]): Ids kept out of the default query axis (variant-only queries), ignored when
            the queries are declared.

    Raises:
        ValidationError: Missing cell under the STRICT policy.
        ConfigurationError: Empty query or ranker axis.

    Returns:
        Run matrix.
    """

    rankers = sorted(set(declared_rankers if declared_rankers is not None else per_ranker))
    if declared_queries is not None:
        queries = sorted(set(declared_queries))
    else:
        excluded = set(auxiliary_queries)
        queries = sorted({query_id for lists in per_ranker.values() for query_id in lists if query_id not in excluded})
    if not rankers:
        raise ConfigurationError("No rankers to evaluate")
    if not queries:
        raise ConfigurationError("No queries to evaluate")

    def present(query_id: str, ranker_id: str) -> bool:
        return query_id in per_ranker.get(ranker_id, {})

    missing = [(q, r) for q in queries for r in rankers if not present(q, r)]
    if missing:
        if policy is MissingCellPolicy.STRICT:
            listed = ", ".join(f"({q}, {r})" for q, r in missing[:MAX_REPORTED_CELLS])
            raise ValidationError(f"{len(missing)} (query, ranker) cells have no ranked list: {listed}")
        dropped = sorted({q for q, _ in missing})
        queries = [q for q in queries if q not in set(dropped)]
        logger.info(f"Intersect policy dropped {len(dropped)} queries missing from some runs: {', '.join(dropped)}")
        if not queries:
            raise ConfigurationError("No query is present in the runs of all rankers")

    query_set = set(queries)
    lists = {(q, r): per_ranker[r][q] for q in queries for r in rankers}
    auxiliary = {
        (q, r): ranked
        for r in rankers
        for q, ranked in per_ranker.get(r, {}).items()
        if q not in query_set
    }
    logger.info(f"Run matrix: {len(queries)} queries x {len(rankers)} rankers")
    return RunMatrix(tuple(queries), tuple(rankers), lists, auxiliary)
