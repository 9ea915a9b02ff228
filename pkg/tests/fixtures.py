"""Synthetic runs, qrels and side input files for the tests."""

import os
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import ujson

from qppm.dataclasses.matrices import EffectivenessMatrix, PredictionMatrix
from qppm.dataclasses.run_data import RankedList
from qppm.dataclasses.specs import MetricKind, MetricSpec, PredictorId, PredictorSpec

AP50 = MetricSpec(MetricKind.AP, 50)
NDCG10 = MetricSpec(MetricKind.NDCG, 10)
DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

# Designed dataset: 6 queries x 4 rankers, one relevant document per query.
DESIGNED_QUERIES = [f"q{i + 1}" for i in range(6)]
DESIGNED_RANKERS = [f"r{j + 1}" for j in range(4)]
DESIGNED_LIST_LENGTH = 24


def ranked_list(scores: Sequence[float], query_id: str = "q1", ranker_id: str = "r1") -> RankedList:
    """Ranked list with documents d0, d1, ... in the given score order."""

    return RankedList.from_scored(query_id, ranker_id, [(f"d{i}", float(s), "t") for i, s in enumerate(scores)])


def effectiveness(values: Any, metric: MetricSpec = AP50) -> EffectivenessMatrix:
    array = np.asarray(values, dtype=np.float64)
    queries = tuple(f"q{i}" for i in range(array.shape[0]))
    rankers = tuple(f"r{j}" for j in range(array.shape[1]))
    return EffectivenessMatrix(queries, rankers, array, metric)


def prediction(values: Any, name: str, queries: Optional[Tuple[str, ...]] = None) -> PredictionMatrix:
    array = np.asarray(values, dtype=np.float64)
    queries = queries or tuple(f"q{i}" for i in range(array.shape[0]))
    rankers = tuple(f"r{j}" for j in range(array.shape[1]))
    spec = PredictorSpec(PredictorId.EXTERNAL, external_source=name)
    return PredictionMatrix(queries, rankers, array, spec, name)


def run_text(lists: Mapping[str, Sequence[Tuple[str, float]]], tag: str = "run") -> str:
    """TREC run lines of {query_id: [(doc_id, score), ...]}, ranks numbered in the given order."""

    lines = []
    for query_id, docs in lists.items():
        for rank, (doc_id, score) in enumerate(docs, start=1):
            lines.append(f"{query_id} Q0 {doc_id} {rank} {score!r} {tag}")
    return "\n".join(lines) + "\n"


def read_data(*parts: str) -> str:
    with open(os.path.join(DATA_DIR, *parts), "r", encoding="utf-8") as f:
        return f.read()


def write(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def designed_rank(i: int, j: int) -> int:
    """Rank of the relevant document of query i in the list of ranker j, all 24 ranks are distinct."""

    return DESIGNED_LIST_LENGTH - (4 * i + j)


def designed_ap(i: int, j: int) -> float:
    return 1.0 / designed_rank(i, j)


def designed_predictions() -> Dict[str, Dict[Tuple[str, str], float]]:
    """Predictor "ident" equal to AP@50, "A" following the queries and "B" following the rankers."""

    ident, a, b = {}, {}, {}
    for i, query_id in enumerate(DESIGNED_QUERIES):
        for j, ranker_id in enumerate(DESIGNED_RANKERS):
            ident[(query_id, ranker_id)] = designed_ap(i, j)
            a[(query_id, ranker_id)] = 10.0 * i + (3 - j)
            b[(query_id, ranker_id)] = 10.0 * j + (5 - i)
    return {"ident": ident, "A": a, "B": b}


def designed_matrices() -> Tuple[EffectivenessMatrix, List[PredictionMatrix]]:
    """AP@50 and the three designed predictors in memory, axes named q0.. and r0.."""

    rows = range(len(DESIGNED_QUERIES))
    mu = effectiveness([[designed_ap(i, j) for j in range(len(DESIGNED_RANKERS))] for i in rows])
    phis = [
        prediction([[values[(q, r)] for r in DESIGNED_RANKERS] for q in DESIGNED_QUERIES], name)
        for name, values in designed_predictions().items()
    ]
    return mu, phis


def prediction_text(values: Mapping[Tuple[str, str], float]) -> str:
    lines = ["qid\tranker\tscore"] + [f"{q}\t{r}\t{v!r}" for (q, r), v in sorted(values.items())]
    return "\n".join(lines) + "\n"


def write_designed_dataset(
    directory: str, predictors: Optional[List[Any]] = None, **config: Any
) -> str:
    """Write runs, qrels, external predictions and a config of the designed dataset.

    Args:
        directory (str): Target directory.
        predictors (List[Any], optional): Config predictor entries, default are the three external predictors.
        **config: Additional config keys.

    Returns:
        Path of the config file.
    """

    runs = {}
    for j, ranker_id in enumerate(DESIGNED_RANKERS):
        lists = {}
        for i, query_id in enumerate(DESIGNED_QUERIES):
            fillers = iter(f"d{n:02d}" for n in range(1, DESIGNED_LIST_LENGTH))
            docs = [
                ("rel" if position == designed_rank(i, j) else next(fillers), 100.0 - position)
                for position in range(1, DESIGNED_LIST_LENGTH + 1)
            ]
            lists[query_id] = docs
        runs[ranker_id] = write(os.path.join(directory, f"{ranker_id}.run"), run_text(lists, ranker_id))

    qrels = "".join(f"{q} 0 rel 2\n{q} 0 d01 0\n" for q in DESIGNED_QUERIES)
    write(os.path.join(directory, "qrels.txt"), qrels)
    external = {}
    for name, values in designed_predictions().items():
        external[name] = write(os.path.join(directory, f"{name}.tsv"), prediction_text(values))

    document: Dict[str, Any] = {
        "runs": {ranker_id: os.path.basename(path) for ranker_id, path in runs.items()},
        "qrels": "qrels.txt",
        "metrics": ["ap@50"],
        "predictors": predictors
        if predictors is not None
        else [{"name": name, "spec": f"external:file={name}"} for name in ("ident", "A", "B")],
        "external": {name: os.path.basename(path) for name, path in external.items()},
    }
    document.update(config)
    return write(os.path.join(directory, "config.json"), ujson.dumps(document, indent=2))


def write_synthetic_workload(
    directory: str,
    n_queries: int = 5,
    n_rankers: int = 3,
    list_length: int = 20,
    predictors: Sequence[Any] = ("nqc", "wig", "sigma_max"),
    metrics: Sequence[str] = ("ap@50", "ndcg@10"),
    seed: int = 7,
    **config: Any,
) -> str:
    """Write a random but seeded workload with embeddings, query metadata and collection scores.

    Every query q has a variant "<q>v" retrieved by all rankers and listed in the query metadata. A `queries=None`
    override leaves the query list out of the config.

    Returns:
        Path of the config file.
    """

    rng = np.random.default_rng(seed)
    pool = [f"doc{n:03d}" for n in range(list_length + 10)]
    queries = [f"q{i:03d}" for i in range(n_queries)]
    rankers = [f"ranker{j}" for j in range(n_rankers)]

    runs = {}
    for ranker_id in rankers:
        lists = {}
        for query_id in queries + [f"{q}v" for q in queries]:
            docs = rng.choice(pool, size=list_length, replace=False)
            scores = np.sort(rng.uniform(1.0, 20.0, size=list_length))[::-1]
            lists[query_id] = [(str(doc), float(score)) for doc, score in zip(docs, scores)]
        runs[ranker_id] = write(os.path.join(directory, f"{ranker_id}.run"), run_text(lists, ranker_id))

    qrels = []
    for query_id in queries:
        grades = rng.integers(0, 3, size=len(pool))
        grades[0] = 2
        qrels += [f"{query_id} 0 {doc} {grade}" for doc, grade in zip(pool, grades)]
    write(os.path.join(directory, "qrels.txt"), "\n".join(qrels) + "\n")

    vectors = rng.normal(size=(len(pool), 4))
    write(
        os.path.join(directory, "embeddings.tsv"),
        "".join(f"{doc}\t{','.join(repr(float(v)) for v in vector)}\n" for doc, vector in zip(pool, vectors)),
    )
    write(os.path.join(directory, "query_meta.tsv"), "".join(f"{q}\t3\t{q}v\n" for q in queries))
    write(os.path.join(directory, "collection.tsv"), "".join(f"{q}\t{rng.uniform(1.0, 5.0)!r}\n" for q in queries))

    document: Dict[str, Any] = {
        "runs": {ranker_id: os.path.basename(path) for ranker_id, path in runs.items()},
        "qrels": "qrels.txt",
        "queries": queries,
        "metrics": list(metrics),
        "predictors": list(predictors),
        "embeddings": "embeddings.tsv",
        "query_meta": "query_meta.tsv",
        "collection_scores": "collection.tsv",
    }
    document.update(config)
    document = {key: value for key, value in document.items() if value is not None}
    return write(os.path.join(directory, "config.json"), ujson.dumps(document, indent=2))
