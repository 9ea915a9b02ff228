"""Orchestration of the evaluation: parse, validate, score, predict, evaluate and test for significance."""

import csv
import hashlib
import io
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import ujson

from qppm.config import EvalConfig
from qppm.dataclasses.matrices import EffectivenessMatrix, PredictionMatrix
from qppm.dataclasses.results import EvaluationSummary, Measure, RoutingResult, SignificanceMatrix
from qppm.dataclasses.run_data import JudgmentSet, RankedList, RunMatrix
from qppm.defaults import TOOL_VERSION
from qppm.eval_framework import evaluate_all
from qppm.exceptions import StageError
from qppm.ir_metrics import effectiveness_matrix
from qppm.qpp_predictors import SideInputs, build_prediction_matrix
from qppm.report import ReportBundle, build_unit_dump, bundle_hash
from qppm.routing import route_queries
from qppm.significance_stats import significance_matrix, unit_vectors
from qppm.trec_io import (
    assemble_run_matrix,
    parse_collection_scores,
    parse_embeddings,
    parse_prediction_file,
    parse_qrels,
    parse_query_meta,
    parse_run_file,
)
from qppm.utils.stage_timer import StageTimer

logger = logging.getLogger(__name__)


@dataclass
class PipelineInputs:
    """Parsed and validated inputs of one evaluation."""

    run_matrix: RunMatrix
    judgments: JudgmentSet
    side: SideInputs = field(default_factory=SideInputs)


@contextmanager
def pipeline_stage(timer: StageTimer, stage: str) -> Iterator[None]:
    """Time a stage and tag any failure inside it with the stage name.

    Raises:
        StageError: Wraps the original exception.
    """

    with timer.stage(stage):
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            logger.debug(f"Stage '{stage}' failed: {e!r}")
            raise StageError(stage, e) from e


def config_hash(config: EvalConfig) -> str:
    """SHA-256 of the canonical config JSON."""

    return hashlib.sha256(bytes(ujson.dumps(config.to_dict(), sort_keys=True), "utf-8")).hexdigest()


def load_inputs(config: EvalConfig, timer: Optional[StageTimer] = None) -> PipelineInputs:
    """Parse every input file of the config and assemble the run matrix.

    Raises:
        StageError: Failure in the "parse" or the "validate" stage.
    """

    timer = timer if timer is not None else StageTimer()
    with pipeline_stage(timer, "parse"):
        per_ranker: Dict[str, Dict[str, RankedList]] = {
            ranker_id: parse_run_file(config.resolve(path), ranker_id) for ranker_id, path in config.runs.items()
        }
        judgments = parse_qrels(config.resolve(config.qrels))
        side = SideInputs(smv_shift=config.smv_shift)
        if config.embeddings is not None:
            side.embeddings = parse_embeddings(config.resolve(config.embeddings))
        if config.query_meta is not None:
            side.query_meta = parse_query_meta(config.resolve(config.query_meta))
        if config.collection_scores is not None:
            side.collection_scores = parse_collection_scores(config.resolve(config.collection_scores))
        side.external = {
            file_id: parse_prediction_file(config.resolve(path), file_id) for file_id, path in config.external.items()
        }

    with pipeline_stage(timer, "validate"):
        variant_only = {v for meta in side.query_meta.values() for v in meta.variants} - set(side.query_meta)
        run_matrix = assemble_run_matrix(per_ranker, config.queries, list(config.runs), config.policy, variant_only)
        judged = set(judgments.query_ids())
        unjudged = [q for q in run_matrix.queries if q not in judged]
        if unjudged:
            logger.warning(f"{len(unjudged)} queries have no judged document: {', '.join(unjudged)}")
    return PipelineInputs(run_matrix, judgments, side)


def compute_effectiveness(
    config: EvalConfig, inputs: PipelineInputs, timer: Optional[StageTimer] = None
) -> List[EffectivenessMatrix]:
    """One effectiveness matrix per configured metric, in config order."""

    timer = timer if timer is not None else StageTimer()
    with pipeline_stage(timer, "metrics"):
        return [
            effectiveness_matrix(inputs.run_matrix, inputs.judgments, metric, config.workers)
            for metric in config.metrics
        ]


def compute_predictions(
    config: EvalConfig, inputs: PipelineInputs, timer: Optional[StageTimer] = None
) -> List[PredictionMatrix]:
    """One prediction matrix per configured predictor, in config order."""

    timer = timer if timer is not None else StageTimer()
    with pipeline_stage(timer, "predict"):
        return [
            build_prediction_matrix(
                inputs.run_matrix, predictor.spec, inputs.side, config.seed, predictor.name, config.workers
            )
            for predictor in config.predictors
        ]


def _significance(
    config: EvalConfig, summaries: List[EvaluationSummary]
) -> Dict[Tuple[str, Measure], SignificanceMatrix]:
    matrices = {}
    for summary in summaries:
        for measure in (Measure.SRMQ, Measure.MRSQ):
            _, vectors = unit_vectors(summary.results, measure)
            matrices[(summary.metric, measure)] = significance_matrix(vectors, config.alpha, config.bonferroni)
    return matrices


def run_pipeline(config: EvalConfig, time_function: Optional[Callable[[], float]] = None) -> ReportBundle:
    """Run the full evaluation of a config.

    Args:
        config (EvalConfig): Validated config.
        time_function (Callable[[], float], optional): Clock of the stage timer.

    Raises:
        StageError: A stage failed, the original exception is its cause.

    Returns:
        Report bundle, identical for identical config, inputs and seed (stage timings aside).
    """

    timer = StageTimer() if time_function is None else StageTimer(time_function=time_function)
    inputs = load_inputs(config, timer)
    mus = compute_effectiveness(config, inputs, timer)
    phis = compute_predictions(config, inputs, timer)

    with pipeline_stage(timer, "evaluate"):
        summaries = [evaluate_all(mu, phis, config.tau, config.workers) for mu in mus]
        routing: List[RoutingResult] = [route_queries(mu, phi) for mu in mus for phi in phis]

    with pipeline_stage(timer, "significance"):
        significance = _significance(config, summaries)

    with pipeline_stage(timer, "render"):
        bundle = ReportBundle(
            summaries=summaries,
            significance=significance,
            routing=routing,
            dump=build_unit_dump(summaries, config.alpha, config.bonferroni, config.seed),
            provenance={
                "config_sha256": config_hash(config),
                "seed": config.seed,
                "tool_version": TOOL_VERSION,
            },
        )
        bundle.provenance["bundle_sha256"] = bundle_hash(bundle)
    bundle.timings = timer.get_statistics()
    logger.info(f"Pipeline finished in {timer.total():.3f} s, bundle {bundle.provenance['bundle_sha256'][:12]}")
    return bundle


def effectiveness_csv(mu: EffectivenessMatrix) -> bytes:
    """Effectiveness matrix as CSV "query,ranker,value" with repr-exact values."""

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["query", "ranker", "value"])
    for query_id in mu.queries:
        for ranker_id in mu.rankers:
            writer.writerow([query_id, ranker_id, repr(mu.value(query_id, ranker_id))])
    return buffer.getvalue().encode("utf-8")


def prediction_tsv(phi: PredictionMatrix) -> bytes:
    """Prediction matrix in the external prediction format, re-ingestible with parse_prediction_file()."""

    lines = ["qid\tranker\tscore"]
    for query_id in phi.queries:
        for ranker_id in phi.rankers:
            lines.append(f"{query_id}\t{ranker_id}\t{phi.value(query_id, ranker_id)!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")
