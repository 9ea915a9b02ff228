"""Rendering of evaluation results as CSV, markdown and LaTeX tables, and the per-unit τ dump."""

import csv
import hashlib
import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import ujson
from lz4.frame import compress, decompress

from qppm.dataclasses.results import (
    EvaluationSummary,
    Measure,
    RoutingResult,
    SignificanceMatrix,
    TauResult,
)
from qppm.dataclasses.specs import DumpFormat, ReportFormat
from qppm.exceptions import ValidationError
from qppm.significance_stats import unit_vectors

logger = logging.getLogger(__name__)

MAIN_HEADER = ["predictor", "metric", "srmq", "mrsq", "mrmq", "f1"]
MAIN_MEASURES = (Measure.SRMQ, Measure.MRSQ, Measure.MRMQ, Measure.F1)

# LZ4 frame magic number, little endian.
_LZ4_MAGIC = b"\x04\x22\x4d\x18"

_LATEX_SPECIAL = {"&": r"\&", "%": r"\%", "$": r"\$", "#": r"\#", "_": r"\_", "{": r"\{", "}": r"\}"}


def format_value(value: Union[TauResult, float], decimals: int = 4) -> str:
    """Fixed-point rendering, undefined values as "n/a(reason)"."""

    if isinstance(value, TauResult):
        if not value.defined:
            return f"n/a({value.reason})"
        value = value.value
    if math.isnan(value):
        return "n/a"
    text = f"{value:.{decimals}f}"
    # no negative zero
    if float(text) == 0.0:
        text = f"{0.0:.{decimals}f}"
    return text


def _latex_escape(text: str) -> str:
    return "".join(_LATEX_SPECIAL.get(char, char) for char in text)


def render_grid(
    header: Sequence[str], rows: Sequence[Sequence[str]], fmt: ReportFormat, escaped: bool = False
) -> str:
    """Render a table of formatted cells.

    Args:
        escaped (bool): LaTeX cells are already escaped (and may hold markup). Default is False.
    """

    if fmt is ReportFormat.CSV:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buffer.getvalue()
    if fmt is ReportFormat.MARKDOWN:
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if not escaped:
        header = [_latex_escape(cell) for cell in header]
        rows = [[_latex_escape(cell) for cell in row] for row in rows]
    lines = [r"\begin{tabular}{" + "l" * len(header) + "}", r"\hline", " & ".join(header) + r" \\", r"\hline"]
    lines += [" & ".join(row) + r" \\" for row in rows]
    lines += [r"\hline", r"\end{tabular}"]
    return "\n".join(lines) + "\n"


def _mark(text: str, fmt: ReportFormat, bold: bool, underline: bool) -> str:
    if fmt is ReportFormat.MARKDOWN:
        return f"**{text}**" if bold else text
    if fmt is ReportFormat.LATEX:
        text = _latex_escape(text)
        if underline:
            text = rf"\underline{{{text}}}"
        return rf"\textbf{{{text}}}" if bold else text
    return text


@dataclass
class ReportBundle:
    """All tables of one evaluation.

    Args:
        summaries (List[EvaluationSummary]): One summary per target metric, in config order.
        significance (Dict[Tuple[str, Measure], SignificanceMatrix]): Matrix per (metric label, measure).
        routing (List[RoutingResult]): Query routing per (metric, predictor).
        dump (Dict[str, Any]): Per-unit τ dump.
        provenance (Dict[str, Any]): Config hash, seed and tool version.
        timings (Dict[str, Any]): Stage durations, never rendered.
    """

    summaries: List[EvaluationSummary]
    significance: Dict[Tuple[str, Measure], SignificanceMatrix] = field(default_factory=dict)
    routing: List[RoutingResult] = field(default_factory=list)
    dump: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, Any] = field(default_factory=dict)


def render_table(bundle: ReportBundle, fmt: ReportFormat = ReportFormat.CSV) -> bytes:
    """Main table, one row per (metric, predictor) with the four measures as columns.

    Markdown and LaTeX mark the best predictor of every column in bold, LaTeX also underlines the measure each
    predictor does best on.
    """

    rows = []
    for summary in bundle.summaries:
        for result in summary.results:
            row = [_mark(result.predictor_id, fmt, False, False), _mark(summary.metric, fmt, False, False)]
            for measure in MAIN_MEASURES:
                row.append(
                    _mark(
                        format_value(result.measure(measure)),
                        fmt,
                        result.predictor_id in summary.best_per_measure.get(measure, ()),
                        summary.best_measure_per_predictor.get(result.predictor_id) is measure,
                    )
                )
            rows.append(row)
    return render_grid(MAIN_HEADER, rows, fmt, escaped=True).encode("utf-8")


def _significance_token(matrix: SignificanceMatrix, a: str, b: str, fmt: ReportFormat) -> str:
    cell = matrix.cell(a, b)
    token = cell.direction.value
    if fmt is ReportFormat.LATEX:
        token = f"${token}$"
    return token + ("*" if cell.significant else "")


def render_significance(matrix: SignificanceMatrix, fmt: ReportFormat = ReportFormat.CSV) -> bytes:
    """Significance matrix.

    CSV is long-form "a,b,direction,p,significant". Markdown and LaTeX render an upper-triangular grid whose cell
    holds ">" (row better), "<" (column better) or "=", suffixed "*" when significant.
    """

    predictors = list(matrix.predictors)
    if fmt is ReportFormat.CSV:
        rows = []
        for (a, b), cell in matrix.cells.items():
            p = "n/a" if math.isnan(cell.p_value) else f"{cell.p_value:.6f}"
            rows.append([a, b, cell.direction.value, p, "true" if cell.significant else "false"])
        return render_grid(["a", "b", "direction", "p", "significant"], rows, fmt).encode("utf-8")

    grid = []
    for i, a in enumerate(predictors):
        row = [_mark(a, fmt, False, False)]
        for j, b in enumerate(predictors):
            row.append(_significance_token(matrix, a, b, fmt) if j > i else "")
        grid.append(row)
    header = [""] + [_mark(b, fmt, False, False) for b in predictors]
    return render_grid(header, grid, fmt, escaped=True).encode("utf-8")


def render_cross_measure(summaries: Sequence[EvaluationSummary], fmt: ReportFormat = ReportFormat.CSV) -> bytes:
    """τ between the per-predictor vectors of every pair of measures."""

    rows = [
        [summary.metric, a.value, b.value, format_value(tau)]
        for summary in summaries
        for (a, b), tau in summary.cross_measure.items()
    ]
    return render_grid(["metric", "measure_a", "measure_b", "tau"], rows, fmt).encode("utf-8")


def render_discriminativeness(
    summaries: Sequence[EvaluationSummary], fmt: ReportFormat = ReportFormat.CSV
) -> bytes:
    """Standard deviation of every measure across predictors."""

    undefined = TauResult.undefined("singleton")
    rows = [
        [summary.metric] + [format_value(summary.discriminativeness.get(m, undefined)) for m in MAIN_MEASURES]
        for summary in summaries
    ]
    return render_grid(["metric"] + [m.value for m in MAIN_MEASURES], rows, fmt).encode("utf-8")


def render_routing(routing: Sequence[RoutingResult], fmt: ReportFormat = ReportFormat.CSV) -> bytes:
    """Mean μ of query routing by each predictor next to the best fixed ranker and the oracle."""

    rows = [
        [
            route.predictor_id,
            route.metric,
            format_value(route.routed_mean),
            route.best_fixed_ranker,
            format_value(route.best_fixed_mean),
            format_value(route.oracle_mean),
        ]
        for route in routing
    ]
    header = ["predictor", "metric", "routed", "best_fixed_ranker", "best_fixed", "oracle"]
    return render_grid(header, rows, fmt).encode("utf-8")


def render_unit_summaries(summaries: Sequence[EvaluationSummary], fmt: ReportFormat = ReportFormat.CSV) -> bytes:
    """Quartiles of the per-ranker (srmq) and per-query (mrsq) τ values of every predictor."""

    rows = []
    for summary in summaries:
        for (predictor_id, measure), stats in summary.unit_summaries.items():
            values = [stats.minimum, stats.lower_quartile, stats.median, stats.upper_quartile, stats.maximum]
            cells = [predictor_id, summary.metric, measure.value, str(stats.count)]
            rows.append(cells + [format_value(v) for v in values])
    header = ["predictor", "metric", "measure", "count", "min", "q1", "median", "q3", "max"]
    return render_grid(header, rows, fmt).encode("utf-8")


def build_unit_dump(
    summaries: Sequence[EvaluationSummary], alpha: float, bonferroni: bool, seed: Optional[int] = None
) -> Dict[str, Any]:
    """Per-unit τ vectors of every metric, measure and predictor, null for undefined units."""

    metrics: Dict[str, Any] = {}
    for summary in summaries:
        blocks = {}
        for measure in (Measure.SRMQ, Measure.MRSQ):
            units, vectors = unit_vectors(summary.results, measure)
            blocks[measure.value] = {
                "units": units,
                "predictors": list(vectors),
                "taus": {
                    predictor_id: [None if math.isnan(v) else v for v in values]
                    for predictor_id, values in vectors.items()
                },
            }
        metrics[summary.metric] = blocks
    return {"alpha": alpha, "bonferroni": bonferroni, "seed": seed, "metrics": metrics}


def encode_dump(dump: Dict[str, Any], fmt: DumpFormat = DumpFormat.JSON) -> bytes:
    data = bytes(ujson.dumps(dump, indent=2), "utf-8")
    if fmt is DumpFormat.JSON_LZ4:
        return compress(data)
    return data


def decode_dump(data: bytes) -> Dict[str, Any]:
    """Decode a JSON or LZ4 compressed JSON dump.

    Raises:
        ValidationError: Data is neither.
    """

    try:
        if data[:4] == _LZ4_MAGIC:
            data = decompress(data)
        dump: Dict[str, Any] = ujson.loads(data)
    except (ValueError, RuntimeError) as e:
        raise ValidationError(f"Cannot decode per-unit τ dump: {e}") from e
    if not isinstance(dump, dict):
        raise ValidationError("Per-unit τ dump must be a JSON object")
    return dump


def load_dump(path: str) -> Dict[str, Any]:
    with open(path, "rb") as f:
        return decode_dump(f.read())


def file_label(label: str) -> str:
    return label.replace(":", "_").replace("=", "")


def bundle_files(
    bundle: ReportBundle, formats: Sequence[ReportFormat], dump_format: DumpFormat = DumpFormat.JSON
) -> Dict[str, bytes]:
    """File name to content of every report file, the provenance file excluded."""

    files: Dict[str, bytes] = {}
    for fmt in formats:
        ext = fmt.extension
        files[f"main.{ext}"] = render_table(bundle, fmt)
        for (label, measure), matrix in bundle.significance.items():
            files[f"significance_{measure.value}_{file_label(label)}.{ext}"] = render_significance(matrix, fmt)
        files[f"cross_measure.{ext}"] = render_cross_measure(bundle.summaries, fmt)
        files[f"discriminativeness.{ext}"] = render_discriminativeness(bundle.summaries, fmt)
        files[f"routing.{ext}"] = render_routing(bundle.routing, fmt)
        files[f"unit_summary.{ext}"] = render_unit_summaries(bundle.summaries, fmt)
    dump_name = "per_unit_tau.json.lz4" if dump_format is DumpFormat.JSON_LZ4 else "per_unit_tau.json"
    files[dump_name] = encode_dump(bundle.dump, dump_format)
    return files


def bundle_hash(bundle: ReportBundle) -> str:
    """SHA-256 over the CSV main table, the CSV significance tables and the JSON dump."""

    digest = hashlib.sha256()
    digest.update(render_table(bundle, ReportFormat.CSV))
    for key in sorted(bundle.significance, key=lambda k: (k[0], k[1].value)):
        digest.update(render_significance(bundle.significance[key], ReportFormat.CSV))
    digest.update(encode_dump(bundle.dump, DumpFormat.JSON))
    return digest.hexdigest()


def write_bundle(
    bundle: ReportBundle,
    output_dir: str,
    formats: Sequence[ReportFormat] = (ReportFormat.CSV,),
    dump_format: DumpFormat = DumpFormat.JSON,
) -> List[str]:
    """Write all report files and provenance.json to the output directory.

    Returns:
        Written paths.
    """

    os.makedirs(output_dir, exist_ok=True)
    files = bundle_files(bundle, formats, dump_format)
    files["provenance.json"] = bytes(ujson.dumps(bundle.provenance, indent=2), "utf-8")
    paths = []
    for name, content in files.items():
        path = os.path.join(output_dir, name)
        with open(path, "wb") as f:
            f.write(content)
        paths.append(path)
    logger.info(f"Wrote {len(paths)} report files to {output_dir}")
    return paths
