"""Command line interface: python -m qppm.cli <validate|metrics|predict|evaluate|significance> [options]."""

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from qppm.config import EvalConfig, load_config, with_overrides
from qppm.dataclasses.specs import ReportFormat
from qppm.defaults import LOG_LEVEL, TOOL_VERSION
from qppm.exceptions import ConfigurationError, ParseError, StageError, ValidationError
from qppm.pipeline import (
    compute_effectiveness,
    compute_predictions,
    effectiveness_csv,
    load_inputs,
    prediction_tsv,
    run_pipeline,
)
from qppm.report import file_label, load_dump, render_significance, write_bundle
from qppm.significance_stats import significance_from_dump

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

_VALIDATION_ERRORS = (ParseError, ValidationError, ConfigurationError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qppm", description="Multi-ranker query performance prediction evaluation")
    parser.add_argument("--version", action="version", version=f"qppm {TOOL_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    def with_config(name: str, help_text: str) -> argparse.ArgumentParser:
        command = commands.add_parser(name, help=help_text)
        command.add_argument("--config", required=True, help="Path to the JSON config")
        command.add_argument("--out", help="Output directory, overrides output_dir")
        command.add_argument("--seed", type=int, help="Global seed, overrides seed")
        command.add_argument("--policy", choices=["strict", "intersect"], help="Missing cell policy")
        return command

    with_config("validate", "Parse and validate all inputs")
    with_config("metrics", "Write the effectiveness matrix of every metric")
    with_config("predict", "Write the prediction matrix of every predictor")
    evaluate = with_config("evaluate", "Run the full evaluation and write the report")
    evaluate.add_argument(
        "--format",
        action="append",
        choices=[f.value for f in ReportFormat],
        help="Report format, repeatable, overrides formats",
    )
    evaluate.add_argument("--alpha", type=float, help="Significance level, overrides alpha")
    evaluate.add_argument("--tau", choices=["a", "b"], help="Kendall τ variant, overrides tau")

    significance = commands.add_parser("significance", help="Re-run the significance tests from a per-unit τ dump")
    significance.add_argument("--dump", required=True, help="Path to per_unit_tau.json or per_unit_tau.json.lz4")
    significance.add_argument("--out", help="Output directory, default is the directory of the dump")
    significance.add_argument("--alpha", type=float, help="Significance level, default is the one in the dump")
    significance.add_argument("--bonferroni", action="store_true", default=None, help="Correct for multiple pairs")
    significance.add_argument(
        "--format", action="append", choices=[f.value for f in ReportFormat], help="Report format, repeatable"
    )
    return parser


def _config(args: argparse.Namespace) -> EvalConfig:
    config = load_config(args.config)
    return with_overrides(
        config,
        output_dir=os.path.abspath(args.out) if args.out is not None else None,
        formats=getattr(args, "format", None),
        seed=args.seed,
        alpha=getattr(args, "alpha", None),
        tau=getattr(args, "tau", None),
        policy=args.policy,
    )


def _write(path: str, content: bytes) -> None:
    with open(path, "wb") as f:
        f.write(content)
    logger.info(f"Wrote {path}")


def _output_dir(config: EvalConfig) -> str:
    path = config.resolve(config.output_dir)
    os.makedirs(path, exist_ok=True)
    return path


def command_validate(args: argparse.Namespace) -> None:
    config = _config(args)
    inputs = load_inputs(config)
    matrix = inputs.run_matrix
    print(
        f"OK: {len(matrix.queries)} queries x {len(matrix.rankers)} rankers, {len(inputs.judgments)} judgments, "
        f"{len(config.metrics)} metrics, {len(config.predictors)} predictors"
    )


def command_metrics(args: argparse.Namespace) -> None:
    config = _config(args)
    output_dir = _output_dir(config)
    for mu in compute_effectiveness(config, load_inputs(config)):
        _write(os.path.join(output_dir, f"effectiveness_{file_label(mu.metric.label)}.csv"), effectiveness_csv(mu))


def command_predict(args: argparse.Namespace) -> None:
    config = _config(args)
    output_dir = _output_dir(config)
    for phi in compute_predictions(config, load_inputs(config)):
        _write(os.path.join(output_dir, f"prediction_{file_label(phi.name)}.tsv"), prediction_tsv(phi))


def command_evaluate(args: argparse.Namespace) -> None:
    config = _config(args)
    bundle = run_pipeline(config)
    write_bundle(bundle, _output_dir(config), config.formats, config.dump_format)
    print(f"bundle_sha256 {bundle.provenance['bundle_sha256']}")


def command_significance(args: argparse.Namespace) -> None:
    matrices = significance_from_dump(load_dump(args.dump), args.alpha, args.bonferroni)
    output_dir = args.out if args.out is not None else os.path.dirname(os.path.abspath(args.dump))
    os.makedirs(output_dir, exist_ok=True)
    formats = [ReportFormat(f) for f in args.format] if args.format else [ReportFormat.CSV]
    for fmt in formats:
        for (label, measure), matrix in matrices.items():
            name = f"significance_{measure.value}_{file_label(label)}.{fmt.extension}"
            _write(os.path.join(output_dir, name), render_significance(matrix, fmt))


_COMMANDS = {
    "validate": command_validate,
    "metrics": command_metrics,
    "predict": command_predict,
    "evaluate": command_evaluate,
    "significance": command_significance,
}


def exit_code(error: Exception) -> int:
    """1 for invalid input or configuration, 2 for any other failure."""

    cause = error.cause if isinstance(error, StageError) else error
    return EXIT_VALIDATION if isinstance(cause, _VALIDATION_ERRORS) else EXIT_RUNTIME


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except Exception as e:
        code = exit_code(e)
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
