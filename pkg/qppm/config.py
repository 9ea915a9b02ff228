import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import ujson

from qppm.dataclasses.run_data import MissingCellPolicy
from qppm.dataclasses.specs import DumpFormat, MetricSpec, PredictorId, PredictorSpec, ReportFormat
from qppm.defaults import DEFAULT_ALPHA, DEFAULT_OUTPUT_DIR, DEFAULT_SEED
from qppm.exceptions import ConfigurationError
from qppm.ir_metrics import parse_metric_spec
from qppm.qpp_predictors import parse_predictor_spec
from qppm.rank_correlation import TauVariant

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("runs", "qrels", "metrics", "predictors")
OPTIONAL_KEYS = (
    "queries",
    "embeddings",
    "query_meta",
    "collection_scores",
    "external",
    "policy",
    "tau",
    "alpha",
    "bonferroni",
    "seed",
    "workers",
    "output_dir",
    "formats",
    "dump_format",
    "smv_shift",
)


@dataclass(frozen=True)
class NamedPredictor:
    """Predictor spec with its display id in reports.

    Args:
        name (str): Display id, unique within a config.
        spec (PredictorSpec): Parsed spec.
        text (str): Spec string as written in the config.
    """

    name: str
    spec: PredictorSpec
    text: str


@dataclass(frozen=True)
class EvalConfig:
    """Validated evaluation configuration.

    Paths are stored as written in the config file and resolved against base_dir by resolve().
    """

    runs: Dict[str, str]
    qrels: str
    metrics: List[MetricSpec]
    predictors: List[NamedPredictor]
    queries: Optional[List[str]] = None
    embeddings: Optional[str] = None
    query_meta: Optional[str] = None
    collection_scores: Optional[str] = None
    external: Dict[str, str] = field(default_factory=dict)
    policy: MissingCellPolicy = MissingCellPolicy.STRICT
    tau: TauVariant = TauVariant.B
    alpha: float = DEFAULT_ALPHA
    bonferroni: bool = False
    seed: int = DEFAULT_SEED
    workers: int = 1
    output_dir: str = DEFAULT_OUTPUT_DIR
    formats: List[ReportFormat] = field(default_factory=lambda: [ReportFormat.CSV])
    dump_format: DumpFormat = DumpFormat.JSON
    smv_shift: bool = False
    base_dir: str = "."

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.normpath(os.path.join(self.base_dir, path))

    def input_paths(self) -> List[str]:
        """All input files the config refers to, resolved."""

        paths = list(self.runs.values()) + [self.qrels] + list(self.external.values())
        paths += [p for p in (self.embeddings, self.query_meta, self.collection_scores) if p is not None]
        return [self.resolve(p) for p in paths]

    def to_dict(self) -> Dict[str, Any]:
        """Canonical JSON-compatible form (defaults applied, paths as written), the input of the config hash."""

        return {
            "runs": dict(sorted(self.runs.items())),
            "qrels": self.qrels,
            "metrics": [m.label for m in self.metrics],
            "predictors": [{"name": p.name, "spec": p.text} for p in self.predictors],
            "queries": self.queries,
            "embeddings": self.embeddings,
            "query_meta": self.query_meta,
            "collection_scores": self.collection_scores,
            "external": dict(sorted(self.external.items())),
            "policy": self.policy.value,
            "tau": self.tau.value,
            "alpha": self.alpha,
            "bonferroni": self.bonferroni,
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
            "formats": [f.value for f in self.formats],
            "dump_format": self.dump_format.value,
            "smv_shift": self.smv_shift,
        }


def _expect(value: Any, kind: Any, key: str) -> Any:
    # bool is an int subclass, reject it where a number is expected
    if not isinstance(value, kind) or (kind in (int, float, (int, float)) and isinstance(value, bool)):
        raise ConfigurationError(f"Config key '{key}' has an invalid type: {value!r}")
    return value


def _enum(enum_type: Any, value: Any, key: str) -> Any:
    try:
        return enum_type(_expect(value, str, key))
    except ValueError:
        allowed = ", ".join(member.value for member in enum_type)
        raise ConfigurationError(f"Config key '{key}' must be one of {allowed}, got '{value}'") from None


def _string_map(value: Any, key: str) -> Dict[str, str]:
    _expect(value, dict, key)
    for item_key, item in value.items():
        _expect(item, str, f"{key}.{item_key}")
    return dict(value)


def _predictors(value: Any) -> List[NamedPredictor]:
    predictors = []
    for index, item in enumerate(_expect(value, list, "predictors")):
        if isinstance(item, str):
            name, text = item, item
        elif isinstance(item, dict):
            unknown = set(item) - {"name", "spec"}
            if unknown or "spec" not in item:
                raise ConfigurationError(f"predictors[{index}] must be a spec string or {{'name', 'spec'}} object")
            text = _expect(item["spec"], str, f"predictors[{index}].spec")
            name = _expect(item.get("name", text), str, f"predictors[{index}].name")
        else:
            raise ConfigurationError(f"predictors[{index}] must be a string or an object, got {item!r}")
        predictors.append(NamedPredictor(name, parse_predictor_spec(text), text))
    names = [p.name for p in predictors]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ConfigurationError(f"Duplicate predictor names: {', '.join(duplicates)}")
    return predictors


def config_from_dict(data: Mapping[str, Any], base_dir: str = ".", check_paths: bool = True) -> EvalConfig:
    """Validate a config document and apply defaults.

    Args:
        data (Mapping[str, Any]): Decoded JSON document.
        base_dir (str): Directory relative paths are resolved against.
        check_paths (bool): Require every referenced input file to exist.

    Raises:
        ConfigurationError: Unknown keys, missing required keys, invalid types or out-of-range values.

    Returns:
        Validated config.
    """

    if not isinstance(data, Mapping):
        raise ConfigurationError("Config must be a JSON object")
    unknown = sorted(set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {', '.join(unknown)}")
    missing = [key for key in REQUIRED_KEYS if key not in data]
    if missing:
        raise ConfigurationError(f"Missing required config keys: {', '.join(missing)}")

    runs = _string_map(data["runs"], "runs")
    if not runs:
        raise ConfigurationError("Config key 'runs' must name at least one ranker")
    metrics = [parse_metric_spec(_expect(m, str, "metrics")) for m in _expect(data["metrics"], list, "metrics")]
    if not metrics:
        raise ConfigurationError("Config key 'metrics' must list at least one metric")
    predictors = _predictors(data["predictors"])
    if not predictors:
        raise ConfigurationError("Config key 'predictors' must list at least one predictor")

    external = _string_map(data.get("external", {}), "external")
    for predictor in predictors:
        source = predictor.spec.external_source
        if predictor.spec.predictor is PredictorId.EXTERNAL and source is not None and source not in external:
            # a bare path is its own file id
            external[source] = source

    queries = data.get("queries")
    if queries is not None:
        queries = [_expect(q, str, "queries") for q in _expect(queries, list, "queries")]

    alpha = float(_expect(data.get("alpha", DEFAULT_ALPHA), (int, float), "alpha"))
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"Config key 'alpha' must be in (0, 1), got {alpha}")
    seed = _expect(data.get("seed", DEFAULT_SEED), int, "seed")
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"Config key 'seed' must be an unsigned 64-bit integer, got {seed}")
    workers = _expect(data.get("workers", 1), int, "workers")
    if workers < 1:
        raise ConfigurationError(f"Config key 'workers' must be >= 1, got {workers}")
    formats = [_enum(ReportFormat, f, "formats") for f in _expect(data.get("formats", ["csv"]), list, "formats")]
    if not formats:
        raise ConfigurationError("Config key 'formats' must list at least one format")

    config = EvalConfig(
        runs=runs,
        qrels=_expect(data["qrels"], str, "qrels"),
        metrics=metrics,
        predictors=predictors,
        queries=queries,
        embeddings=_expect(data["embeddings"], str, "embeddings") if "embeddings" in data else None,
        query_meta=_expect(data["query_meta"], str, "query_meta") if "query_meta" in data else None,
        collection_scores=(
            _expect(data["collection_scores"], str, "collection_scores") if "collection_scores" in data else None
        ),
        external=external,
        policy=_enum(MissingCellPolicy, data.get("policy", "strict"), "policy"),
        tau=_enum(TauVariant, data.get("tau", "b"), "tau"),
        alpha=alpha,
        bonferroni=_expect(data.get("bonferroni", False), bool, "bonferroni"),
        seed=seed,
        workers=workers,
        output_dir=_expect(data.get("output_dir", DEFAULT_OUTPUT_DIR), str, "output_dir"),
        formats=formats,
        dump_format=_enum(DumpFormat, data.get("dump_format", "json"), "dump_format"),
        smv_shift=_expect(data.get("smv_shift", False), bool, "smv_shift"),
        base_dir=base_dir,
    )

    if check_paths:
        absent = [path for path in config.input_paths() if not os.path.isfile(path)]
        if absent:
            raise ConfigurationError(f"Input files not found: {', '.join(absent)}")
    return config


def load_config(path: str, check_paths: bool = True) -> EvalConfig:
    """Load and validate a JSON config file, relative paths in it are relative to its directory.

    Raises:
        ConfigurationError: Unreadable or invalid config.
    """

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = ujson.load(f)
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e
    config = config_from_dict(data, os.path.dirname(os.path.abspath(path)), check_paths)
    logger.info(
        f"Loaded config {path}: {len(config.runs)} rankers, {len(config.metrics)} metrics, "
        f"{len(config.predictors)} predictors"
    )
    return config


def with_overrides(
    config: EvalConfig,
    output_dir: Optional[str] = None,
    formats: Optional[Sequence[str]] = None,
    seed: Optional[int] = None,
    alpha: Optional[float] = None,
    tau: Optional[str] = None,
    policy: Optional[str] = None,
) -> EvalConfig:
    """Apply command line overrides, None keeps the config value.

    Raises:
        ConfigurationError: Invalid override value.
    """

    data = config.to_dict()
    overrides = {
        "output_dir": output_dir,
        "formats": list(formats) if formats is not None else None,
        "seed": seed,
        "alpha": alpha,
        "tau": tau,
        "policy": policy,
    }
    data.update({key: value for key, value in overrides.items() if value is not None})
    return config_from_dict(
        {key: value for key, value in data.items() if value is not None}, config.base_dir, check_paths=False
    )
