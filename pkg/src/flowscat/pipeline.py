"""End-to-end experiment orchestration.

Stages: ingest -> graph -> features -> encode -> detect -> report.
Every stage derives its RNG seed from the master seed hashed with the
stage name, so stages can be re-run independently and the whole
pipeline is a pure function of (dataset bytes, config). Artifacts are
written with round-trip float formatting, which makes repeated runs
byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .detectors import (
    DEFAULT_CONTAMINATIONS,
    DEFAULT_GRID,
    DETECTOR_KINDS,
    GridCell,
    grid_search,
)
from .encoder import EncoderConfig, GraphEncoder
from .errors import InvalidConfig, StageError, TooFewRows
from .graph import FlowGraph, build_graph
from .ingest import (
    FlowTable,
    ScenarioSpec,
    downsample,
    load_schema,
    make_encoder,
    parse_netflow,
    sanitize_and_normalize,
    split_scenario,
)
from .metrics import EvalReport, EvalRow
from .node2vec import Node2VecEmbedding, WalkConfig
from .scattering import ScatteringConfig, augment_edges, build_filterbank, default_pad_length

logger = logging.getLogger(__name__)

METHODS = ("steg", "n2v-egs")
STAGES = ("ingest", "graph", "features", "encode", "detect", "report")


def derive_seed(master: int, stage: str) -> int:
    """Stable per-stage seed: hash of master seed and stage name."""
    digest = hashlib.sha256(f"{master}|{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class PipelineConfig:
    dataset_path: str
    schema_path: str
    method: str = "steg"
    output_dir: str = "out"
    seed: int = 0
    scenario: dict = field(default_factory=dict)
    encoding: str = "target"
    scattering: dict = field(default_factory=dict)
    node2vec: dict = field(default_factory=dict)
    encoder: dict = field(default_factory=dict)
    detectors: dict = field(default_factory=dict)
    max_rows: int = 200_000
    full_dataset: bool = False
    dump_graph_edges: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidConfig(f"method must be one of {METHODS}, got {self.method!r}")
        if self.encoding not in ("target", "frequency"):
            raise InvalidConfig("encoding must be 'target' or 'frequency'")
        init_mode = self.encoder.get("init_mode")
        if self.method == "steg" and init_mode not in (None, "constant"):
            raise InvalidConfig(
                "method 'steg' requires constant node initialization; "
                f"got init_mode={init_mode!r}"
            )
        if self.method == "n2v-egs" and init_mode not in (None, "node2vec"):
            raise InvalidConfig(
                "method 'n2v-egs' requires node2vec initialization; "
                f"got init_mode={init_mode!r}"
            )
        kinds = self.detectors.get("kinds", list(DETECTOR_KINDS))
        unknown = [k for k in kinds if k not in DETECTOR_KINDS]
        if unknown:
            raise InvalidConfig(f"unknown detector kinds: {unknown}")
        selection = self.detectors.get("selection", "test")
        if selection not in ("test", "holdout"):
            raise InvalidConfig("detectors.selection must be 'test' or 'holdout'")

    @property
    def hidden(self) -> int:
        default = 256 if self.method == "steg" else 128
        return int(self.encoder.get("hidden", default))

    @property
    def init_mode(self) -> str:
        return "constant" if self.method == "steg" else "node2vec"

    def scenario_spec(self) -> ScenarioSpec:
        return ScenarioSpec(
            downsample_fraction=float(self.scenario.get("downsample_fraction", 0.1)),
            train_fraction=float(self.scenario.get("train_fraction", 0.7)),
            contamination=float(self.scenario.get("contamination", 0.0)),
            seed=int(self.scenario.get("seed", derive_seed(self.seed, "split"))),
        )

    def walk_config(self) -> WalkConfig:
        allowed = {f.name for f in dataclasses.fields(WalkConfig)}
        params = {k: v for k, v in self.node2vec.items() if k in allowed}
        params.setdefault("seed", derive_seed(self.seed, "node2vec"))
        return WalkConfig(**params)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path, **overrides) -> PipelineConfig:
    """Read a pipeline config from YAML and apply CLI overrides."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    dataset = raw.get("dataset", {})
    kwargs = dict(
        dataset_path=dataset.get("path", raw.get("dataset_path")),
        schema_path=dataset.get("schema", raw.get("schema_path")),
        method=raw.get("method", "steg"),
        output_dir=raw.get("output_dir", "out"),
        seed=int(raw.get("seed", 0)),
        scenario=raw.get("scenario", {}) or {},
        encoding=raw.get("encoding", "target"),
        scattering=raw.get("scattering", {}) or {},
        node2vec=raw.get("node2vec", {}) or {},
        encoder=raw.get("encoder", {}) or {},
        detectors=raw.get("detectors", {}) or {},
        max_rows=int(raw.get("max_rows", 200_000)),
        dump_graph_edges=bool(raw.get("dump_graph_edges", False)),
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if not kwargs.get("dataset_path") or not kwargs.get("schema_path"):
        raise InvalidConfig("config must provide dataset.path and dataset.schema")
    return PipelineConfig(**kwargs)


@dataclass
class PipelineResult:
    config: PipelineConfig
    out_dir: Path
    train_table: FlowTable | None = None
    test_table: FlowTable | None = None
    train_graph: FlowGraph | None = None
    test_graph: FlowGraph | None = None
    node_embeddings: dict = field(default_factory=dict)
    train_edges: np.ndarray | None = None
    test_edges: np.ndarray | None = None
    grid: dict = field(default_factory=dict)
    report: EvalReport | None = None
    report_csv: Path | None = None
    report_json: Path | None = None


def _write_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_embedding_csv(path: Path, row_ids: np.ndarray, matrix: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([row_ids.astype(np.float64), matrix])
    header = "row_index," + ",".join(f"z{i}" for i in range(matrix.shape[1]))
    fmt = ["%d"] + ["%.17g"] * matrix.shape[1]
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)


def _write_grid_csv(path: Path, cells: list[GridCell]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kind,hyperparameter,contamination,accuracy,macro_f1,"
                 "detection_rate,status,extra\n")
        for c in cells:
            fh.write(
                f"{c.kind},{c.hyperparameter},{c.contamination!r},"
                f"{c.accuracy!r},{c.macro_f1!r},{c.detection_rate!r},"
                f"{c.status},{c.extra}\n"
            )


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _stage(name):
    def decorate(fn):
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as err:
                raise StageError(name, err) from err
        return wrapper
    return decorate


@_stage("ingest")
def _run_ingest(config: PipelineConfig, result: PipelineResult) -> None:
    schema = load_schema(config.schema_path)
    table = parse_netflow(config.dataset_path, schema)
    if table.n_rows > config.max_rows and not config.full_dataset:
        raise InvalidConfig(
            f"dataset has {table.n_rows} rows (> {config.max_rows}); "
            "pass --full-dataset to run anyway"
        )
    spec = config.scenario_spec()
    table = downsample(table, spec.downsample_fraction,
                       derive_seed(config.seed, "downsample"))
    train, test = split_scenario(table, spec)

    encoder = make_encoder(config.encoding).fit(train)
    train = encoder.transform(train)
    test = encoder.transform(test)
    train, test, params = sanitize_and_normalize(train, test)
    params["encoding"] = encoder.to_params()

    tables_dir = result.out_dir / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)
    train.to_csv(tables_dir / "train.csv")
    test.to_csv(tables_dir / "test.csv")
    _write_json(params, tables_dir / "params.json")
    _write_json(
        {
            "rows_after_downsample": table.n_rows,
            "train_rows": train.n_rows,
            "test_rows": test.n_rows,
            "train_attacks": int(train.labels.sum()),
            "test_attacks": int(test.labels.sum()),
            "scenario": dataclasses.asdict(spec),
        },
        tables_dir / "stats.json",
    )
    result.train_table, result.test_table = train, test


@_stage("graph")
def _run_graph(config: PipelineConfig, result: PipelineResult) -> None:
    result.train_graph = build_graph(result.train_table)
    result.test_graph = build_graph(result.test_table)
    stats = {}
    for name, g in (("train", result.train_graph), ("test", result.test_graph)):
        stats[name] = {
            "nodes": g.n_nodes,
            "edges": g.n_edges,
            "flows": g.n_flows,
            "feature_dim": g.feature_dim,
        }
        if config.dump_graph_edges:
            from .graph import dump_edges

            dump_edges(g, result.out_dir / "graphs" / f"{name}_edges.csv")
    _write_json(stats, result.out_dir / "graphs" / "stats.json")


@_stage("features")
def _run_features(config: PipelineConfig, result: PipelineResult) -> None:
    features_dir = result.out_dir / "features"
    if config.method == "steg":
        sc = config.scattering
        J = int(sc.get("J", 4))
        T = sc.get("T")
        if T is None:
            T = default_pad_length(J, result.train_graph.feature_dim)
        bank = build_filterbank(ScatteringConfig(
            J=J, Q=int(sc.get("Q", 16)), Q2=int(sc.get("Q2", 1)), T=int(T),
            max_order=int(sc.get("max_order", 2)),
        ))
        result.train_graph = augment_edges(result.train_graph, bank)
        result.test_graph = augment_edges(result.test_graph, bank)
        _write_json(
            {
                "paths": bank.n_paths,
                "first_order_filters": len(bank.psi1),
                "second_order_filters": len(bank.psi2),
                "augmented_dim": result.train_graph.feature_dim,
                "config": dataclasses.asdict(bank.config),
            },
            features_dir / "scattering.json",
        )
    else:
        n2v = Node2VecEmbedding(config.walk_config()).fit(result.train_graph)
        result.node_embeddings["train"] = n2v.lookup(result.train_graph)
        result.node_embeddings["test"] = n2v.lookup(result.test_graph)
        features_dir.mkdir(parents=True, exist_ok=True)
        with open(features_dir / "node_embeddings.csv", "w", encoding="utf-8") as fh:
            dim = n2v.embeddings_.shape[1]
            fh.write("node," + ",".join(f"v{i}" for i in range(dim)) + "\n")
            for name, row in zip(n2v.node_names_, n2v.embeddings_):
                fh.write(name + "," + ",".join(f"{v:.17g}" for v in row) + "\n")


@_stage("encode")
def _run_encode(config: PipelineConfig, result: PipelineResult) -> None:
    enc = GraphEncoder(
        hidden=config.hidden,
        layers=int(config.encoder.get("layers", 1)),
        init_mode=config.init_mode,
        weight_seed=int(config.encoder.get("weight_seed",
                                           derive_seed(config.seed, "encoder"))),
    )
    n2v_train = result.node_embeddings.get("train")
    n2v_test = result.node_embeddings.get("test")
    enc.fit(result.train_graph, n2v_train)
    train_set = enc.transform(result.train_graph, n2v_train)
    test_set = enc.transform(result.test_graph, n2v_test)
    result.train_edges = train_set.edge_embeddings
    result.test_edges = test_set.edge_embeddings

    emb_dir = result.out_dir / "embeddings"
    _write_embedding_csv(emb_dir / "train_edges.csv", train_set.flow_rows,
                         train_set.edge_embeddings)
    _write_embedding_csv(emb_dir / "test_edges.csv", test_set.flow_rows,
                         test_set.edge_embeddings)
    _write_json(
        {
            "method": config.method,
            "hidden": config.hidden,
            "edge_embedding_dim": int(train_set.edge_embeddings.shape[1]),
            "encoder": enc.get_params(),
        },
        emb_dir / "encoder.json",
    )


@_stage("detect")
def _run_detect(config: PipelineConfig, result: PipelineResult) -> None:
    det = config.detectors
    kinds = det.get("kinds", list(DETECTOR_KINDS))
    contaminations = det.get("contamination", DEFAULT_CONTAMINATIONS)
    selection = det.get("selection", "test")

    train = result.train_edges
    if selection == "holdout":
        frac = float(det.get("holdout_fraction", 0.2))
        rng = np.random.default_rng(derive_seed(config.seed, "holdout"))
        order = rng.permutation(train.shape[0])
        n_eval = max(1, int(frac * train.shape[0]))
        eval_idx, fit_idx = order[:n_eval], order[n_eval:]
        fit_embeddings = train[fit_idx]
        eval_embeddings = train[eval_idx]
        eval_labels = result.train_table.labels[eval_idx]
    else:
        fit_embeddings = train
        eval_embeddings = result.test_edges
        eval_labels = result.test_table.labels

    for kind in kinds:
        best, cells = grid_search(
            kind,
            fit_embeddings,
            eval_embeddings,
            eval_labels,
            hyper_range=det.get(_RANGE_KEYS[kind], DEFAULT_GRID[kind]),
            contamination_range=contaminations,
            seed=derive_seed(config.seed, f"detect:{kind}"),
        )
        result.grid[kind] = (best, cells)
        _write_grid_csv(result.out_dir / "detect" / f"grid_{kind}.csv", cells)


_RANGE_KEYS = {
    "kmeans": "clusters",
    "pca": "components",
    "iforest": "estimators",
    "cblof": "clusters",
    "hbos": "bins",
}


@_stage("report")
def _run_report(config: PipelineConfig, result: PipelineResult) -> None:
    scenario = config.scenario_spec()
    scenario_tag = f"contamination={scenario.contamination:g}"
    report = EvalReport()
    for kind, (best, _) in result.grid.items():
        report.rows.append(EvalRow(
            method=config.method,
            detector=kind,
            scenario=scenario_tag,
            accuracy=best.accuracy,
            macro_f1=best.macro_f1,
            detection_rate=best.detection_rate,
            hyperparameter=best.hyperparameter,
            contamination=best.contamination,
            seed=config.seed,
        ))
    report_dir = result.out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    result.report = report
    result.report_csv = report_dir / "report.csv"
    result.report_json = report_dir / "report.json"
    report.to_csv(result.report_csv)
    report.to_json(result.report_json)
    _write_json(config.to_dict(), report_dir / "config.json")


def run_pipeline(config: PipelineConfig, through: str = "report") -> PipelineResult:
    """Execute stages in order up to and including ``through``."""
    if through not in STAGES:
        raise InvalidConfig(f"unknown stage {through!r}")
    result = PipelineResult(config=config, out_dir=Path(config.output_dir))
    result.out_dir.mkdir(parents=True, exist_ok=True)
    runners = {
        "ingest": _run_ingest,
        "graph": _run_graph,
        "features": _run_features,
        "encode": _run_encode,
        "detect": _run_detect,
        "report": _run_report,
    }
    for stage in STAGES[: STAGES.index(through) + 1]:
        logger.info("stage %s", stage)
        runners[stage](config, result)
    return result


def emit_projection(embeddings: np.ndarray, labels: np.ndarray, path) -> None:
    """Top-2 principal component dump for external plotting.

    The header comment records the variance fraction carried by the two
    components.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise TooFewRows("projection needs at least 3 rows")
    labels = np.asarray(labels)
    centered = X - X.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    coords = centered @ vt[:2].T
    if coords.shape[1] < 2:
        coords = np.column_stack([coords, np.zeros(coords.shape[0])])
    total = float(np.sum(svals ** 2))
    fraction = float(np.sum(svals[:2] ** 2) / total) if total > 0 else 1.0

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# variance_fraction={fraction!r}\n")
        fh.write("x,y,label\n")
        for (x, y), lab in zip(coords, labels):
            fh.write(f"{x!r},{y!r},{int(lab)}\n")
