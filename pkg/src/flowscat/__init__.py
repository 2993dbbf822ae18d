"""flowscat: self-supervised network flow anomaly detection.

Builds bidirectional flow graphs from NetFlow-style records, enriches
edge features with a multi-order wavelet scattering transform (or
initializes nodes with biased-random-walk embeddings), pushes them
through a frozen message-passing encoder, and scores the resulting
edge embeddings with five unsupervised anomaly detectors.
"""

__version__ = "0.1.0"

from .detectors import (
    CblofDetector,
    HbosDetector,
    IsolationForestDetector,
    KMeansDetector,
    PcaDetector,
    grid_search,
    make_detector,
)
from .encoder import EmbeddingSet, EncoderConfig, GraphEncoder, forward
from .graph import FlowGraph, build_graph, in_neighbors
from .ingest import (
    FlowTable,
    FrequencyEncoder,
    ScenarioSpec,
    Schema,
    TargetEncoder,
    downsample,
    load_schema,
    parse_netflow,
    sanitize_and_normalize,
    split_scenario,
)
from .metrics import ConfusionCounts, EvalReport, EvalRow, confusion, metrics
from .node2vec import (
    Node2VecEmbedding,
    WalkConfig,
    generate_walks,
    train_skipgram,
    transition_weight,
)
from .pipeline import PipelineConfig, emit_projection, load_config, run_pipeline
from .scattering import (
    ScatteringConfig,
    ScatteringFilterBank,
    ScatteringTransform,
    augment_edges,
    build_filterbank,
    scatter,
    scatter_batch,
)
from .synth import SyntheticSpec, generate_synthetic

__all__ = [
    "__version__",
    "CblofDetector", "HbosDetector", "IsolationForestDetector",
    "KMeansDetector", "PcaDetector", "grid_search", "make_detector",
    "EmbeddingSet", "EncoderConfig", "GraphEncoder", "forward",
    "FlowGraph", "build_graph", "in_neighbors",
    "FlowTable", "FrequencyEncoder", "ScenarioSpec", "Schema",
    "TargetEncoder", "downsample", "load_schema", "parse_netflow",
    "sanitize_and_normalize", "split_scenario",
    "ConfusionCounts", "EvalReport", "EvalRow", "confusion", "metrics",
    "Node2VecEmbedding", "WalkConfig", "generate_walks", "train_skipgram",
    "transition_weight",
    "PipelineConfig", "emit_projection", "load_config", "run_pipeline",
    "ScatteringConfig", "ScatteringFilterBank", "ScatteringTransform",
    "augment_edges", "build_filterbank", "scatter", "scatter_batch",
    "SyntheticSpec", "generate_synthetic",
]
