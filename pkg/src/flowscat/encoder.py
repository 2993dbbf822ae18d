"""Untrained graph encoder forward pass.

One or more message-passing layers over the bidirectional flow graph:
each node averages, over its incoming edges, the concatenation of the
tail node's previous embedding with the edge feature vector, then
projects [own embedding || message] through a frozen random linear map
and a ReLU. Per-flow edge embeddings are the concatenation of the two
endpoint embeddings of the forward edge, so their width is twice the
hidden width. Weights are Glorot-uniform draws from a fixed seed and
are never trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, MissingEmbeddings
from .graph import FlowGraph

INIT_MODES = ("constant", "node2vec")


@dataclass(frozen=True)
class EncoderConfig:
    hidden: int = 256
    layers: int = 1
    init_mode: str = "constant"
    weight_seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise InvalidConfig("layers must be >= 1")
        if self.hidden < 1:
            raise InvalidConfig("hidden must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise InvalidConfig(f"init_mode must be one of {INIT_MODES}")


@dataclass
class EmbeddingSet:
    """Node embeddings plus one edge-embedding row per original flow
    (forward direction), with the row→flow mapping retained."""

    node_embeddings: np.ndarray
    edge_embeddings: np.ndarray
    flow_rows: np.ndarray

    @property
    def hidden(self) -> int:
        return int(self.node_embeddings.shape[1])


def init_node_features(graph: FlowGraph, mode: str,
                       n2v: np.ndarray | None = None) -> np.ndarray:
    """Initial node feature table h^0.

    ``constant`` mode emits all-ones rows whose width equals the
    (possibly augmented) edge feature dimension; ``node2vec`` mode uses
    the provided embedding table.
    """
    if mode == "constant":
        return np.ones((graph.n_nodes, graph.feature_dim), dtype=np.float64)
    if mode == "node2vec":
        if n2v is None:
            raise MissingEmbeddings("node2vec init requires an embedding table")
        n2v = np.asarray(n2v, dtype=np.float64)
        if n2v.shape[0] != graph.n_nodes:
            raise DimensionMismatch(
                f"embedding table has {n2v.shape[0]} rows for {graph.n_nodes} nodes"
            )
        return n2v.copy()
    raise InvalidConfig(f"unknown init mode {mode!r}")


def init_weights(config: EncoderConfig, in_dims) -> list[np.ndarray]:
    """Glorot-uniform weight matrices, one per layer.

    ``in_dims[k]`` is the input width of layer k (the summed widths of
    the concatenated blocks feeding it); every matrix has ``hidden``
    rows. Deterministic in ``weight_seed``.
    """
    in_dims = [int(d) for d in np.atleast_1d(in_dims)]
    if len(in_dims) != config.layers:
        raise InvalidConfig(
            f"got {len(in_dims)} input dims for {config.layers} layers"
        )
    rng = np.random.default_rng(config.weight_seed)
    weights = []
    for d in in_dims:
        bound = np.sqrt(6.0 / (d + config.hidden))
        weights.append(rng.uniform(-bound, bound, size=(config.hidden, d)))
    return weights


def layer_input_dims(config: EncoderConfig, node_dim: int, edge_dim: int) -> list[int]:
    """Input width per layer: own embedding + mean of [tail || edge]."""
    dims = []
    h = node_dim
    for _ in range(config.layers):
        dims.append(h + h + edge_dim)
        h = config.hidden
    return dims


def forward(graph: FlowGraph, h0: np.ndarray, weights: list[np.ndarray],
            config: EncoderConfig) -> EmbeddingSet:
    """Run the message-passing layers and emit node + edge embeddings.

    Nodes with no incoming edges receive a zero message. The per-node
    mean is accumulated in fixed edge-index order, so output is
    deterministic. Edge embeddings cover forward edges only: one
    verdict per flow.
    """
    h = np.asarray(h0, dtype=np.float64)
    if h.shape[0] != graph.n_nodes:
        raise DimensionMismatch("h0 row count must equal the node count")

    edge_feat = graph.flow_features[graph.edge_row]
    counts = np.bincount(graph.edge_dst, minlength=graph.n_nodes).astype(np.float64)
    safe_counts = np.where(counts > 0, counts, 1.0)[:, None]

    for W in weights:
        msg_dim = h.shape[1] + edge_feat.shape[1]
        if W.shape[1] != h.shape[1] + msg_dim:
            raise DimensionMismatch(
                f"weight matrix expects {W.shape[1]} inputs, layer provides "
                f"{h.shape[1] + msg_dim}"
            )
        acc = np.zeros((graph.n_nodes, msg_dim), dtype=np.float64)
        contrib = np.concatenate([h[graph.edge_src], edge_feat], axis=1)
        np.add.at(acc, graph.edge_dst, contrib)
        msg = acc / safe_counts
        h = np.maximum(np.concatenate([h, msg], axis=1) @ W.T, 0.0)

    forward_mask = graph.edge_dir == 0
    src = graph.edge_src[forward_mask]
    dst = graph.edge_dst[forward_mask]
    rows = graph.edge_row[forward_mask]
    edge_emb = np.concatenate([h[src], h[dst]], axis=1)
    return EmbeddingSet(node_embeddings=h, edge_embeddings=edge_emb,
                        flow_rows=graph.flow_row_ids[rows].copy())


class GraphEncoder:
    """Estimator wrapper: fit() freezes seeded weights sized to the
    graph, transform() runs the forward pass."""

    def __init__(self, hidden: int = 256, layers: int = 1,
                 init_mode: str = "constant", weight_seed: int = 0):
        self.hidden = hidden
        self.layers = layers
        self.init_mode = init_mode
        self.weight_seed = weight_seed

    def get_params(self, deep=True):
        return {"hidden": self.hidden, "layers": self.layers,
                "init_mode": self.init_mode, "weight_seed": self.weight_seed}

    def set_params(self, **params):
        for k, v in params.items():
            setattr(self, k, v)
        return self

    def _config(self) -> EncoderConfig:
        return EncoderConfig(hidden=self.hidden, layers=self.layers,
                             init_mode=self.init_mode,
                             weight_seed=self.weight_seed)

    def fit(self, graph: FlowGraph, n2v: np.ndarray | None = None):
        config = self._config()
        h0 = init_node_features(graph, config.init_mode, n2v)
        self.weights_ = init_weights(
            config, layer_input_dims(config, h0.shape[1], graph.feature_dim)
        )
        self.node_dim_ = h0.shape[1]
        self.edge_dim_ = graph.feature_dim
        return self

    def transform(self, graph: FlowGraph, n2v: np.ndarray | None = None) -> EmbeddingSet:
        config = self._config()
        h0 = init_node_features(graph, config.init_mode, n2v)
        if h0.shape[1] != self.node_dim_ or graph.feature_dim != self.edge_dim_:
            raise DimensionMismatch(
                "graph dimensions differ from the ones the encoder was fitted on"
            )
        return forward(graph, h0, self.weights_, config)

    def fit_transform(self, graph: FlowGraph, n2v: np.ndarray | None = None):
        return self.fit(graph, n2v).transform(graph, n2v)
