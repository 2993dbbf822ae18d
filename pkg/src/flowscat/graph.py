"""Bidirectional flow multigraph.

Nodes are endpoint identifiers; every flow row contributes a forward
and a reverse directed edge carrying the same feature vector. Feature
vectors are stored once per flow and shared by both directions, so
per-flow augmentation is computed exactly once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyTable, InvalidNode
from .ingest import FlowTable


@dataclass
class FlowGraph:
    """Immutable multigraph over IP endpoints.

    ``edge_row[e]`` indexes the originating flow (row of
    ``flow_features`` / ``flow_labels``); ``edge_dir[e]`` is 0 for the
    forward copy and 1 for the reverse copy. ``in_neighbors`` order is
    edge-insertion order, i.e. ascending edge index.
    """

    node_ids: dict[str, int]
    node_names: list[str]
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_row: np.ndarray
    edge_dir: np.ndarray
    flow_features: np.ndarray
    flow_labels: np.ndarray
    flow_row_ids: np.ndarray

    def __post_init__(self):
        order = np.argsort(self.edge_dst, kind="stable")
        self._in_order = order
        counts = np.bincount(self.edge_dst, minlength=self.n_nodes)
        self._in_starts = np.concatenate([[0], np.cumsum(counts)])

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    @property
    def n_edges(self) -> int:
        return int(self.edge_src.shape[0])

    @property
    def n_flows(self) -> int:
        return int(self.flow_features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.flow_features.shape[1])

    def edge_features(self, e: int) -> np.ndarray:
        return self.flow_features[self.edge_row[e]]

    def in_edge_indices(self, v: int) -> np.ndarray:
        if not 0 <= v < self.n_nodes:
            raise InvalidNode(f"node {v} outside [0, {self.n_nodes})")
        return self._in_order[self._in_starts[v]:self._in_starts[v + 1]]

    def with_features(self, features: np.ndarray) -> "FlowGraph":
        """Copy of the graph with per-flow features replaced."""
        if features.shape[0] != self.n_flows:
            raise ValueError("feature row count must match flow count")
        return replace(self, flow_features=np.asarray(features, dtype=np.float64))


def build_graph(table: FlowTable) -> FlowGraph:
    """Convert a sanitized flow table into its bidirectional multigraph.

    One node per distinct endpoint (first-appearance order over
    src-then-dst per row); 2 * n_rows directed edges with parallel
    flows kept as distinct edges.
    """
    n = table.n_rows
    if n == 0:
        raise EmptyTable("cannot build a graph from an empty table")

    features, _ = table.feature_matrix()
    features = np.ascontiguousarray(features, dtype=np.float64)

    node_ids: dict[str, int] = {}
    src_idx = np.empty(n, dtype=np.int64)
    dst_idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        for which, name in ((src_idx, table.src_ids[i]), (dst_idx, table.dst_ids[i])):
            idx = node_ids.get(name)
            if idx is None:
                idx = len(node_ids)
                node_ids[name] = idx
            which[i] = idx

    # edges 2i / 2i+1 are the forward / reverse copies of flow i
    edge_src = np.empty(2 * n, dtype=np.int64)
    edge_dst = np.empty(2 * n, dtype=np.int64)
    edge_src[0::2] = src_idx
    edge_dst[0::2] = dst_idx
    edge_src[1::2] = dst_idx
    edge_dst[1::2] = src_idx
    edge_row = np.repeat(np.arange(n, dtype=np.int64), 2)
    edge_dir = np.tile(np.array([0, 1], dtype=np.int8), n)

    return FlowGraph(
        node_ids=node_ids,
        node_names=list(node_ids.keys()),
        edge_src=edge_src,
        edge_dst=edge_dst,
        edge_row=edge_row,
        edge_dir=edge_dir,
        flow_features=features,
        flow_labels=table.labels.copy(),
        flow_row_ids=table.row_ids.copy(),
    )


def in_neighbors(graph: FlowGraph, v: int) -> list[tuple[int, int]]:
    """All (tail node, edge index) pairs for edges whose head is v,
    in insertion order. Full neighborhood, no subsampling."""
    edges = graph.in_edge_indices(v)
    return [(int(graph.edge_src[e]), int(e)) for e in edges]


def dump_edges(graph: FlowGraph, path) -> None:
    """Debug edge list: src, dst, originating row id, direction flag."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "row_index", "direction"])
        for e in range(graph.n_edges):
            writer.writerow([
                graph.node_names[graph.edge_src[e]],
                graph.node_names[graph.edge_dst[e]],
                int(graph.flow_row_ids[graph.edge_row[e]]),
                int(graph.edge_dir[e]),
            ])
