"""Node embeddings from biased random walks + skip-gram.

Walks run on the weight-collapsed simple graph (parallel flow edges
summed into weights). The second-order transition law weights each
candidate hop c from node v, given the previous node t, by
alpha(t, c) * w(v, c) with alpha = 1/p, 1, 1/q for hop distances
0, 1, 2. Walk sequences then train a skip-gram model with negative
sampling, single-threaded for exact reproducibility.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import EmptyCorpus, EmptyTable, InvalidConfig, InvalidDistance
from .graph import FlowGraph


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 80
    walks_per_node: int = 10
    window: int = 10
    dim: int = 64
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise InvalidConfig("p and q must be > 0")
        if self.dim < 1:
            raise InvalidConfig("dim must be >= 1")
        if self.walk_length < 2:
            raise InvalidConfig("walk_length must be >= 2")
        if self.window < 1 or self.negatives < 0 or self.epochs < 0:
            raise InvalidConfig("window >= 1, negatives >= 0, epochs >= 0 required")


def transition_weight(d_tc: int, p: float, q: float, w_vc: float) -> float:
    """Unnormalized second-order transition probability alpha * w."""
    if d_tc == 0:
        return w_vc / p
    if d_tc == 1:
        return w_vc
    if d_tc == 2:
        return w_vc / q
    raise InvalidDistance(f"hop distance must be 0, 1 or 2, got {d_tc}")


class _CollapsedGraph:
    """Simple weighted view of a flow multigraph: parallel directed
    edges between the same node pair collapse into one weight."""

    def __init__(self, graph: FlowGraph):
        self.n_nodes = graph.n_nodes
        pair_weights: dict[tuple[int, int], float] = {}
        for u, v in zip(graph.edge_src.tolist(), graph.edge_dst.tolist()):
            pair_weights[(u, v)] = pair_weights.get((u, v), 0.0) + 1.0
        nbrs: list[list[int]] = [[] for _ in range(self.n_nodes)]
        wts: list[list[float]] = [[] for _ in range(self.n_nodes)]
        for (u, v), w in sorted(pair_weights.items()):
            nbrs[u].append(v)
            wts[u].append(w)
        self.nbrs = [np.array(a, dtype=np.int64) for a in nbrs]
        self.weights = [np.array(a, dtype=np.float64) for a in wts]
        self.nbr_sets = [set(a.tolist()) for a in self.nbrs]


class _AliasTable:
    """Walker alias method: O(1) draws from a fixed discrete law."""

    def __init__(self, probs: np.ndarray):
        k = probs.shape[0]
        self.k = k
        self.prob = np.zeros(k)
        self.alias = np.zeros(k, dtype=np.int64)
        scaled = probs * k / probs.sum()
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] = scaled[l] - (1.0 - scaled[s])
            (small if scaled[l] < 1.0 else large).append(l)
        for i in large + small:
            self.prob[i] = 1.0

    def sample(self, rng: np.random.Generator) -> int:
        i = int(rng.integers(self.k))
        return i if rng.random() < self.prob[i] else int(self.alias[i])


class _WalkSampler:
    """Caches per-node (first step) and per-(prev, cur) alias tables."""

    def __init__(self, collapsed: _CollapsedGraph, p: float, q: float):
        self.g = collapsed
        self.p = p
        self.q = q
        self._node_tables: dict[int, _AliasTable] = {}
        self._edge_tables: dict[tuple[int, int], _AliasTable] = {}

    def first_step(self, v: int, rng) -> int | None:
        nbrs = self.g.nbrs[v]
        if nbrs.size == 0:
            return None
        table = self._node_tables.get(v)
        if table is None:
            table = _AliasTable(self.g.weights[v])
            self._node_tables[v] = table
        return int(nbrs[table.sample(rng)])

    def next_step(self, t: int, v: int, rng) -> int | None:
        nbrs = self.g.nbrs[v]
        if nbrs.size == 0:
            return None
        key = (t, v)
        table = self._edge_tables.get(key)
        if table is None:
            t_nbrs = self.g.nbr_sets[t]
            probs = np.array(
                [
                    transition_weight(
                        0 if c == t else (1 if c in t_nbrs else 2),
                        self.p, self.q, w,
                    )
                    for c, w in zip(nbrs.tolist(), self.g.weights[v].tolist())
                ]
            )
            table = _AliasTable(probs)
            self._edge_tables[key] = table
        return int(nbrs[table.sample(rng)])


def generate_walks(graph: FlowGraph, config: WalkConfig) -> list[np.ndarray]:
    """walks_per_node biased walks from every node, deterministic given
    the seed. Isolated nodes yield length-1 walks."""
    if graph.n_nodes == 0:
        raise EmptyTable("cannot walk an empty graph")
    collapsed = _CollapsedGraph(graph)
    sampler = _WalkSampler(collapsed, config.p, config.q)

    walks = []
    for w in range(config.walks_per_node):
        for start in range(graph.n_nodes):
            rng = np.random.default_rng(
                np.random.SeedSequence((config.seed, w, start))
            )
            walk = [start]
            nxt = sampler.first_step(start, rng)
            if nxt is not None:
                walk.append(nxt)
                while len(walk) < config.walk_length:
                    nxt = sampler.next_step(walk[-2], walk[-1], rng)
                    if nxt is None:
                        break
                    walk.append(nxt)
            walks.append(np.array(walk, dtype=np.int64))
    return walks


def train_skipgram(walks: list[np.ndarray], config: WalkConfig,
                   n_nodes: int) -> np.ndarray:
    """Skip-gram with negative sampling over walk sequences.

    Noise nodes are drawn proportionally to corpus frequency ** 0.75;
    input vectors start uniform in [-0.5/dim, 0.5/dim] and the learning
    rate decays linearly to 1e-4 of its initial value over all updates.
    Returns the (n_nodes, dim) input-embedding matrix.
    """
    if not walks:
        raise EmptyCorpus("no walks to train on")

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5163)))
    dim = config.dim
    emb = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_nodes, dim))
    ctx = np.zeros((n_nodes, dim))
    if config.epochs == 0:
        return emb

    counts = np.zeros(n_nodes, dtype=np.float64)
    n_pairs_per_epoch = 0
    for walk in walks:
        np.add.at(counts, walk, 1.0)
        m = walk.shape[0]
        for i in range(m):
            lo, hi = max(0, i - config.window), min(m, i + config.window + 1)
            n_pairs_per_epoch += (hi - lo - 1)
    noise = counts ** 0.75
    if noise.sum() == 0:
        raise EmptyCorpus("walks contain no tokens")
    noise_cdf = np.cumsum(noise / noise.sum())

    total = config.epochs * n_pairs_per_epoch
    lr0 = config.learning_rate
    floor = 1e-4 * lr0
    step = 0
    for _ in range(config.epochs):
        for walk in walks:
            m = walk.shape[0]
            for i in range(m):
                center = walk[i]
                lo, hi = max(0, i - config.window), min(m, i + config.window + 1)
                for j in range(lo, hi):
                    if j == i:
                        continue
                    lr = max(floor, lr0 * (1.0 - step / total))
                    step += 1
                    targets = np.empty(1 + config.negatives, dtype=np.int64)
                    targets[0] = walk[j]
                    if config.negatives:
                        targets[1:] = np.searchsorted(
                            noise_cdf, rng.random(config.negatives)
                        )
                    v = emb[center]
                    u = ctx[targets]
                    scores = 1.0 / (1.0 + np.exp(-np.clip(u @ v, -30, 30)))
                    labels = np.zeros(1 + config.negatives)
                    labels[0] = 1.0
                    g = (labels - scores) * lr
                    grad_v = g @ u
                    ctx[targets] += g[:, None] * v
                    emb[center] = v + grad_v
    return emb


class Node2VecEmbedding:
    """Estimator: fit() runs walks + skip-gram on a flow graph and
    exposes the node-embedding matrix aligned to graph node indices."""

    def __init__(self, config: WalkConfig | None = None, **overrides):
        base = config or WalkConfig()
        if overrides:
            base = replace(base, **overrides)
        self.config = base

    def get_params(self, deep=True):
        return {"config": self.config, **asdict(self.config)}

    def set_params(self, **params):
        cfg = params.pop("config", self.config)
        self.config = replace(cfg, **params)
        return self

    def fit(self, graph: FlowGraph, y=None):
        walks = generate_walks(graph, self.config)
        self.embeddings_ = train_skipgram(walks, self.config, graph.n_nodes)
        self.node_names_ = list(graph.node_names)
        return self

    def lookup(self, graph: FlowGraph) -> np.ndarray:
        """Embeddings for another graph's nodes by endpoint name.

        Nodes unseen during fit get the mean training embedding, which
        keeps train and test in one embedding space.
        """
        index = {name: i for i, name in enumerate(self.node_names_)}
        fallback = self.embeddings_.mean(axis=0)
        out = np.empty((graph.n_nodes, self.embeddings_.shape[1]))
        for i, name in enumerate(graph.node_names):
            j = index.get(name)
            out[i] = self.embeddings_[j] if j is not None else fallback
        return out
