import numpy as np
import pytest

from flowscat.errors import EmptyTable, InvalidNode
from flowscat.graph import build_graph, dump_edges, in_neighbors
from flowscat.ingest import sanitize_and_normalize

from conftest import make_table, simple_schema


def table_from_flows(flows, features=None):
    src = [f[0] for f in flows]
    dst = [f[1] for f in flows]
    schema = simple_schema(n_numeric=2, categoricals=())
    features = features if features is not None else [[0.5, 0.1]] * len(flows)
    return make_table(src, dst, [0] * len(flows), numerics=features, schema=schema)


class TestBuild:
    def test_single_flow_bidirectional(self):
        g = build_graph(table_from_flows([("A", "B")]))
        assert g.n_nodes == 2
        assert g.n_edges == 2
        np.testing.assert_allclose(g.edge_features(0), [0.5, 0.1])
        np.testing.assert_allclose(g.edge_features(1), [0.5, 0.1])
        a, b = g.node_ids["A"], g.node_ids["B"]
        assert (g.edge_src[0], g.edge_dst[0]) == (a, b)
        assert (g.edge_src[1], g.edge_dst[1]) == (b, a)

    def test_parallel_flows_preserved(self):
        g = build_graph(table_from_flows([("A", "B"), ("A", "B"), ("B", "C")]))
        assert g.n_nodes == 3
        assert g.n_edges == 6
        a, b = g.node_ids["A"], g.node_ids["B"]
        parallel = np.sum((g.edge_src == a) & (g.edge_dst == b))
        assert parallel == 2

    def test_self_loop(self):
        g = build_graph(table_from_flows([("A", "A")]))
        assert g.n_nodes == 1
        assert g.n_edges == 2
        assert np.all(g.edge_src == 0) and np.all(g.edge_dst == 0)
        assert (0, 0) in in_neighbors(g, 0)

    def test_empty_table(self):
        with pytest.raises(EmptyTable):
            build_graph(table_from_flows([]))

    def test_row_index_mapping(self):
        g = build_graph(table_from_flows([("A", "B"), ("B", "C")]))
        assert g.edge_row.tolist() == [0, 0, 1, 1]
        assert g.edge_dir.tolist() == [0, 1, 0, 1]


class TestInNeighbors:
    def test_traced_example(self):
        # flows A->B, A->B, B->C: edges (0) A->B, (1) B->A, (2) A->B,
        # (3) B->A, (4) B->C, (5) C->B; in-edges of B are 0, 2, 5
        g = build_graph(table_from_flows([("A", "B"), ("A", "B"), ("B", "C")]))
        b = g.node_ids["B"]
        got = in_neighbors(g, b)
        a, c = g.node_ids["A"], g.node_ids["C"]
        assert got == [(a, 0), (a, 2), (c, 5)]

    def test_invalid_node(self):
        g = build_graph(table_from_flows([("A", "B")]))
        with pytest.raises(InvalidNode):
            in_neighbors(g, 99)

    def test_totals_match_edge_count(self):
        rng = np.random.default_rng(4)
        hosts = [f"h{i}" for i in range(8)]
        flows = [(hosts[rng.integers(8)], hosts[rng.integers(8)])
                 for _ in range(40)]
        g = build_graph(table_from_flows(flows, features=rng.normal(size=(40, 2))))
        total = sum(len(in_neighbors(g, v)) for v in range(g.n_nodes))
        assert total == g.n_edges == 80


class TestInvariants:
    def test_degree_symmetry(self):
        rng = np.random.default_rng(9)
        hosts = [f"h{i}" for i in range(6)]
        flows = [(hosts[rng.integers(6)], hosts[rng.integers(6)])
                 for _ in range(60)]
        g = build_graph(table_from_flows(flows))
        counts = {}
        for e in range(g.n_edges):
            key = (int(g.edge_src[e]), int(g.edge_dst[e]))
            counts[key] = counts.get(key, 0) + 1
        for (u, v), c in counts.items():
            assert counts.get((v, u), 0) == c

    def test_permuted_table_same_flow_verdict_mapping(self):
        rng = np.random.default_rng(2)
        hosts = [f"h{i}" for i in range(5)]
        flows = [(hosts[rng.integers(5)], hosts[rng.integers(5)])
                 for _ in range(30)]
        feats = rng.normal(size=(30, 2))
        table = table_from_flows(flows, features=feats)
        perm = rng.permutation(30)
        g1 = build_graph(table)
        g2 = build_graph(table.take(perm))
        # per-flow mapping: row ids still address the same original rows
        assert sorted(g2.flow_row_ids.tolist()) == sorted(g1.flow_row_ids.tolist())
        for i, row in enumerate(g2.flow_row_ids):
            np.testing.assert_array_equal(g2.flow_features[i],
                                          feats[int(row)])

    def test_graph_built_after_normalization_has_finite_features(self):
        schema = simple_schema(n_numeric=2, categoricals=())
        train = make_table(["a", "b"], ["b", "a"], [0, 0],
                           numerics=[[3.0, np.nan], [4.0, np.inf]], schema=schema)
        test = make_table(["a"], ["b"], [0], numerics=[[5.0, 1.0]], schema=schema)
        train2, _, _ = sanitize_and_normalize(train, test)
        g = build_graph(train2)
        assert np.isfinite(g.flow_features).all()


def test_edge_dump(tmp_path):
    g = build_graph(table_from_flows([("A", "B"), ("B", "C")]))
    path = tmp_path / "edges.csv"
    dump_edges(g, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "src,dst,row_index,direction"
    assert len(lines) == 5
    assert lines[1] == "A,B,0,0"
    assert lines[2] == "B,A,0,1"
