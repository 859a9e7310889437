import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oodgraph import errors
from oodgraph.knn import KnnGraph, build_knn_graph, isolated_nodes


def brute_force_edges(X: np.ndarray, k: int, mode: str = "union") -> set[tuple[int, int]]:
    """Exhaustive all-pairs neighbor oracle with the same tie rule."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    unit = X / np.linalg.norm(X, axis=1, keepdims=True)
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    chosen: list[set[int]] = []
    for u in range(n):
        candidates = sorted(
            (v for v in range(n) if v != u),
            key=lambda v: (-sims[u, v], v),
        )
        chosen.append({v for v in candidates[:k] if sims[u, v] > 0.0})
    edges = set()
    for u in range(n):
        for v in chosen[u]:
            if mode == "union" or u in chosen[v]:
                edges.add((min(u, v), max(u, v)))
    return edges


def graph_edges(g: KnnGraph) -> set[tuple[int, int]]:
    out = set()
    for u in range(g.node_count):
        nbrs, _ = g.neighbors(u)
        for v in nbrs:
            out.add((min(u, int(v)), max(u, int(v))))
    return out


def test_negative_cosines_drop_all_edges():
    # Three unit vectors 120 degrees apart: every pairwise cosine is -0.5.
    angles = [0.0, 2 * math.pi / 3, 4 * math.pi / 3]
    X = np.array([[math.cos(a), math.sin(a)] for a in angles])
    g = build_knn_graph(X, k=1)
    assert g.edge_count == 0
    np.testing.assert_array_equal(isolated_nodes(g), [0, 1, 2])


def test_orthogonal_bundles_stay_separate():
    rng = np.random.default_rng(0)
    a = np.array([1.0, 0.0, 0.0, 0.0])
    b = np.array([0.0, 1.0, 0.0, 0.0])
    bundle_a = a + 1e-3 * rng.normal(size=(5, 4)) @ np.diag([0, 0, 1, 1])
    bundle_b = b + 1e-3 * rng.normal(size=(5, 4)) @ np.diag([0, 0, 1, 1])
    X = np.vstack([bundle_a, bundle_b])
    g = build_knn_graph(X, k=3)
    edges = graph_edges(g)
    assert all((u < 5) == (v < 5) for u, v in edges), "no cross-bundle edges"
    assert isolated_nodes(g).size == 0


def test_matches_brute_force_oracle_on_sphere():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(50, 8))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    g = build_knn_graph(X, k=7)
    assert graph_edges(g) == brute_force_edges(X, 7)


def test_antipodal_outlier_is_isolated():
    rng = np.random.default_rng(3)
    bundle = np.array([1.0, 0.0]) + 1e-3 * rng.normal(size=(6, 2))
    outlier = -np.array([[1.0, 0.0]])
    X = np.vstack([bundle, outlier])
    g = build_knn_graph(X, k=2)
    np.testing.assert_array_equal(isolated_nodes(g), [6])


def test_mutual_mode_is_stricter():
    # Node 2 picks both hubs; the far hub never picks node 2 back at k=1.
    X = np.array([[1.0, 0.0], [1.0, 0.05], [0.8, 0.4], [0.0, 1.0], [0.05, 1.0]])
    union = build_knn_graph(X, k=1, mode="union")
    mutual = build_knn_graph(X, k=1, mode="mutual")
    assert graph_edges(mutual) <= graph_edges(union)
    assert mutual.edge_count < union.edge_count
    assert graph_edges(mutual) == brute_force_edges(X, 1, mode="mutual")


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 24),
    d=st.integers(2, 6),
    k=st.integers(1, 8),
    seed=st.integers(0, 2**32 - 1),
)
def test_graph_invariants_random(n, d, k, seed):
    k = min(k, n - 1)
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    g = build_knn_graph(X, k=k)

    assert g.edge_count <= n * k
    for u in range(n):
        nbrs, wts = g.neighbors(u)
        assert u not in nbrs
        assert (wts > 0).all()
        assert (np.diff(nbrs) > 0).all()
        for v, w in zip(nbrs, wts):
            back_n, back_w = g.neighbors(int(v))
            pos = np.searchsorted(back_n, u)
            assert pos < back_n.size and back_n[pos] == u
            assert back_w[pos] == w  # identical weight both directions

    again = build_knn_graph(X, k=k)
    assert np.array_equal(again.indices, g.indices)
    assert np.array_equal(again.weights, g.weights)

    assert graph_edges(g) == brute_force_edges(X, k)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 20), seed=st.integers(0, 2**32 - 1))
def test_edge_count_monotone_in_k(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4))
    counts = [build_knn_graph(X, k=k).edge_count for k in range(1, n)]
    assert all(counts[i + 1] >= counts[i] for i in range(len(counts) - 1))


def test_larger_exactness_case():
    rng = np.random.default_rng(99)
    X = rng.normal(size=(400, 16))
    g = build_knn_graph(X, k=9)
    assert graph_edges(g) == brute_force_edges(X, 9)


def test_exactness_at_full_test_scale():
    # 2,000 nodes spans several internal blocks, so this also covers the
    # block-boundary bookkeeping.
    rng = np.random.default_rng(5)
    X = rng.normal(size=(2000, 12))
    g = build_knn_graph(X, k=7)
    assert graph_edges(g) == brute_force_edges(X, 7)


def test_errors():
    X = np.eye(3)
    with pytest.raises(errors.TooFewNodesError):
        build_knn_graph(X[:1], k=1)
    with pytest.raises(errors.KTooLargeError):
        build_knn_graph(X, k=3)
    with pytest.raises(errors.ZeroNormError):
        build_knn_graph(np.array([[1.0, 0.0], [0.0, 0.0]]), k=1)
    with pytest.raises(ValueError):
        build_knn_graph(X, k=1, mode="bogus")


def test_edge_list_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    X = rng.normal(size=(12, 3))
    g = build_knn_graph(X, k=3)
    path = tmp_path / "edges.txt"
    g.save_edge_list(path)
    edges = []
    for line in path.read_text().splitlines():
        u, v, w = line.split()
        assert int(u) < int(v)
        edges.append((int(u), int(v), float(w)))
    back = KnnGraph.from_edges(12, edges)
    assert np.array_equal(back.indices, g.indices)
    assert np.array_equal(back.weights, g.weights)


def test_from_edges_validation():
    with pytest.raises(ValueError):
        KnnGraph.from_edges(3, [(0, 0, 1.0)])
    with pytest.raises(ValueError):
        KnnGraph.from_edges(3, [(0, 1, -1.0)])
    with pytest.raises(ValueError):
        KnnGraph.from_edges(2, [(0, 5, 1.0)])
