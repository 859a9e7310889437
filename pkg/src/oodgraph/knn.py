"""Cosine-weighted k-nearest-neighbor graph construction.

Neighbor search is exact (blocked dense similarity, no approximate index).
Candidate edges with cosine <= 0 are dropped so that downstream modularity
stays well-defined, then the survivors are symmetrized: "union" keeps an edge
if either endpoint selected it, "mutual" only if both did.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import KTooLargeError, TooFewNodesError, ZeroNormError
from .linalg import NORM_EPS

_BLOCK_ROWS = 512


@dataclass(frozen=True)
class KnnGraph:
    """Undirected weighted graph in CSR form; every edge is stored both ways.

    indptr/indices/weights follow the usual CSR layout over node_count rows,
    with neighbor ids sorted within each row and all weights > 0.
    """

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @property
    def edge_count(self) -> int:
        return self.indices.size // 2

    @property
    def total_weight(self) -> float:
        """Sum of undirected edge weights (the m of modularity)."""
        return float(self.weights.sum()) / 2.0

    def neighbors(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def degree_weights(self) -> np.ndarray:
        """Weighted degree of every node."""
        row_ids = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        return np.bincount(row_ids, weights=self.weights, minlength=self.node_count)

    @classmethod
    def from_edges(
        cls, node_count: int, edges: list[tuple[int, int, float]]
    ) -> "KnnGraph":
        """Build from undirected (u, v, w) triples; rejects self-loops and w <= 0."""
        pairs: dict[tuple[int, int], float] = {}
        for u, v, w in edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u}, {v}) outside {node_count} nodes")
            if not w > 0.0:
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in pairs and pairs[key] != w:
                raise ValueError(f"conflicting weights for edge {key}")
            pairs[key] = float(w)
        return cls._from_pairs(node_count, pairs)

    @classmethod
    def _from_pairs(cls, node_count: int, pairs: dict[tuple[int, int], float]) -> "KnnGraph":
        rows = np.empty(2 * len(pairs), dtype=np.int64)
        cols = np.empty(2 * len(pairs), dtype=np.int64)
        vals = np.empty(2 * len(pairs), dtype=np.float64)
        for idx, ((u, v), w) in enumerate(pairs.items()):
            rows[2 * idx], cols[2 * idx], vals[2 * idx] = u, v, w
            rows[2 * idx + 1], cols[2 * idx + 1], vals[2 * idx + 1] = v, u, w
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(node_count=node_count, indptr=indptr, indices=cols, weights=vals)

    def save_edge_list(self, path: str | Path) -> None:
        """Write one `u v w` line per undirected edge, u < v."""
        with open(path, "w", encoding="utf-8") as fh:
            for u in range(self.node_count):
                nbrs, wts = self.neighbors(u)
                for v, w in zip(nbrs, wts):
                    if u < v:
                        fh.write(f"{u} {v} {float(w)!r}\n")


def build_knn_graph(
    X: np.ndarray, k: int, *, mode: str = "union"
) -> KnnGraph:
    """Exact cosine KNN graph over the rows of X.

    Each node proposes directed edges to its k most-similar distinct others
    (ties broken by lower index); proposals with weight <= 0 are dropped
    before symmetrization.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise TooFewNodesError(f"graph needs n >= 2, got {n}")
    if not 1 <= k <= n - 1:
        raise KTooLargeError(f"k must be in [1, {n - 1}], got {k}")
    if mode not in ("union", "mutual"):
        raise ValueError(f"mode must be 'union' or 'mutual', got {mode!r}")

    norms = np.linalg.norm(X, axis=1)
    if (norms < NORM_EPS).any():
        raise ZeroNormError(int(np.nonzero(norms < NORM_EPS)[0][0]))
    unit = X / norms[:, None]

    # Directed candidate lists: top-k by similarity, ties to the lower index.
    proposals: list[dict[int, float]] = [dict() for _ in range(n)]
    all_idx = np.arange(n)
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        sims = unit[start:stop] @ unit.T
        sims = np.clip(sims, -1.0, 1.0)
        for local, u in enumerate(range(start, stop)):
            row = sims[local]
            order = np.lexsort((all_idx, -row))
            picked = 0
            for v in order:
                if v == u:
                    continue
                if row[v] > 0.0:
                    proposals[u][int(v)] = float(row[v])
                picked += 1
                if picked == k:
                    break

    pairs: dict[tuple[int, int], float] = {}
    for u in range(n):
        for v, w in proposals[u].items():
            key = (u, v) if u < v else (v, u)
            if mode == "union":
                pairs[key] = w
            else:
                if u < v and u in proposals[v]:
                    pairs[key] = w
    return KnnGraph._from_pairs(n, pairs)


def isolated_nodes(g: KnnGraph) -> np.ndarray:
    """Ascending indices of nodes with no edges."""
    degree = np.diff(g.indptr)
    return np.nonzero(degree == 0)[0]
