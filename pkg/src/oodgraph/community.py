"""Graph partitioning: weighted Newman-Girvan modularity, Louvain, and K-means.

Louvain here is the classic two-phase heuristic (local moves, then graph
aggregation) run to a fixed gain threshold. It is deliberately sequential:
the heuristic is visit-order sensitive, so the visit order is a seeded
shuffle per pass and everything downstream is reproducible from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGraphError, KTooLargeError, UnassignedNodeError
from .knn import KnnGraph

GAIN_TOLERANCE = 1e-7


@dataclass(frozen=True)
class Partition:
    """Cluster assignment per node; -1 marks nodes excluded from clustering."""

    labels: np.ndarray
    cluster_count: int
    modularity: float | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if self.cluster_count < 1:
            raise ValueError("partition needs at least one cluster")
        assigned = labels[labels >= 0]
        if assigned.size == 0:
            raise ValueError("no node is assigned")
        present = np.unique(assigned)
        if present[-1] >= self.cluster_count or present.size != self.cluster_count:
            raise ValueError("cluster ids must be contiguous in [0, cluster_count)")


def canonical_labels(raw: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel clusters by first occurrence in node order; -1 passes through."""
    raw = np.asarray(raw, dtype=np.int64)
    mapping: dict[int, int] = {}
    out = np.full(raw.shape, -1, dtype=np.int64)
    for idx, value in enumerate(raw):
        if value < 0:
            continue
        if value not in mapping:
            mapping[value] = len(mapping)
        out[idx] = mapping[value]
    return out, len(mapping)


def modularity(g: KnnGraph, partition: Partition | np.ndarray, resolution: float = 1.0) -> float:
    """Newman-Girvan modularity Q of the partition on g.

    Q = sum_c [ W_in(c)/(2m) - resolution * (S_c/(2m))^2 ], with W_in the
    intra-community weight over ordered pairs and S_c the community strength.
    """
    labels = partition.labels if isinstance(partition, Partition) else np.asarray(partition)
    labels = labels.astype(np.int64)
    if labels.shape[0] != g.node_count:
        raise UnassignedNodeError(
            f"{labels.shape[0]} labels for a graph of {g.node_count} nodes"
        )
    two_m = float(g.weights.sum())
    if two_m <= 0.0:
        raise EmptyGraphError("modularity is undefined on a graph with no edges")

    degrees = g.degree_weights()
    unassigned = (labels < 0) & (degrees > 0)
    if unassigned.any():
        raise UnassignedNodeError(f"node {int(np.nonzero(unassigned)[0][0])} is unassigned")

    n_clusters = int(labels.max()) + 1
    row_ids = np.repeat(np.arange(g.node_count), np.diff(g.indptr))
    same = labels[row_ids] == labels[g.indices]
    w_in = np.bincount(
        labels[row_ids[same]], weights=g.weights[same], minlength=n_clusters
    )
    strength = np.bincount(
        labels[labels >= 0], weights=degrees[labels >= 0], minlength=n_clusters
    )
    return float(np.sum(w_in / two_m - resolution * (strength / two_m) ** 2))


class _LevelGraph:
    """Working graph for one Louvain level: symmetric dict adjacency + self loops."""

    def __init__(self, adj: list[dict[int, float]], self_weights: np.ndarray):
        self.adj = adj
        self.self_weights = self_weights
        self.strength = np.array(
            [sum(nbrs.values()) for nbrs in adj], dtype=np.float64
        ) + self_weights
        self.two_m = float(self.strength.sum())

    @property
    def size(self) -> int:
        return len(self.adj)

    def modularity(self, node2com: np.ndarray, resolution: float) -> float:
        w_in = np.zeros(int(node2com.max()) + 1)
        s_tot = np.zeros_like(w_in)
        for u, nbrs in enumerate(self.adj):
            cu = node2com[u]
            s_tot[cu] += self.strength[u]
            w_in[cu] += self.self_weights[u]
            for v, w in nbrs.items():
                if node2com[v] == cu:
                    w_in[cu] += w
        return float(np.sum(w_in / self.two_m - resolution * (s_tot / self.two_m) ** 2))


def _local_moving(
    level: _LevelGraph, resolution: float, rng: np.random.Generator
) -> tuple[np.ndarray, bool]:
    """One level of local moves; returns (node2com, any_move_made)."""
    n = level.size
    node2com = np.arange(n, dtype=np.int64)
    com_strength = level.strength.copy()
    m = level.two_m / 2.0
    moved_any = False

    while True:
        pass_gain = 0.0
        pass_moves = 0
        for u in rng.permutation(n):
            a = node2com[u]
            s_u = level.strength[u]

            # Weight from u into each adjacent community (u itself excluded).
            k_u: dict[int, float] = {a: 0.0}
            for v, w in level.adj[u].items():
                c = node2com[v]
                k_u[c] = k_u.get(c, 0.0) + w

            com_strength[a] -= s_u  # take u out before comparing candidates
            stay_gain = k_u[a] / m - resolution * s_u * com_strength[a] / (2.0 * m * m)

            best_com, best_gain = a, stay_gain
            for c in sorted(k_u):
                if c == a:
                    continue
                gain = k_u[c] / m - resolution * s_u * com_strength[c] / (2.0 * m * m)
                if gain > best_gain:
                    best_com, best_gain = c, gain

            com_strength[best_com] += s_u
            if best_com != a:
                delta_q = best_gain - stay_gain
                assert delta_q > 0.0, "accepted move must strictly increase modularity"
                node2com[u] = best_com
                pass_gain += delta_q
                pass_moves += 1
                moved_any = True
        if pass_moves == 0 or pass_gain <= GAIN_TOLERANCE:
            break
    return node2com, moved_any


def _aggregate(level: _LevelGraph, node2com: np.ndarray) -> tuple[_LevelGraph, np.ndarray]:
    """Collapse communities into super-nodes; intra weight becomes self loops.

    Returns the aggregate graph and the community-id -> super-node mapping
    (communities carry the id of their founding node, which may itself have
    moved on, so the mapping must be keyed by community id, not by node).
    """
    com_ids = np.unique(node2com)
    com_to_new = np.full(level.size, -1, dtype=np.int64)
    com_to_new[com_ids] = np.arange(com_ids.size)
    compact = com_to_new[node2com]  # old node -> new node

    n_new = com_ids.size
    adj: list[dict[int, float]] = [dict() for _ in range(n_new)]
    self_w = np.zeros(n_new)
    for u, nbrs in enumerate(level.adj):
        cu = compact[u]
        self_w[cu] += level.self_weights[u]
        for v, w in nbrs.items():
            cv = compact[v]
            if cu == cv:
                self_w[cu] += w  # ordered pairs: (u,v) and (v,u) both land here
            else:
                adj[cu][cv] = adj[cu].get(cv, 0.0) + w
    return _LevelGraph(adj, self_w), com_to_new


def louvain(g: KnnGraph, resolution: float = 1.0, seed: int = 0) -> Partition:
    """Louvain community detection on the non-isolated nodes of g.

    Deterministic given (g, resolution, seed). Isolated nodes get label -1;
    the returned modularity is recomputed on g from the final assignment.
    """
    if g.edge_count == 0:
        raise EmptyGraphError("louvain needs at least one edge")
    degrees = g.degree_weights()
    active = np.nonzero(np.diff(g.indptr) > 0)[0]
    local_of = {int(node): i for i, node in enumerate(active)}

    adj: list[dict[int, float]] = [dict() for _ in range(active.size)]
    for i, u in enumerate(active):
        nbrs, wts = g.neighbors(int(u))
        adj[i] = {local_of[int(v)]: float(w) for v, w in zip(nbrs, wts)}
    level = _LevelGraph(adj, np.zeros(active.size))

    rng = np.random.Generator(np.random.PCG64(seed))
    membership = np.arange(active.size, dtype=np.int64)  # active node -> community
    prev_q = level.modularity(membership, resolution)

    while True:
        node2com, moved = _local_moving(level, resolution, rng)
        if not moved:
            break
        level, com_to_new = _aggregate(level, node2com)
        membership = com_to_new[node2com[membership]]
        q_now = level.modularity(np.arange(level.size, dtype=np.int64), resolution)
        assert q_now >= prev_q - 1e-9, "modularity must be non-decreasing across levels"
        prev_q = q_now
        if level.size == 1:
            break

    labels = np.full(g.node_count, -1, dtype=np.int64)
    labels[active] = membership
    labels, count = canonical_labels(labels)
    q = modularity(g, labels, resolution)
    # The flattened labels must describe the same partition the level
    # hierarchy converged to; any bookkeeping slip shows up as a Q gap here.
    assert abs(q - prev_q) <= 1e-6, "flattened labels disagree with final level"
    return Partition(labels=labels, cluster_count=count, modularity=q)


def kmeans(
    X: np.ndarray, k: int, seed: int = 0, max_iters: int = 300
) -> Partition:
    """Lloyd's algorithm with greedy k-means++ seeding, deterministic per seed.

    Empty clusters are re-seeded from the point farthest from its assigned
    centroid. Stops when assignments stabilize or max_iters is reached.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise KTooLargeError(f"k must be in [1, {n}], got {k}")
    rng = np.random.Generator(np.random.PCG64(seed))

    centers = _kmeans_pp_init(X, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    prev_inertia = np.inf
    for _ in range(max_iters):
        dist_sq = _sq_distances(X, centers)
        new_labels = np.argmin(dist_sq, axis=1)  # ties go to the lowest center id
        assigned_sq = dist_sq[np.arange(n), new_labels]

        for empty in np.nonzero(np.bincount(new_labels, minlength=k) == 0)[0]:
            far = int(np.argmax(assigned_sq))
            new_labels[far] = empty
            assigned_sq[far] = 0.0

        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = X[labels == c]
            if members.size:
                centers[c] = members.mean(axis=0)
        inertia = float(np.sum(_sq_distances(X, centers)[np.arange(n), labels]))
        assert inertia <= prev_inertia + 1e-9 * max(1.0, abs(prev_inertia)), (
            "k-means inertia must be non-increasing"
        )
        prev_inertia = inertia

    labels, count = canonical_labels(labels)
    return Partition(labels=labels, cluster_count=count, modularity=None)


def kmeans_inertia(X: np.ndarray, labels: np.ndarray) -> float:
    """Sum of squared distances to per-cluster means for a given assignment."""
    X = np.asarray(X, dtype=np.float64)
    total = 0.0
    for c in np.unique(labels):
        members = X[labels == c]
        total += float(np.sum((members - members.mean(axis=0)) ** 2))
    return total


def _sq_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clamped at 0 against rounding."""
    sq = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * (X @ centers.T)
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: several candidates per step, keep the best potential."""
    n = X.shape[0]
    n_candidates = 2 + int(np.log(k)) if k > 1 else 1
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    closest_sq = _sq_distances(X, centers[:1])[:, 0]
    for c in range(1, k):
        potential = float(closest_sq.sum())
        if potential > 0.0:
            candidates = rng.choice(n, size=n_candidates, p=closest_sq / potential)
        else:
            candidates = rng.integers(n, size=n_candidates)
        best_pot, best_closest, best_idx = np.inf, None, None
        for cand in candidates:
            cand_sq = _sq_distances(X, X[int(cand)][None, :])[:, 0]
            new_closest = np.minimum(closest_sq, cand_sq)
            pot = float(new_closest.sum())
            if pot < best_pot:
                best_pot, best_closest, best_idx = pot, new_closest, int(cand)
        centers[c] = X[best_idx]
        closest_sq = best_closest
    return centers
