"""Two-phase OOD detection: fit clusters on in-distribution data, then score.

Fitting runs PCA -> cosine KNN graph -> community detection -> per-cluster
Gaussians. Scoring is the minimum Mahalanobis distance over clusters, with an
optional percentile threshold turning scores into binary OOD flags.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .community import Partition, canonical_labels, kmeans, louvain, modularity
from .errors import (
    AllNodesIsolatedError,
    DegenerateDataError,
    DimMismatchError,
    EmptyGraphError,
    EmptyHoldoutError,
    KTooLargeError,
    TooFewSamplesError,
)
from .io import validate_embeddings
from .knn import build_knn_graph
from .linalg import (
    ClusterGaussian,
    PcaModel,
    fit_gaussian,
    fit_pca,
    mahalanobis_batch,
    pca_transform,
    with_pooled_covariance,
)

MODEL_SCHEMA_VERSION = 1
ZERO_ROW_EPS = 1e-12


@dataclass(frozen=True)
class PipelineConfig:
    """Everything fit() needs; defaults mirror the CLI."""

    k: int = 7
    pca_variance: float | None = 0.95
    pca_components: int | None = None
    pca_max_components: int = 128
    ridge_scale: float = 1e-3
    seed: int = 0
    clusterer: str = "louvain"
    kmeans_clusters: int | None = None  # None: reuse louvain's cluster count
    resolution: float = 1.0
    knn_mode: str = "union"

    def __post_init__(self):
        if self.clusterer not in ("louvain", "kmeans"):
            raise ValueError(f"clusterer must be louvain or kmeans, got {self.clusterer!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class OodModel:
    """Fitted artifacts: PCA, per-cluster Gaussians, pooled fallback, threshold."""

    pca: PcaModel
    clusters: tuple[ClusterGaussian, ...]
    pooled: ClusterGaussian
    threshold: float | None
    fit_metadata: dict

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)


@dataclass(frozen=True)
class ScoreReport:
    """Per-sample min-Mahalanobis score, nearest cluster, and optional flag."""

    scores: np.ndarray
    nearest_cluster: np.ndarray
    is_ood: np.ndarray | None = None

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,score,nearest_cluster,is_ood\n")
            for i in range(self.scores.size):
                flag = "" if self.is_ood is None else str(bool(self.is_ood[i])).lower()
                fh.write(f"{i},{float(self.scores[i])!r},{int(self.nearest_cluster[i])},{flag}\n")


def fit(X_id: np.ndarray, config: PipelineConfig = PipelineConfig()) -> OodModel:
    """Phase 1: fit PCA, graph, clusters, and Gaussians on in-distribution data."""
    X = validate_embeddings(X_id)
    n, d = X.shape
    if n < 10:
        raise TooFewSamplesError(f"fit needs at least 10 samples, got {n}")

    try:
        if config.pca_components is not None:
            pca = fit_pca(X, n_components=min(config.pca_components, n - 1, d))
        else:
            pca = fit_pca(
                X,
                variance_fraction=config.pca_variance,
                max_components=config.pca_max_components,
            )
    except DegenerateDataError:
        # All rows identical: no geometry to cluster, fall through to a
        # single pooled cluster around the common point.
        return _fit_degenerate(X, config)

    T = pca_transform(pca, X)
    p = pca.output_dim

    # Rows that landed on the origin have no cosine direction; treat them as
    # isolated up front, like nodes that lose all their edges.
    norms = np.linalg.norm(T.astype(np.float64), axis=1)
    active = np.nonzero(norms >= ZERO_ROW_EPS)[0]
    if active.size < 2:
        raise AllNodesIsolatedError("fewer than two rows have a usable direction")

    graph = build_knn_graph(T[active], config.k, mode=config.knn_mode)
    if graph.edge_count == 0:
        raise AllNodesIsolatedError("every candidate edge had non-positive cosine")

    try:
        louvain_part = louvain(graph, resolution=config.resolution, seed=config.seed)
    except EmptyGraphError as exc:
        raise AllNodesIsolatedError(str(exc)) from exc

    if config.clusterer == "louvain":
        part = louvain_part
    else:
        k_clusters = config.kmeans_clusters or louvain_part.cluster_count
        graph_active = np.nonzero(np.diff(graph.indptr) > 0)[0]
        if k_clusters > graph_active.size:
            raise KTooLargeError(
                f"{k_clusters} clusters for {graph_active.size} clusterable rows"
            )
        km = kmeans(np.asarray(T[active][graph_active], dtype=np.float64),
                    k_clusters, seed=config.seed)
        raw = np.full(graph.node_count, -1, dtype=np.int64)
        raw[graph_active] = km.labels
        labels, count = canonical_labels(raw)
        part = Partition(labels=labels, cluster_count=count,
                         modularity=modularity(graph, labels, config.resolution))

    # Map graph-local labels back to original row indices.
    labels_full = np.full(n, -1, dtype=np.int64)
    labels_full[active] = part.labels
    isolated_count = int(n - np.count_nonzero(labels_full >= 0))

    pooled = fit_gaussian(np.asarray(T, dtype=np.float64), config.ridge_scale)
    clusters = []
    small_cutoff = max(10, p)
    for c in range(part.cluster_count):
        rows = np.asarray(T[labels_full == c], dtype=np.float64)
        g = fit_gaussian(rows, config.ridge_scale)
        if g.member_count < small_cutoff:
            g = with_pooled_covariance(g, pooled)
        clusters.append(g)

    metadata = {
        "n_train": n,
        "input_dim": d,
        "train_labels": labels_full.tolist(),
        "pca_components": p,
        "pca_target": (
            {"components": config.pca_components}
            if config.pca_components is not None
            else {"variance_fraction": config.pca_variance,
                  "max_components": config.pca_max_components}
        ),
        "k": config.k,
        "knn_mode": config.knn_mode,
        "seed": config.seed,
        "ridge_scale": config.ridge_scale,
        "clusterer": config.clusterer,
        "cluster_count": part.cluster_count,
        "isolated_count": isolated_count,
        "edge_count": graph.edge_count,
        "modularity": part.modularity,
        "resolution": config.resolution,
        "calibration": None,
    }
    return OodModel(
        pca=pca,
        clusters=tuple(clusters),
        pooled=pooled,
        threshold=None,
        fit_metadata=metadata,
    )


def _fit_degenerate(X: np.ndarray, config: PipelineConfig) -> OodModel:
    n, d = X.shape
    cap = config.pca_components or config.pca_max_components
    p = min(d, cap)
    pca = PcaModel(
        mean=np.asarray(X, dtype=np.float64).mean(axis=0),
        components=np.eye(p, d),
        explained_variance=np.zeros(p),
    )
    T = pca_transform(pca, X)
    pooled = fit_gaussian(np.asarray(T, dtype=np.float64), config.ridge_scale)
    metadata = {
        "n_train": n,
        "input_dim": d,
        "train_labels": [0] * n,
        "pca_components": p,
        "pca_target": "degenerate",
        "k": config.k,
        "knn_mode": config.knn_mode,
        "seed": config.seed,
        "ridge_scale": config.ridge_scale,
        "clusterer": config.clusterer,
        "cluster_count": 1,
        "isolated_count": 0,
        "edge_count": 0,
        "modularity": None,
        "resolution": config.resolution,
        "calibration": None,
    }
    return OodModel(
        pca=pca, clusters=(pooled,), pooled=pooled, threshold=None, fit_metadata=metadata
    )


def score(model: OodModel, X: np.ndarray) -> ScoreReport:
    """Phase 2: min Mahalanobis distance over clusters for every row of X."""
    X = validate_embeddings(X)
    if X.shape[1] != model.pca.input_dim:
        raise DimMismatchError(
            f"queries have {X.shape[1]} dims, model expects {model.pca.input_dim}"
        )
    T = np.asarray(pca_transform(model.pca, X), dtype=np.float64)
    distances = np.stack(
        [mahalanobis_batch(T, g) for g in model.clusters], axis=1
    )
    nearest = np.argmin(distances, axis=1)  # ties go to the smallest cluster id
    scores = distances[np.arange(T.shape[0]), nearest]
    report = ScoreReport(scores=scores, nearest_cluster=nearest.astype(np.int64))
    if model.threshold is not None:
        report = classify(report, model.threshold)
    return report


def calibrate_threshold(
    model: OodModel, X_id_holdout: np.ndarray, percentile: float = 95.0
) -> OodModel:
    """Set the decision threshold at the nearest-rank percentile of holdout scores."""
    if not 0.0 < percentile <= 100.0:
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    holdout = np.asarray(X_id_holdout)
    if holdout.size == 0:
        raise EmptyHoldoutError("calibration holdout is empty")
    scores = np.sort(score(model, holdout).scores)
    # Nearest-rank: 1-based index ceil(percentile/100 * n), exact rational math
    # so boundary cases like percentile=95, n=20 never drift off by one.
    rank = math.ceil(Fraction(percentile) * scores.size / 100)
    threshold = float(scores[rank - 1])
    digest = hashlib.sha256(validate_embeddings(holdout).tobytes()).hexdigest()
    metadata = dict(model.fit_metadata)
    metadata["calibration"] = {
        "percentile": percentile,
        "holdout_size": int(scores.size),
        "holdout_sha256": digest,
        "threshold": threshold,
    }
    return replace(model, threshold=threshold, fit_metadata=metadata)


def classify(report: ScoreReport, threshold: float) -> ScoreReport:
    """Flag samples whose score strictly exceeds the threshold."""
    return replace(report, is_ood=report.scores > threshold)


def knn_raw_baseline(X_id: np.ndarray, X_query: np.ndarray, k: int) -> np.ndarray:
    """Mean Euclidean distance to the k nearest in-distribution rows.

    The reference detector that skips embeddings, graphs, and clustering;
    higher means more OOD.
    """
    A = np.asarray(validate_embeddings(X_id), dtype=np.float64)
    Q = np.asarray(validate_embeddings(X_query), dtype=np.float64)
    if A.shape[1] != Q.shape[1]:
        raise DimMismatchError(f"queries have {Q.shape[1]} dims, ID rows {A.shape[1]}")
    if k > A.shape[0]:
        raise KTooLargeError(f"k={k} exceeds {A.shape[0]} in-distribution rows")
    out = np.empty(Q.shape[0])
    block = 256
    a_sq = np.sum(A * A, axis=1)
    for start in range(0, Q.shape[0], block):
        q = Q[start : start + block]
        d_sq = np.maximum(
            np.sum(q * q, axis=1)[:, None] - 2.0 * (q @ A.T) + a_sq[None, :], 0.0
        )
        part = np.partition(d_sq, k - 1, axis=1)[:, :k]
        out[start : start + block] = np.sqrt(part).mean(axis=1)
    return out


# --- model artifact serialization ---

def _gaussian_to_json(g: ClusterGaussian) -> dict:
    return {
        "centroid": g.centroid.tolist(),
        "covariance": g.covariance.tolist(),
        "ridge": g.ridge,
        "member_count": g.member_count,
    }


def _gaussian_from_json(doc: dict) -> ClusterGaussian:
    cov = np.asarray(doc["covariance"], dtype=np.float64)
    ridge = float(doc["ridge"])
    return ClusterGaussian(
        centroid=np.asarray(doc["centroid"], dtype=np.float64),
        covariance=cov,
        ridge=ridge,
        cholesky=np.linalg.cholesky(cov + ridge * np.eye(cov.shape[0])),
        member_count=int(doc["member_count"]),
    )


def save_model(model: OodModel, path: str | Path) -> None:
    """Write the model as a schema-versioned JSON document."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "pca": {
            "mean": model.pca.mean.tolist(),
            "components": model.pca.components.tolist(),
            "explained_variance": model.pca.explained_variance.tolist(),
        },
        "clusters": [_gaussian_to_json(g) for g in model.clusters],
        "pooled": _gaussian_to_json(model.pooled),
        "threshold": model.threshold,
        "fit_metadata": model.fit_metadata,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path: str | Path) -> OodModel:
    """Read a model artifact; scores reproduce the pre-save model's exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {version!r}")
    pca = PcaModel(
        mean=np.asarray(doc["pca"]["mean"], dtype=np.float64),
        components=np.asarray(doc["pca"]["components"], dtype=np.float64),
        explained_variance=np.asarray(doc["pca"]["explained_variance"], dtype=np.float64),
    )
    return OodModel(
        pca=pca,
        clusters=tuple(_gaussian_from_json(g) for g in doc["clusters"]),
        pooled=_gaussian_from_json(doc["pooled"]),
        threshold=doc["threshold"],
        fit_metadata=doc["fit_metadata"],
    )
