"""Graph-based out-of-distribution detection over embedding vectors."""

__version__ = "0.1.0"

from .community import Partition, kmeans, louvain, modularity
from .contrastive import ContrastiveBatch, info_nce_batch_loss, info_nce_pair_loss
from .io import load_embeddings, load_labels, save_embeddings, save_labels
from .knn import KnnGraph, build_knn_graph, isolated_nodes
from .linalg import (
    ClusterGaussian,
    PcaModel,
    cosine_similarity,
    fit_gaussian,
    fit_pca,
    mahalanobis,
    pca_transform,
)
from .metrics import EvalReport, accuracy, aupr, auroc, evaluate
from .pipeline import (
    OodModel,
    PipelineConfig,
    ScoreReport,
    calibrate_threshold,
    classify,
    fit,
    knn_raw_baseline,
    load_model,
    save_model,
    score,
)
from .synth import MixtureSpec, OodSpec, generate

__all__ = [
    "Partition", "kmeans", "louvain", "modularity",
    "ContrastiveBatch", "info_nce_batch_loss", "info_nce_pair_loss",
    "load_embeddings", "load_labels", "save_embeddings", "save_labels",
    "KnnGraph", "build_knn_graph", "isolated_nodes",
    "ClusterGaussian", "PcaModel", "cosine_similarity", "fit_gaussian",
    "fit_pca", "mahalanobis", "pca_transform",
    "EvalReport", "accuracy", "aupr", "auroc", "evaluate",
    "OodModel", "PipelineConfig", "ScoreReport", "calibrate_threshold",
    "classify", "fit", "knn_raw_baseline", "load_model", "save_model", "score",
    "MixtureSpec", "OodSpec", "generate",
]
