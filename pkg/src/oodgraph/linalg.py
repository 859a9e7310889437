"""Dense numerical kernels: cosine similarity, PCA, covariance fitting, Mahalanobis.

All computation is float64 internally; matrices that re-enter the pipeline as
embeddings are cast back to float32 on the way out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DegenerateDataError,
    DimMismatchError,
    TooFewSamplesError,
    ZeroNormError,
)

NORM_EPS = 1e-12


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimMismatchError(f"vectors of length {a.size} and {b.size}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < NORM_EPS or nb < NORM_EPS:
        raise ZeroNormError()
    sim = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, sim))


@dataclass(frozen=True)
class PcaModel:
    """Principal axes of a training matrix.

    mean: per-dimension mean of the training data, length d.
    components: p x d, rows orthonormal.
    explained_variance: length p, non-increasing, clamped at 0.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]


def fit_pca(
    X: np.ndarray,
    *,
    n_components: int | None = None,
    variance_fraction: float | None = None,
    max_components: int | None = None,
) -> PcaModel:
    """Fit PCA by SVD of the centered data.

    Exactly one of n_components / variance_fraction selects the target; with
    variance_fraction f, the smallest p whose cumulative explained variance
    reaches f * (total variance) is used. max_components caps either choice.

    Sign convention: each component's largest-magnitude entry is made positive,
    so refits of the same data produce identical axes.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise TooFewSamplesError(f"PCA needs n >= 2, got {n}")
    if (n_components is None) == (variance_fraction is None):
        raise ValueError("specify exactly one of n_components / variance_fraction")

    mean = X.mean(axis=0)
    centered = X - mean
    total_variance = float(np.sum(centered * centered)) / (n - 1)
    if total_variance < 1e-20:
        raise DegenerateDataError(f"total variance {total_variance:.3e} < 1e-20")

    # Thin SVD: right singular vectors are the principal axes, singular
    # values give explained variance s^2/(n-1).
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    eigvals = (s * s) / (n - 1)
    eigvals = np.maximum(eigvals, 0.0)

    p_max = min(n - 1, d)
    if n_components is not None:
        if not 1 <= n_components <= p_max:
            raise ValueError(f"n_components must be in [1, {p_max}], got {n_components}")
        p = int(n_components)
    else:
        if not 0.0 < variance_fraction <= 1.0:
            raise ValueError(f"variance_fraction must be in (0, 1], got {variance_fraction}")
        cumulative = np.cumsum(eigvals[:p_max])
        target = variance_fraction * total_variance
        hits = np.nonzero(cumulative >= target - 1e-12 * total_variance)[0]
        p = int(hits[0]) + 1 if hits.size else p_max
    if max_components is not None:
        p = min(p, int(max_components))

    components = vt[:p].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    return PcaModel(
        mean=mean,
        components=components,
        explained_variance=eigvals[:p].copy(),
    )


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    """Project rows onto the principal axes: row_i -> components @ (x_i - mean)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimMismatchError(
            f"matrix has {X.shape[-1]} columns, model expects {model.input_dim}"
        )
    return ((X - model.mean) @ model.components.T).astype(np.float32)


@dataclass(frozen=True)
class ClusterGaussian:
    """Centroid, covariance, and cached Cholesky factor of one cluster.

    The factor is of the regularized covariance S + ridge*I; Mahalanobis
    queries go through it, never through an explicit inverse.
    """

    centroid: np.ndarray
    covariance: np.ndarray
    ridge: float
    cholesky: np.ndarray
    member_count: int

    @property
    def dim(self) -> int:
        return self.centroid.shape[0]


def fit_gaussian(rows: np.ndarray, ridge_scale: float = 1e-3) -> ClusterGaussian:
    """Fit a Gaussian to the rows with scale-equivariant ridge regularization.

    Covariance is the unbiased (n-1) estimator for n >= 2, the zero matrix for
    a single row. The ridge is ridge_scale * trace(S)/p, or ridge_scale itself
    when the trace is zero, which keeps the factorization positive definite.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise TooFewSamplesError("need at least one row")
    n, p = rows.shape
    centroid = rows.mean(axis=0)
    if n >= 2:
        centered = rows - centroid
        cov = (centered.T @ centered) / (n - 1)
        cov = (cov + cov.T) / 2.0
    else:
        cov = np.zeros((p, p))
    trace = float(np.trace(cov))
    ridge = ridge_scale * trace / p if trace > 0.0 else float(ridge_scale)
    chol = np.linalg.cholesky(cov + ridge * np.eye(p))
    return ClusterGaussian(
        centroid=centroid,
        covariance=cov,
        ridge=ridge,
        cholesky=chol,
        member_count=n,
    )


def with_pooled_covariance(own: ClusterGaussian, pooled: ClusterGaussian) -> ClusterGaussian:
    """Keep a cluster's centroid but borrow the pooled covariance and factor."""
    if own.dim != pooled.dim:
        raise DimMismatchError(f"cluster dim {own.dim} vs pooled dim {pooled.dim}")
    return ClusterGaussian(
        centroid=own.centroid,
        covariance=pooled.covariance,
        ridge=pooled.ridge,
        cholesky=pooled.cholesky,
        member_count=own.member_count,
    )


def mahalanobis(x: np.ndarray, g: ClusterGaussian) -> float:
    """sqrt((x-mu)^T (S+ridge*I)^-1 (x-mu)) via the cached triangular factor."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != g.dim:
        raise DimMismatchError(f"vector of length {x.size}, Gaussian of dim {g.dim}")
    y = solve_triangular(g.cholesky, x - g.centroid, lower=True)
    return float(np.linalg.norm(y))


def mahalanobis_batch(X: np.ndarray, g: ClusterGaussian) -> np.ndarray:
    """Mahalanobis distance of every row of X to g, as a float64 vector."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != g.dim:
        raise DimMismatchError(f"matrix with {X.shape[-1]} columns, Gaussian of dim {g.dim}")
    Y = solve_triangular(g.cholesky, (X - g.centroid).T, lower=True)
    return np.sqrt(np.sum(Y * Y, axis=0))
