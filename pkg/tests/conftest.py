"""Shared fixtures: the synthetic benchmark and models fitted on it.

Session-scoped so the suite fits the benchmark once; everything downstream
treats the fixtures as immutable.
"""

import numpy as np
import pytest

from oodgraph import PipelineConfig, fit
from oodgraph.synth import MixtureSpec, OodSpec, generate

BENCHMARK_SPEC = MixtureSpec(
    cluster_count=10,
    dim=32,
    samples_per_cluster=200,
    center_scale=2.0,
    within_std=1.0,
    seed=7,
    ood=OodSpec(mode="shifted", magnitude=8.0, count=1000),
)

# Same ID distribution, OOD pushed just past the decision boundary; used by
# the threshold-sweep experiment, which needs imperfect detection.
NEAR_OOD_SPEC = MixtureSpec(
    cluster_count=10,
    dim=32,
    samples_per_cluster=200,
    center_scale=2.0,
    within_std=1.0,
    seed=7,
    ood=OodSpec(mode="shifted", magnitude=4.5, count=1000),
)

# Heavily overlapping clusters with a sub-sigma-scale OOD shift; stands in
# for raw pixel features where nearest-neighbor distances barely separate.
OVERLAP_SPEC = MixtureSpec(
    cluster_count=10,
    dim=32,
    samples_per_cluster=200,
    center_scale=0.5,
    within_std=1.0,
    seed=7,
    ood=OodSpec(mode="shifted", magnitude=1.5, count=1000),
)

BENCHMARK_CONFIG = PipelineConfig(k=7, pca_variance=0.95, ridge_scale=1e-3, seed=7)


@pytest.fixture(scope="session")
def benchmark_data():
    return generate(BENCHMARK_SPEC)


@pytest.fixture(scope="session")
def benchmark_model(benchmark_data):
    X_id, _, _ = benchmark_data
    return fit(X_id, BENCHMARK_CONFIG)


def split_even_odd(X_id: np.ndarray, per_cluster: int, cluster_count: int):
    """Disjoint reference/query halves, stratified per cluster."""
    ref, query = [], []
    for c in range(cluster_count):
        block = X_id[c * per_cluster : (c + 1) * per_cluster]
        ref.append(block[0::2])
        query.append(block[1::2])
    return np.vstack(ref), np.vstack(query)
