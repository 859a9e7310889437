"""Seeded synthetic Gaussian-mixture data: the desk-scale benchmark generator.

Every random draw comes from a Philox stream keyed by (seed, stream id), one
stream per cluster plus dedicated streams for centers and OOD samples, so
adding clusters never perturbs the draws of earlier clusters. Normal samples
come from an explicit Box-Muller transform of uniforms, keeping fixtures
bit-stable across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_CENTER_STREAM = 0x10_000
_OOD_STREAM = 0x20_000


@dataclass(frozen=True)
class OodSpec:
    """How to draw the out-of-distribution samples.

    shifted: mixture samples displaced by magnitude * within_std along one
             seeded random direction.
    inflated: mixture samples with noise scaled by magnitude.
    uniform: uniform box samples spanning magnitude * center_scale per axis.
    """

    mode: str = "shifted"
    magnitude: float = 8.0
    count: int = 1000

    def __post_init__(self):
        if self.mode not in ("shifted", "inflated", "uniform"):
            raise ValueError(f"unknown OOD mode {self.mode!r}")
        if self.count < 1:
            raise ValueError("ood count must be >= 1")
        if not self.magnitude > 0:
            raise ValueError("ood magnitude must be > 0")


@dataclass(frozen=True)
class MixtureSpec:
    """Isotropic Gaussian mixture with cluster centers in a uniform box."""

    cluster_count: int = 10
    dim: int = 32
    samples_per_cluster: int = 200
    center_scale: float = 2.0
    within_std: float = 1.0
    seed: int = 0
    ood: OodSpec = field(default_factory=OodSpec)

    def __post_init__(self):
        if self.cluster_count < 1 or self.dim < 1 or self.samples_per_cluster < 1:
            raise ValueError("counts must be >= 1")
        if not (self.center_scale > 0 and self.within_std >= 0):
            raise ValueError("scales must be positive (within_std may be 0)")


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _normals(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Box-Muller on uniform draws; platform-independent by construction."""
    count = int(np.prod(shape))
    pairs = (count + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # in (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2.0 * math.pi * u2),
                        radius * np.sin(2.0 * math.pi * u2)])
    return z[:count].reshape(shape)


def generate(spec: MixtureSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw (X_id, X_ood, id_cluster_labels), deterministic per spec.

    ID rows are grouped by cluster: rows [c*s, (c+1)*s) belong to cluster c.
    """
    centers_rng = _stream(spec.seed, _CENTER_STREAM)
    centers = centers_rng.uniform(
        -spec.center_scale, spec.center_scale, size=(spec.cluster_count, spec.dim)
    )

    per = spec.samples_per_cluster
    X_id = np.empty((spec.cluster_count * per, spec.dim), dtype=np.float32)
    labels = np.empty(spec.cluster_count * per, dtype=np.int64)
    for c in range(spec.cluster_count):
        rng = _stream(spec.seed, c)
        noise = _normals(rng, (per, spec.dim)) * spec.within_std
        X_id[c * per : (c + 1) * per] = (centers[c] + noise).astype(np.float32)
        labels[c * per : (c + 1) * per] = c

    ood_rng = _stream(spec.seed, _OOD_STREAM)
    ood = spec.ood
    assignments = ood_rng.integers(spec.cluster_count, size=ood.count)
    if ood.mode == "shifted":
        direction = _normals(ood_rng, (spec.dim,))
        direction /= np.linalg.norm(direction)
        offset = ood.magnitude * spec.within_std * direction
        noise = _normals(ood_rng, (ood.count, spec.dim)) * spec.within_std
        X_ood = centers[assignments] + noise + offset
    elif ood.mode == "inflated":
        noise = _normals(ood_rng, (ood.count, spec.dim)) * spec.within_std * ood.magnitude
        X_ood = centers[assignments] + noise
    else:  # uniform
        half = ood.magnitude * spec.center_scale
        X_ood = ood_rng.uniform(-half, half, size=(ood.count, spec.dim))

    return X_id, X_ood.astype(np.float32), labels
