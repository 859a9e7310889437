"""Standalone InfoNCE loss over paired augmented views.

Rows 2t and 2t+1 of a batch are the two views of sample t. Similarity is
cosine, so the loss is invariant to per-row positive scaling. Log-sum-exp
uses max subtraction, so nothing overflows for |sim/temperature| up to 700.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRangeError, SamePairError, ZeroNormError
from .linalg import NORM_EPS


@dataclass(frozen=True)
class ContrastiveBatch:
    """2N x d embeddings plus the softmax temperature."""

    embeddings: np.ndarray
    temperature: float

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] < 2 or emb.shape[0] % 2 != 0:
            raise ValueError(f"embeddings must be 2N x d with N >= 1, got {emb.shape}")
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        norms = np.linalg.norm(emb, axis=1)
        if (norms < NORM_EPS).any():
            raise ZeroNormError(int(np.nonzero(norms < NORM_EPS)[0][0]))
        object.__setattr__(self, "embeddings", emb)

    @property
    def batch_size(self) -> int:
        return self.embeddings.shape[0] // 2

    def unit_rows(self) -> np.ndarray:
        norms = np.linalg.norm(self.embeddings, axis=1, keepdims=True)
        return self.embeddings / norms


def info_nce_pair_loss(batch: ContrastiveBatch, i: int, j: int) -> float:
    """Loss of the ordered positive pair (i, j).

    -log[ exp(sim(z_i,z_j)/t) / sum_{k != i} exp(sim(z_i,z_k)/t) ], which is
    log-sum-exp over the negatives minus the positive logit; always >= 0
    because the positive term appears in the denominator sum.
    """
    rows = batch.embeddings.shape[0]
    if not (0 <= i < rows and 0 <= j < rows):
        raise IndexOutOfRangeError(f"indices ({i}, {j}) outside 2N={rows}")
    if i == j:
        raise SamePairError(f"positive pair needs two distinct rows, got ({i}, {j})")

    unit = batch.unit_rows()
    sims = unit @ unit[i]
    sims = np.clip(sims, -1.0, 1.0)
    logits = np.delete(sims, i) / batch.temperature
    positive = sims[j] / batch.temperature

    # lse >= m >= positive holds in float too, so the result is never negative.
    m = float(np.max(logits))
    lse = m + float(np.log(np.sum(np.exp(logits - m))))
    return lse - float(positive)


def info_nce_batch_loss(batch: ContrastiveBatch) -> float:
    """Mean pair loss over all 2N ordered positive pairs (2t,2t+1) and (2t+1,2t)."""
    total = 0.0
    for t in range(batch.batch_size):
        total += info_nce_pair_loss(batch, 2 * t, 2 * t + 1)
        total += info_nce_pair_loss(batch, 2 * t + 1, 2 * t)
    return total / (2 * batch.batch_size)
