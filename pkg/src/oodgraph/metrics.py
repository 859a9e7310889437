"""Detection metrics: AUROC (midrank Mann-Whitney), average precision, accuracy.

OOD is the positive class throughout, and higher score means more OOD.
Tie conventions are pinned exactly: midranks for AUROC, one curve point per
distinct threshold for average precision, because serialized scores do tie.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, LengthMismatchError, NonFiniteScoreError


@dataclass(frozen=True)
class EvalReport:
    """Threshold-independent metrics plus optional thresholded accuracy."""

    auroc: float
    aupr: float
    n_id: int
    n_ood: int
    accuracy_at_threshold: float | None = None
    threshold: float | None = None

    def to_json(self, path: str | Path) -> None:
        doc = {
            "auroc": self.auroc,
            "aupr": self.aupr,
            "accuracy_at_threshold": self.accuracy_at_threshold,
            "counts": {"n_id": self.n_id, "n_ood": self.n_ood},
            "threshold": self.threshold,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def evaluate(scores_id, scores_ood, *, predicted=None, truth=None,
             threshold=None) -> EvalReport:
    """Bundle AUROC/AUPR (and accuracy, when flags are supplied) in one report."""
    acc = accuracy(predicted, truth) if predicted is not None else None
    return EvalReport(
        auroc=auroc(scores_id, scores_ood),
        aupr=aupr(scores_id, scores_ood),
        n_id=len(scores_id),
        n_ood=len(scores_ood),
        accuracy_at_threshold=acc,
        threshold=threshold,
    )


def _check_scores(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise EmptyInputError(f"{name} scores are empty")
    if not np.isfinite(arr).all():
        raise NonFiniteScoreError(f"{name} scores contain NaN/Inf")
    return arr


def auroc(scores_id, scores_ood) -> float:
    """P(random OOD score > random ID score), ties counting one half.

    Computed as the Mann-Whitney statistic from midranks of the pooled
    sample: [sum of OOD ranks - n_ood(n_ood+1)/2] / (n_id * n_ood).
    """
    sid = _check_scores(scores_id, "in-distribution")
    sood = _check_scores(scores_ood, "OOD")
    pooled = np.concatenate([sid, sood])
    ranks = _midranks(pooled)
    rank_sum = float(ranks[sid.size:].sum())
    n_ood = sood.size
    u = rank_sum - n_ood * (n_ood + 1) / 2.0
    return u / (sid.size * n_ood)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged (exact half-integers)."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    return ranks


def aupr(scores_id, scores_ood) -> float:
    """Average precision with OOD positive.

    The precision-recall curve is walked over distinct score thresholds,
    descending; AP = sum over thresholds of (recall step) * (precision after
    consuming the whole tie group). Equal scores therefore contribute one
    curve point, which makes all-tied inputs score at the positive prevalence.
    """
    sid = _check_scores(scores_id, "in-distribution")
    sood = _check_scores(scores_ood, "OOD")
    scores = np.concatenate([sid, sood])
    positive = np.concatenate([np.zeros(sid.size, bool), np.ones(sood.size, bool)])
    order = np.argsort(-scores, kind="stable")
    scores, positive = scores[order], positive[order]

    n_pos = sood.size
    ap = 0.0
    seen = 0
    hits = 0
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and scores[j + 1] == scores[i]:
            j += 1
        group_hits = int(np.count_nonzero(positive[i : j + 1]))
        seen += j + 1 - i
        hits += group_hits
        if group_hits:
            ap += (group_hits / n_pos) * (hits / seen)
        i = j + 1
    return ap


def accuracy(predicted_ood: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of samples whose OOD flag matches the 0/1 truth labels."""
    pred = np.asarray(predicted_ood).reshape(-1).astype(bool)
    truth = np.asarray(truth).reshape(-1).astype(bool)
    if pred.size != truth.size:
        raise LengthMismatchError(f"{pred.size} predictions vs {truth.size} labels")
    if pred.size == 0:
        raise EmptyInputError("no samples to score")
    return float(np.mean(pred == truth))
