"""Triplet loss and hard-negative mining over encoded unit vectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from multires.errors import ConfigError, MiningError
from multires.model.encoder import squared_distances


@dataclass(frozen=True)
class LossConfig:
    margin: float = 1.0

    def __post_init__(self):
        if not self.margin > 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")


@dataclass(frozen=True)
class TripletIndices:
    """Indices into the anchor list and the mined document list."""

    anchor: int
    positive: int
    negative: int


def triplet_loss(d_pos: float, d_neg: float, cfg: LossConfig) -> float:
    """Hinge max(d_pos - d_neg + margin, 0)."""
    return max(d_pos - d_neg + cfg.margin, 0.0)


def mine_hard(
    anchors: Sequence[np.ndarray],
    positives: Sequence[np.ndarray],
    batch_docs: Sequence[tuple[str, np.ndarray]],
    gold: Mapping[int, str],
    semi_hard: bool = False,
) -> list[TripletIndices]:
    """Pick, per anchor, the closest candidate that is not its gold document.

    Ties break toward the smallest document index. Anchors whose hardest
    negative already satisfies the margin are kept (their loss clamps to 0).
    With semi_hard=True, candidates closer than the positive are excluded
    first; when none remain the hardest overall is used instead.
    """
    if len(anchors) != len(positives):
        raise MiningError(f"{len(anchors)} anchors but {len(positives)} positives")
    doc_ids = [doc_id for doc_id, _ in batch_docs]
    doc_index = {doc_id: i for i, doc_id in enumerate(doc_ids)}
    doc_matrix = np.stack([vec for _, vec in batch_docs])
    triplets: list[TripletIndices] = []
    for a, anchor in enumerate(anchors):
        gold_id = gold.get(a)
        if gold_id is None or gold_id not in doc_index:
            raise MiningError(f"anchor {a} has no in-batch gold document")
        pos_idx = doc_index[gold_id]
        dists = squared_distances(doc_matrix, anchor)
        mask = np.array([doc_id == gold_id for doc_id in doc_ids])
        if mask.all():
            raise MiningError(f"anchor {a} has no candidate negatives in the batch")
        candidates = dists.copy()
        candidates[mask] = np.inf
        if semi_hard:
            d_pos = float(np.sum((anchor - positives[a]) ** 2))
            semi = candidates.copy()
            semi[candidates < d_pos] = np.inf
            if np.isfinite(semi).any():
                candidates = semi
        neg_idx = int(np.argmin(candidates))  # argmin takes the first, i.e. lowest index
        triplets.append(TripletIndices(anchor=a, positive=pos_idx, negative=neg_idx))
    return triplets
