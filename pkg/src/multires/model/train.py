"""Two-branch shared-weight training with mined triplets.

Queries and documents run through the *same* parameter object, so the
branches share weights by construction. All randomness (weight init,
batch sampling) flows from the single seed in TrainConfig; reruns with
one seed are bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from multires.corpus import QaPair
from multires.errors import ConfigError, DatasetError, IntegrityError
from multires.model import encoder as enc
from multires.model.loss import LossConfig, mine_hard, triplet_loss
from multires.numerics.adam import AdamConfig, AdamState, adam_step

MINING_MODES = ("batch_hard", "full_scan", "semi_hard")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 400
    batch_size: int = 2000
    seed: int = 0
    adam: AdamConfig = AdamConfig()
    mining: str = "batch_hard"
    loss: LossConfig = LossConfig()
    depth: int = enc.DEFAULT_DEPTH
    window: int = enc.DEFAULT_WINDOW
    scale: float = enc.DEFAULT_SCALE

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.mining not in MINING_MODES:
            raise ConfigError(f"mining must be one of {MINING_MODES}, got {self.mining!r}")


@dataclass
class TrainResult:
    params: object
    kind: str
    loss_trace: list[float] = field(default_factory=list)
    active_fractions: list[float] = field(default_factory=list)


class _GroupedBatch:
    """Texts grouped by length so each group is one batched forward/backward."""

    def __init__(self, matrices: list[np.ndarray], params):
        self.groups: list[tuple[np.ndarray, list[int]]] = []
        by_k: dict[int, list[int]] = {}
        for i, m in enumerate(matrices):
            by_k.setdefault(m.shape[0], []).append(i)
        self.n = len(matrices)
        self.dim = params.dim
        self._caches = []
        self.outputs = np.empty((self.n, self.dim), dtype=np.float32)
        for k in sorted(by_k):
            idxs = by_k[k]
            xs = np.stack([matrices[i] for i in idxs])
            out, cache = enc.forward_many(xs, params)
            for row, i in enumerate(idxs):
                self.outputs[i] = out[row]
            self.groups.append((xs, idxs))
            self._caches.append(cache)

    def backward(self, params, upstream: np.ndarray) -> list[np.ndarray]:
        total: list[np.ndarray] | None = None
        for (xs, idxs), cache in zip(self.groups, self._caches):
            g = np.stack([upstream[i] for i in idxs])
            grads, _ = enc.backward_many(params, cache, g)
            if total is None:
                total = grads
            else:
                total = [t + extra for t, extra in zip(total, grads)]
        assert total is not None
        return total


def train(
    pairs: Sequence[QaPair],
    query_matrices: Mapping[str, np.ndarray],
    doc_matrices: Mapping[str, np.ndarray],
    encoder_kind: str = "convrr",
    cfg: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Train the encoder on (query, positive document) pairs.

    Per iteration: sample a batch without replacement (reshuffling once the
    pool is exhausted), encode queries and documents with shared parameters,
    mine a hardest negative per anchor, average the triplet losses, and take
    one Adam step per parameter tensor.
    """
    if encoder_kind not in ("convrr", "fcrr"):
        raise ConfigError(f"encoder_kind must be 'convrr' or 'fcrr', got {encoder_kind!r}")
    if not pairs:
        raise DatasetError("no training pairs")
    if len(doc_matrices) < 2:
        raise DatasetError("need at least 2 distinct documents to mine negatives")
    for pair in pairs:
        if pair.query_id not in query_matrices:
            raise IntegrityError(f"no text matrix for query {pair.query_id!r}")
        if pair.positive_doc_id not in doc_matrices:
            raise IntegrityError(f"no text matrix for document {pair.positive_doc_id!r}")

    queries = {qid: np.asarray(m, dtype=np.float32) for qid, m in query_matrices.items()}
    docs = {did: np.asarray(m, dtype=np.float32) for did, m in doc_matrices.items()}
    dim = next(iter(docs.values())).shape[1]

    rng = np.random.default_rng(cfg.seed)
    if encoder_kind == "convrr":
        params = enc.init_convrr_params(
            dim, depth=cfg.depth, window=cfg.window, scale=cfg.scale, rng=rng
        )
    else:
        params = enc.init_fcrr_params(dim, scale=cfg.scale, rng=rng)
    tensors = params.tensors()
    states = [AdamState.zeros_like(t) for t in tensors]

    n_pairs = len(pairs)
    batch_size = min(cfg.batch_size, n_pairs)
    order = rng.permutation(n_pairs)
    cursor = 0
    all_doc_ids = list(docs.keys())
    semi_hard = cfg.mining == "semi_hard"
    full_scan = cfg.mining == "full_scan"

    result = TrainResult(params=params, kind=encoder_kind)
    for _ in range(cfg.iterations):
        if cursor + batch_size > n_pairs:
            order = rng.permutation(n_pairs)
            cursor = 0
        batch = [pairs[i] for i in order[cursor:cursor + batch_size]]
        cursor += batch_size

        if full_scan:
            batch_doc_ids = all_doc_ids
        else:
            batch_doc_ids = list(dict.fromkeys(p.positive_doc_id for p in batch))

        query_group = _GroupedBatch([queries[p.query_id] for p in batch], params)
        doc_group = _GroupedBatch([docs[d] for d in batch_doc_ids], params)
        anchors = query_group.outputs
        doc_outs = doc_group.outputs
        doc_pos = {did: i for i, did in enumerate(batch_doc_ids)}

        gold = {i: p.positive_doc_id for i, p in enumerate(batch)}
        positives = [doc_outs[doc_pos[p.positive_doc_id]] for p in batch]
        triplets = mine_hard(
            list(anchors),
            positives,
            list(zip(batch_doc_ids, doc_outs)),
            gold,
            semi_hard=semi_hard,
        )

        g_anchor = np.zeros_like(anchors)
        g_doc = np.zeros_like(doc_outs)
        losses = []
        active = 0
        inv_b = 1.0 / len(batch)
        for t in triplets:
            a = anchors[t.anchor]
            p = doc_outs[t.positive]
            n = doc_outs[t.negative]
            d_pos = float(np.sum((a - p) ** 2))
            d_neg = float(np.sum((a - n) ** 2))
            loss = triplet_loss(d_pos, d_neg, cfg.loss)
            losses.append(loss)
            if loss > 0:
                active += 1
                g_anchor[t.anchor] += (2 * inv_b) * ((a - p) - (a - n))
                g_doc[t.positive] += (-2 * inv_b) * (a - p)
                g_doc[t.negative] += (2 * inv_b) * (a - n)

        result.loss_trace.append(float(np.mean(losses)))
        result.active_fractions.append(active / len(batch))

        grads = query_group.backward(params, g_anchor)
        doc_grads = doc_group.backward(params, g_doc)
        grads = [g + dg for g, dg in zip(grads, doc_grads)]

        new_tensors = []
        for i, (tensor, grad) in enumerate(zip(tensors, grads)):
            new_tensor, states[i] = adam_step(tensor, grad, states[i], cfg.adam)
            new_tensors.append(new_tensor)
        tensors = new_tensors
        params = params.replace_tensors(tensors)

    result.params = params
    return result
