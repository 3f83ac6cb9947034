"""Composition algebra: layer mixtures, model ensembles, text matrices.

A composed vector is a plain 1-D ndarray; a text matrix is the (k, d'')
stack of the k composed token vectors in input order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from multires.corpus import IdfTable, lookup_idf
from multires.embedding.specs import EnsembleSpec, MixtureSpec
from multires.errors import EmptyTextError, MissingModelError, NumericalError, SpecError


@dataclass(frozen=True)
class LayeredTokenEmbedding:
    """One token's l x d layer matrix from a single embedding model."""

    model_id: str
    layers: np.ndarray

    def __post_init__(self):
        if self.layers.ndim != 2 or self.layers.shape[0] < 1 or self.layers.shape[1] < 1:
            raise SpecError(f"layers must be l x d with l,d >= 1, got {self.layers.shape}")
        if not np.all(np.isfinite(self.layers)):
            raise NumericalError(f"non-finite layer entries for model {self.model_id!r}")

    @property
    def num_layers(self) -> int:
        return self.layers.shape[0]


def mix_layers(
    emb: LayeredTokenEmbedding, spec: MixtureSpec, idf_weight: float = 1.0
) -> np.ndarray:
    """Weight the layers of one model and aggregate them into a single vector.

    sum/average give a d-vector; concatenate joins the nonzero-weight layers
    in layer order. When spec.use_idf is set the aggregated vector is scaled
    by idf_weight once, after aggregation.
    """
    if spec.model_id != emb.model_id:
        raise SpecError(f"mixture for {spec.model_id!r} applied to model {emb.model_id!r}")
    if len(spec.weights) != emb.num_layers:
        raise SpecError(
            f"{len(spec.weights)} weights for model {emb.model_id!r} with {emb.num_layers} layers"
        )
    weights = np.asarray(spec.weights, dtype=emb.layers.dtype)
    if spec.aggregator == "sum":
        out = np.einsum("l,ld->d", weights, emb.layers)
    elif spec.aggregator == "average":
        out = np.einsum("l,ld->d", weights, emb.layers) / emb.num_layers
    else:  # concatenate: zero-weight layers contribute no segment
        segments = []
        for i, w in enumerate(spec.weights):
            if w == 0.0:
                continue
            row = emb.layers[i]
            segments.append(row * weights[i] if spec.scale_segments else row)
        out = np.concatenate(segments)
    if spec.use_idf:
        out = out * emb.layers.dtype.type(idf_weight)
    return out


def ensemble(parts: Sequence[np.ndarray], spec: EnsembleSpec) -> np.ndarray:
    """Scale each mixture output by its coefficient and aggregate across models.

    concatenate joins segments in order (d'' = sum of dims); sum/average
    right-zero-pad every part to the longest one first (d'' = max dim).
    """
    if len(parts) != len(spec.mixtures):
        raise SpecError(f"{len(parts)} parts for ensemble of {len(spec.mixtures)} mixtures")
    dtype = np.result_type(*parts)
    scaled = [np.asarray(p, dtype=dtype) * dtype.type(u) for p, u in zip(parts, spec.weights)]
    if spec.aggregator == "concatenate":
        return np.concatenate(scaled)
    width = max(p.shape[0] for p in scaled)
    acc = np.zeros(width, dtype=dtype)
    for p in scaled:
        acc[: p.shape[0]] += p
    if spec.aggregator == "average":
        acc /= len(scaled)
    return acc


def compose_token(
    layer_sets: Mapping[str, LayeredTokenEmbedding],
    spec: EnsembleSpec,
    idf_weight: float = 1.0,
) -> np.ndarray:
    """Mixture per model, then ensemble across models, for one token."""
    parts = []
    for mixture in spec.mixtures:
        emb = layer_sets.get(mixture.model_id)
        if emb is None:
            raise MissingModelError(f"no layer matrix for model {mixture.model_id!r}")
        parts.append(mix_layers(emb, mixture, idf_weight))
    return ensemble(parts, spec)


def composed_dim(spec: EnsembleSpec, model_dims: Mapping[str, tuple[int, int]]) -> int:
    """d'' implied by a spec over models with known (num_layers, dim).

    Mirrors the aggregation rules: mixture sum/average give d, concatenate
    gives d times the number of nonzero weights; ensemble concatenate sums
    the mixture dims, sum/average take the max.
    """
    dims = []
    for mixture in spec.mixtures:
        if mixture.model_id not in model_dims:
            raise MissingModelError(f"no dimensions for model {mixture.model_id!r}")
        num_layers, dim = model_dims[mixture.model_id]
        if len(mixture.weights) != num_layers:
            raise SpecError(
                f"{len(mixture.weights)} weights for model {mixture.model_id!r}"
                f" with {num_layers} layers"
            )
        if mixture.aggregator == "concatenate":
            dims.append(dim * sum(1 for w in mixture.weights if w != 0.0))
        else:
            dims.append(dim)
    if spec.aggregator == "concatenate":
        return sum(dims)
    return max(dims)


def compose_text(
    tokens: Sequence[str],
    stores: Mapping[str, "EmbeddingStore"],
    spec: EnsembleSpec,
    idf: IdfTable,
) -> np.ndarray:
    """Compose every token into a row of the (k, d'') text matrix.

    A token missing from one model's store contributes a zero layer matrix
    for that model only; a text whose tokens resolve in no store at all is
    rejected.
    """
    for mixture in spec.mixtures:
        if mixture.model_id not in stores:
            raise MissingModelError(f"no store for model {mixture.model_id!r}")
    rows = []
    any_resolved = False
    for position, token in enumerate(tokens):
        layer_sets: dict[str, LayeredTokenEmbedding] = {}
        for mixture in spec.mixtures:
            store = stores[mixture.model_id]
            layers = store.lookup(token, position)
            if layers is None:
                layers = np.zeros((store.num_layers, store.dim), dtype=store.dtype)
            else:
                any_resolved = True
            layer_sets[mixture.model_id] = LayeredTokenEmbedding(
                model_id=mixture.model_id, layers=layers
            )
        rows.append(compose_token(layer_sets, spec, lookup_idf(idf, token)))
    if not rows or not any_resolved:
        raise EmptyTextError("no token of the text resolves in any embedding store")
    return np.stack(rows)
