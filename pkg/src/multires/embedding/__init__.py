from multires.embedding.compose import (
    LayeredTokenEmbedding,
    compose_text,
    compose_token,
    composed_dim,
    ensemble,
    mix_layers,
)
from multires.embedding.specs import (
    AGGREGATORS,
    EnsembleSpec,
    MixtureSpec,
    parse_spec_file,
)
from multires.embedding.stores import (
    ContextFreeStore,
    ContextualStore,
    read_context_free_store,
    read_contextual_store,
    write_context_free_store,
    write_contextual_store,
)

__all__ = [
    "LayeredTokenEmbedding",
    "compose_text",
    "compose_token",
    "composed_dim",
    "ensemble",
    "mix_layers",
    "AGGREGATORS",
    "EnsembleSpec",
    "MixtureSpec",
    "parse_spec_file",
    "ContextFreeStore",
    "ContextualStore",
    "read_context_free_store",
    "read_contextual_store",
    "write_context_free_store",
    "write_contextual_store",
]
