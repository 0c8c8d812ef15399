from ._qexpand import (
    ConfigError,
    DataError,
    Index,
    Neighbor,
    NumericError,
    average_precision,
    generate_corpus,
    layer_norm,
    load_embeddings,
    save_embeddings,
    softmax,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Index",
    "Neighbor",
    "NumericError",
    "average_precision",
    "generate_corpus",
    "layer_norm",
    "load_embeddings",
    "save_embeddings",
    "softmax",
]
