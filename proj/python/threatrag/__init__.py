from ._core import (
    Engine,
    Error,
    VectorStore,
    bert_score,
    cosine,
    embed_deterministic,
    rrf_fuse,
    split_text,
)

__all__ = [
    "Engine",
    "Error",
    "VectorStore",
    "bert_score",
    "cosine",
    "embed_deterministic",
    "rrf_fuse",
    "split_text",
]
