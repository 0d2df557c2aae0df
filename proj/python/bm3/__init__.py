"""BM3 self-supervised multi-modal recommendation (C++ core)."""

from ._bm3 import (
    ConfigError,
    DataError,
    InteractionDataset,
    InteractionRecord,
    NormalizedAdjacency,
    NumericError,
    SplitDataset,
    TrainConfig,
    build_adjacency,
    build_dataset,
    kcore_filter,
    load_interactions,
    load_split,
    main,
    ndcg_at_k,
    neg_cosine,
    read_fmat,
    recall_at_k,
    run_ablation,
    sparsity,
    split_per_user,
    train,
    write_fmat,
)

__all__ = [
    "ConfigError",
    "DataError",
    "InteractionDataset",
    "InteractionRecord",
    "NormalizedAdjacency",
    "NumericError",
    "SplitDataset",
    "TrainConfig",
    "build_adjacency",
    "build_dataset",
    "kcore_filter",
    "load_interactions",
    "load_split",
    "main",
    "ndcg_at_k",
    "neg_cosine",
    "read_fmat",
    "recall_at_k",
    "run_ablation",
    "sparsity",
    "split_per_user",
    "train",
    "write_fmat",
]
