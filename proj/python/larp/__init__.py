"""Relational contrastive track encoders and cold-start playlist continuation."""

from ._larp import (
    Checkpoint,
    ConfigError,
    Corpus,
    DivergenceError,
    DomainError,
    LarpError,
    NotFoundError,
    Playlist,
    ShapeError,
    TrackPool,
    ValidationError,
    contrast,
    embed,
    evaluate,
    generate_synthetic,
    initial_checkpoint,
    itemknn,
    load_checkpoint,
    load_corpus,
    ndcg_at_k,
    project_2d,
    recall_at_k,
    run_cli,
    save_checkpoint,
    save_corpus,
    train,
)

__all__ = [
    "Checkpoint",
    "ConfigError",
    "Corpus",
    "DivergenceError",
    "DomainError",
    "LarpError",
    "NotFoundError",
    "Playlist",
    "ShapeError",
    "TrackPool",
    "ValidationError",
    "contrast",
    "embed",
    "evaluate",
    "generate_synthetic",
    "initial_checkpoint",
    "itemknn",
    "load_checkpoint",
    "load_corpus",
    "ndcg_at_k",
    "project_2d",
    "recall_at_k",
    "run_cli",
    "save_checkpoint",
    "save_corpus",
    "train",
]
