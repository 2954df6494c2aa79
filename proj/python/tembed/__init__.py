"""Triplet-loss image embeddings with centroid and kNN evaluation."""

from ._core import (
    BallTree,
    DatasetError,
    Dataset,
    IoError,
    IterationRecord,
    Network,
    NumericFault,
    ParseError,
    ProtocolError,
    Splits,
    StructuralError,
    brute_force,
    cli,
    cluster_radius,
    evaluate_unseen,
    export_projector,
    generate_synthetic,
    half_split_evaluate,
    load_dataset_dir,
    load_manifest,
    make_splits,
    margin_at,
    train,
    triplet_grads,
    triplet_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")]
