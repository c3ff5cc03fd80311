"""Unsupervised single-object discovery on pre-extracted ViT patch features."""

from ._formula import (
    FormulaError,
    corloc,
    cosine_similarity,
    detect,
    detect_batch,
    fuse_layers,
    gaussian_map,
    intermediate_map,
    iou,
    read_features,
    second_smallest_eigpair,
    synth,
)

__all__ = [
    "FormulaError",
    "corloc",
    "cosine_similarity",
    "detect",
    "detect_batch",
    "fuse_layers",
    "gaussian_map",
    "intermediate_map",
    "iou",
    "read_features",
    "second_smallest_eigpair",
    "synth",
]
