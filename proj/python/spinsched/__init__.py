"""Spin-image descriptors generated through a master-worker runtime."""

from ._spinsched import (
    IoError,
    ParseError,
    PointCloud,
    ProtocolError,
    RunError,
    SpinImageParams,
    UsageError,
    ValidationError,
    chunk_sequence,
    default_image_count,
    generate_spin_images,
    load_imbalance,
    load_point_cloud,
    parallel_cost,
    run_local,
    synth_cloud,
)

__all__ = [
    "IoError",
    "ParseError",
    "PointCloud",
    "ProtocolError",
    "RunError",
    "SpinImageParams",
    "UsageError",
    "ValidationError",
    "chunk_sequence",
    "default_image_count",
    "generate_spin_images",
    "load_imbalance",
    "load_point_cloud",
    "parallel_cost",
    "run_local",
    "synth_cloud",
]
