"""Adversarial image colorization (libtorch backend)."""

from ._chroma import (
    CheckpointError,
    ChromaError,
    Colorizer,
    ConfigError,
    FormatError,
    IngestionError,
    ShapeError,
    StatisticError,
    TrainingError,
    desk_config,
    image_to_lab,
    lab_to_image,
    lab_to_rgb,
    reference_config,
    psnr_ab,
    read_image,
    rgb_to_lab,
    study_results,
    to_grayscale,
    train,
    write_image,
    write_toy_corpus,
)

__all__ = [name for name in dir() if not name.startswith("_")]
