"""Subband GAN voice conversion.

Mel analysis, Griffin-Lim inversion, pitch metrics, losses and trained
model inference from the C++ core. Arrays are float32 numpy arrays; mels are
(rows, frames) with row 0 the lowest band.
"""

from ._sgvc import (  # noqa: F401
    ConfigError,
    DataError,
    EmptyInputError,
    IntegrityError,
    IoError,
    LabelError,
    LossWeights,
    MelConfig,
    Model,
    ModelConfig,
    NumericError,
    ParameterError,
    SchemaError,
    SgvcError,
    ShapeError,
    adversarial_loss,
    apply_overrides,
    column_norm,
    cross_entropy,
    default_config,
    estimate_f0,
    f0_diff,
    fit_width,
    griffin_lim,
    load_audio,
    mel_filterbank,
    mel_spectrogram,
    norm_consistency_loss,
    read_mel,
    reconstruction_loss,
    resample,
    style_diversification_loss,
    total_generator_objective,
    write_mel,
    write_wav,
)

__all__ = [name for name in dir() if not name.startswith("_")]
