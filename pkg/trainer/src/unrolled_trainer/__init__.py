"""Auto-encoder trainer for jointly sparse recovery: learnable pilot
encoder, unrolled model-driven decoders, correction layers, ADAM training
and interchange-format export."""

from .data import TwoGroupScenario, sample_batch, sample_noise
from .export import export_artifacts, load_manifest
from .model import (
    AmpDecoder,
    AutoEncoder,
    CovarianceDecoder,
    Encoder,
    GroupLassoDecoder,
    MapDecoder,
    SignalCorrection,
    SupportCorrection,
    bce_loss,
    build_autoencoder,
    mse_loss,
)
from .parity import parity_report
from .spec import AutoEncoderSpec, SpecError, TrainRun
from .train import TrainingDiverged, TrainResult, calibrate_gamma, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AmpDecoder",
    "AutoEncoder",
    "AutoEncoderSpec",
    "CovarianceDecoder",
    "Encoder",
    "GroupLassoDecoder",
    "MapDecoder",
    "SignalCorrection",
    "SpecError",
    "SupportCorrection",
    "TrainingDiverged",
    "TrainResult",
    "TrainRun",
    "TwoGroupScenario",
    "bce_loss",
    "build_autoencoder",
    "calibrate_gamma",
    "evaluate",
    "export_artifacts",
    "load_manifest",
    "mse_loss",
    "parity_report",
    "sample_batch",
    "sample_noise",
    "train",
]
