from .architectures import ARCHITECTURES, build_model, count_parameters
from .training import (
    TrainConfig,
    TrainedDetector,
    load_detector,
    predict,
    predict_proba,
    predict_raw,
    save_detector,
    train,
)

__all__ = [
    "ARCHITECTURES",
    "build_model",
    "count_parameters",
    "TrainConfig",
    "TrainedDetector",
    "load_detector",
    "predict",
    "predict_proba",
    "predict_raw",
    "save_detector",
    "train",
]
