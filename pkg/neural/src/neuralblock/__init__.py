"""CNN+LSTM blockage predictor over exported range-angle map windows."""

from .data import RaExport, Sample, WindowDataset, normalize_map, subsample
from .model import (
    FEATURE_DIM,
    FEATURE_STACK,
    FLATTEN_DIM,
    MAP_SHAPE,
    BlockagePredictor,
    FeatureNet,
    feature_shape_trace,
)
from .train import (
    TrainResult,
    TrainSpec,
    load_model,
    predict_scores,
    save_model,
    train_model,
)

__version__ = "0.1.0"
