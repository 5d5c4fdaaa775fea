"""Hand-rolled neural network: layers, attention blocks, training loop."""

from .layers import Conv2D, Dense, Flatten, GlobalAvgPool, Layer, ReLU, Sigmoid
from .attention import CBAM, ChannelAttention, SpatialAttention
from .network import (
    ARCHITECTURES,
    Network,
    build_ann,
    build_cbam_cnn,
    build_multilayer_cnn,
    softmax,
    softmax_cross_entropy,
)
from .train import Adam, TrainResult, TrainSettings, train
from .metrics import ClassMetrics, Metrics, confusion_matrix, evaluate, metrics_from_confusion
from .checkpoint import load_weights, save_weights, write_history_csv

__all__ = [
    "Adam", "ARCHITECTURES", "CBAM", "ChannelAttention", "ClassMetrics",
    "Conv2D", "Dense", "Flatten", "GlobalAvgPool", "Layer", "Metrics",
    "Network", "ReLU", "Sigmoid", "SpatialAttention", "TrainResult",
    "TrainSettings", "build_ann", "build_cbam_cnn", "build_multilayer_cnn",
    "confusion_matrix", "evaluate", "load_weights", "metrics_from_confusion",
    "save_weights", "softmax", "softmax_cross_entropy", "train",
    "write_history_csv",
]
