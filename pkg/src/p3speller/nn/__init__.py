from .layers import (BatchNorm, Dense, LeakyReLU, Reshape, SpatialConv,
                     TemporalConv, dropout_mask)
from .model import (Architecture, SpatioSequentialCNN, TrainConfig,
                    WEIGHTS_MAGIC, WEIGHTS_VERSION, build_model)
from .train import Adam, bce_loss, gradient_check, train, train_step

__all__ = [
    "Adam", "Architecture", "BatchNorm", "Dense", "LeakyReLU", "Reshape",
    "SpatialConv", "SpatioSequentialCNN", "TemporalConv", "TrainConfig",
    "WEIGHTS_MAGIC", "WEIGHTS_VERSION", "bce_loss", "build_model",
    "dropout_mask", "gradient_check", "train", "train_step",
]
