"""Self-paced resistance learning for classification under label noise."""
from .curriculum import ConfigError, PaceConfig, choose_m, delta, gamma, gamma_max, select_confident
from .data import Dataset, DataFormatError, load_csv, load_idx, make_blobs
from .noise import NoiseSpec, apply_noise, corrupt, model_generated_noise, pair_matrix, symmetric_matrix
from .trainer import EpochMetrics, TrainConfig, evaluate, train, train_baseline

__all__ = [
    "ConfigError", "PaceConfig", "choose_m", "delta", "gamma", "gamma_max", "select_confident",
    "Dataset", "DataFormatError", "load_csv", "load_idx", "make_blobs",
    "NoiseSpec", "apply_noise", "corrupt", "model_generated_noise", "pair_matrix", "symmetric_matrix",
    "EpochMetrics", "TrainConfig", "evaluate", "train", "train_baseline",
]
