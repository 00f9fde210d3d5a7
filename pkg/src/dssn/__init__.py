"""Deterministic l1 certification by smoothing with splitting noise."""
from .certify import (
    Certificate,
    SmoothedScores,
    certify_exact,
    certify_randomized,
    lower_confidence_bound,
    predict,
    smooth_exact_dssn,
    smooth_monte_carlo,
)
from .data import Dataset, load_dataset, synth_dataset
from .models import LinearSoftmaxClassifier, TableClassifier, load_model, save_model, train_linear
from .noise import NoiseKind, NoiseModel, QuantizedPoint, SplitSpec, quantize_lambda, sigma_to_lambda

__version__ = "0.1.0"
