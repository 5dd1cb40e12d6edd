"""Noisy-label bag classification: two-stage detection and mutation pipeline."""

import json as _json

from . import _core
from ._core import (
    Dataset,
    Model,
    NoisyBagError,
    dataset_from_text,
    generate_synthetic,
    inject_noise,
    largest_remainder,
    load_checkpoint,
    load_dataset,
    majority_vote,
    patient_threshold,
    smooth_cross_entropy,
    softmax,
    stratified_split,
)

__all__ = [
    "Dataset",
    "Model",
    "NoisyBagError",
    "dataset_from_text",
    "default_config",
    "evaluate",
    "generate_cohort",
    "generate_synthetic",
    "grad_check",
    "inject_noise",
    "largest_remainder",
    "load_checkpoint",
    "load_dataset",
    "majority_vote",
    "metrics",
    "patient_threshold",
    "run_pipeline",
    "smooth_cross_entropy",
    "softmax",
    "stratified_split",
    "train",
]


def default_config():
    """Default experiment configuration as a dict."""
    return _json.loads(_core.default_config_json())


def generate_cohort(spec=None, seed=0):
    """Returns (detection, mutation) datasets of a synthetic cohort."""
    return _core.generate_cohort(_json.dumps(spec or {}), seed)


def metrics(confusion):
    """Accuracy, per-class precision/recall/F1 and macro F1 of a confusion matrix."""
    return _json.loads(_core.metrics_json([list(map(int, row)) for row in confusion]))


def train(train_set, val_set, hidden=(64, 32), profile="mutation", seed=0, **overrides):
    """Trains a model; keyword overrides use the config-file key names.

    Returns (model, summary dict, history CSV text).
    """
    model, summary, history = _core.train(
        train_set, val_set, list(hidden), profile, _json.dumps(overrides), seed
    )
    return model, _json.loads(summary), history


def evaluate(model, dataset, vote_rule="count"):
    """Instance and bag metrics of `model` on `dataset`."""
    return _json.loads(model.evaluate_json(dataset, vote_rule))


def grad_check(dims, seed=0, tolerance=1e-6, loss="smooth_cross_entropy", epsilon=0.2):
    """Returns (passed, max relative error, parameters checked)."""
    return _core.grad_check(list(dims), seed, tolerance, loss, epsilon)


def run_pipeline(config, out_dir):
    """Runs the full workflow into `out_dir` and returns the report dict."""
    return _json.loads(_core.run_pipeline(_json.dumps(config), str(out_dir)))
