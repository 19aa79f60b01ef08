"""Weighted ensemble of five trained classifiers.

Each member's weight is its share of total true predictions on held-out
validation data: W_k = (TP_k + TN_k) / sum_i (TP_i + TN_i). The ensemble
score of an epoch is the convex combination sum_k W_k * p_k of member
probabilities.
"""

import json
import os

import numpy as np

from .metrics import ConfusionMatrix
from .nn import SpatioSequentialCNN


def compute_weights(confusions):
    """Normalize total-true-prediction counts into ensemble weights."""
    t = np.array([c.tp + c.tn for c in confusions], dtype=float)
    if np.any(t < 0):
        raise ValueError("negative confusion counts")
    total = t.sum()
    if total <= 0:
        raise ValueError("degenerate weights: no member made a true prediction")
    return t / total


class EnsembleBundle:
    """Frozen members plus their normalized weights and validation provenance."""

    def __init__(self, models, weights, confusions=None, seeds=None):
        if len(models) != len(weights):
            raise ValueError("one weight per member required")
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {weights.sum()}, expected 1")
        self.models = list(models)
        self.weights = weights
        self.confusions = list(confusions) if confusions else None
        self.seeds = list(seeds) if seeds else None
        for m in self.models:
            m.mode = "inference"

    def __len__(self):
        return len(self.models)

    def member_scores(self, batch):
        """Per-member probabilities, shape (n_members, B)."""
        return np.stack([m.predict_proba(batch) for m in self.models])

    def predict(self, batch):
        """Weighted ensemble scores in [0, 1], shape (B,)."""
        return self.weights @ self.member_scores(batch)


def ensemble_predict(bundle, epoch):
    """Weighted score of a single epoch (or batch of epochs)."""
    samples = getattr(epoch, "samples", epoch)
    samples = np.asarray(samples)
    if samples.ndim == 2:
        return float(bundle.predict(samples[None])[0])
    return bundle.predict(samples)


def save_bundle(bundle, directory, config_echo=None):
    """Write member weight files plus the manifest JSON; returns manifest path."""
    os.makedirs(directory, exist_ok=True)
    members = []
    for i, model in enumerate(bundle.models):
        fname = f"member{i}.spsq"
        model.save_weights(os.path.join(directory, fname))
        members.append(fname)
    manifest = {
        "members": members,
        "weights": bundle.weights.tolist(),
        "validation_confusions": [c.as_dict() for c in bundle.confusions]
        if bundle.confusions else None,
        "seeds": bundle.seeds,
        "config": config_echo,
    }
    path = os.path.join(directory, "bundle.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def load_bundle(manifest_path):
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    directory = os.path.dirname(os.path.abspath(manifest_path))
    models = [SpatioSequentialCNN.load_weights(os.path.join(directory, m))
              for m in manifest["members"]]
    confusions = None
    if manifest.get("validation_confusions"):
        confusions = [ConfusionMatrix(**c)
                      for c in manifest["validation_confusions"]]
    return EnsembleBundle(models, manifest["weights"], confusions,
                          manifest.get("seeds"))
