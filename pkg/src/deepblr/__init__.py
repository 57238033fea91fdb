"""Bayesian linear regression on learned network features.

Train a small heteroscedastic network, then treat its hidden layer as a
fixed feature map and place a closed-form Bayesian linear model on top.
Includes ensemble and MC-dropout baselines, a tabular benchmark harness
and a cartpole model-based control testbed.
"""

from ._native import backend_name
from .artifact import FitArtifact, fit_artifact, load_artifact, predict_artifact, save_artifact

__version__ = "0.1.0"

__all__ = [
    "FitArtifact",
    "backend_name",
    "fit_artifact",
    "load_artifact",
    "predict_artifact",
    "save_artifact",
    "__version__",
]
