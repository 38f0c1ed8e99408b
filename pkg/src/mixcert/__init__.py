"""mixcert: accuracy-robustness mixing of classifiers with certified radii."""

__version__ = "0.1.0"

from .attacks import AttackDiagnostics, AttackReport, AttackSpec, evaluate_under_attack, pgd_attack
from .certification import (
    Certificate,
    LipschitzProfile,
    certify_dataset,
    estimate_robust_margin,
    inverse_normal_cdf,
    lipschitz_radius,
    local_lipschitz_estimate,
    required_margin,
    rs_radius,
    standard_normal_cdf,
)
from .datasets import Dataset, load_csv_dataset, make_gaussian_blobs, make_two_moons, save_csv_dataset
from .mixing import MixedClassifier, MixOutput, mix_alpha, mix_smo1, mix_smo2, mix_smo3
from .network import (
    FeedForwardModel,
    Layer,
    forward_logits,
    forward_probs,
    global_lipschitz_upper,
    input_gradient,
    load_model,
    save_model,
)
from .oracle import BallGrid, Verdict, exhaustive_min_margin, finite_diff_gradient, verify_certificate
from .smoothing import (
    BoundedProbabilityClassifier,
    SmoothedClassifier,
    gaussian_smoothing_lipschitz,
    smoothed_probs_mc,
    smoothed_probs_quadrature,
)
from .training import FeedForwardClassifier, ModelSpec, TrainConfig, train

__all__ = [
    "AttackDiagnostics",
    "AttackReport",
    "AttackSpec",
    "BallGrid",
    "BoundedProbabilityClassifier",
    "Certificate",
    "Dataset",
    "FeedForwardClassifier",
    "FeedForwardModel",
    "Layer",
    "LipschitzProfile",
    "MixOutput",
    "MixedClassifier",
    "ModelSpec",
    "SmoothedClassifier",
    "TrainConfig",
    "Verdict",
    "certify_dataset",
    "estimate_robust_margin",
    "evaluate_under_attack",
    "exhaustive_min_margin",
    "finite_diff_gradient",
    "forward_logits",
    "forward_probs",
    "gaussian_smoothing_lipschitz",
    "global_lipschitz_upper",
    "input_gradient",
    "inverse_normal_cdf",
    "lipschitz_radius",
    "load_csv_dataset",
    "load_model",
    "local_lipschitz_estimate",
    "make_gaussian_blobs",
    "make_two_moons",
    "mix_alpha",
    "mix_smo1",
    "mix_smo2",
    "mix_smo3",
    "pgd_attack",
    "required_margin",
    "rs_radius",
    "save_csv_dataset",
    "save_model",
    "smoothed_probs_mc",
    "smoothed_probs_quadrature",
    "standard_normal_cdf",
    "train",
    "verify_certificate",
]
