"""Text CNN with a trainable noise adaptation layer for learning from noisy labels."""

from ._core import (
    apply_noise_layer,
    build_class_dependent_noise,
    build_random_noise,
    build_uniform_noise,
    column_normalize,
    derive_seed,
    evaluate_checkpoint,
    extract_features,
    flip_fraction,
    frobenius_norm,
    inspect_checkpoint,
    linear_probe,
    make_synthetic_corpus,
    pearson,
    run_experiment,
    sample_noisy_labels,
    softmax,
    softmax_response,
    tokenize,
)

__all__ = [
    "apply_noise_layer",
    "build_class_dependent_noise",
    "build_random_noise",
    "build_uniform_noise",
    "column_normalize",
    "derive_seed",
    "evaluate_checkpoint",
    "extract_features",
    "flip_fraction",
    "frobenius_norm",
    "inspect_checkpoint",
    "linear_probe",
    "make_synthetic_corpus",
    "pearson",
    "run_experiment",
    "sample_noisy_labels",
    "softmax",
    "softmax_response",
    "tokenize",
]
