"""Reference configuration for the weighted-training comparison.

A rare emphasized class (2% prior) sits among two common classes in 20
dimensions, of which only two carry signal. A linear softmax model
trained on the unweighted loss learns the posterior well; training on the
class-weighted loss spends capacity on the rare class and loses accuracy
elsewhere, so ex-post weighting wins on weighted loss.
"""

from __future__ import annotations

import numpy as np

from .experiment import ExperimentConfig

DIMENSION = 20


def misalignment_benchmark_dict(runs: int = 5, base_seed: int = 0) -> dict:
    means = np.zeros((3, DIMENSION))
    means[0, 0] = 2.0
    means[1, 1] = 2.0
    means[2, :2] = -1.0
    return {
        "dataset": {
            "mixture": {"priors": [0.02, 0.49, 0.49], "means": means.tolist(), "stds": [1.0, 1.0, 1.0]},
            "n": 6000,
            "fractions": {"train": 0.7, "validation": 0.1, "test": 0.2},
        },
        "weighting": {"emphasized_class": 1, "ratio": 99.0},
        "model": {"family": "linear-softmax", "width": 16, "activation": "tanh", "init_scale": 0.1},
        "train": {
            "loss": {"base": "logistic"},
            "learning_rate": 0.5,
            "decay": 0.5,
            "interval": 50,
            "max_steps": 1000,
            "batch": "full",
            "seed": 0,
            "plateau_tol": 1e-5,
        },
        "runs": runs,
        "base_seed": base_seed,
    }


def misalignment_benchmark(runs: int = 5, base_seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig.from_dict(misalignment_benchmark_dict(runs, base_seed))
