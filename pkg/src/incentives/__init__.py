"""Incentive design for probabilistic classifiers.

Utility-weighted losses, the optimal predictions they induce, analytic
recalibration of those predictions, learning-incentive diagnostics, and a
small training harness for comparing weighted training with ex-post
weighting.
"""

from .audit import (
    PredictionLog,
    Quantization,
    learning_identity_check,
    loss_calibration_check,
    misalignment_gain,
    recover_what_is_learned,
)
from .decision import (
    DecisionRule,
    analytic_recalibration,
    argmax_decision,
    base_rate_adjust,
    optimal_weighted_prediction,
    utility_argmax_decision,
)
from .errors import (
    BoundaryError,
    DegeneracyError,
    DivergenceError,
    ImageError,
    IncentivesError,
    InvertibilityError,
    NonnegativityError,
    NumericalError,
    ValidationError,
)
from .learning import (
    binary_marginal_learning_loss,
    figure_curves,
    residual_learning_gradient,
    residual_learning_loss,
)
from .losses import LossSpec, expected_loss, normalize_weights, point_loss, utility_weighted_loss
from .simplex import (
    ClassSpace,
    SimplexVector,
    UtilityMatrix,
    class_weights_to_utility,
    expected_utility,
    simplex_normalize,
    validate_utility,
)

__version__ = "0.1.0"
