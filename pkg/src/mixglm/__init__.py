"""Learning mixtures of generalized linear models from score-function
cross-moment tensors, with EM refinement of the residual scalar parameters."""

from .activations import Activation, RhoEstimate, is_degenerate, rho
from .config import ExperimentConfig, preset
from .decomposition import (
    DecompositionResult,
    WhiteningResult,
    power_iterate,
    robust_decompose,
    svd_init,
    unwhiten,
    whiten,
)
from .em import EmState, em_refine, initial_scale_fit, scale_from_rho
from .errors import (
    ComponentCollapseWarning,
    DeadPointError,
    DimensionMismatchError,
    IllConditionedSliceError,
    MixglmError,
    QuadratureError,
    SingularTransformError,
    UnderRecoveryError,
)
from .evaluation import MatchReport, SweepResult, match, sweep
from .moments import (
    Dataset,
    MomentTensor,
    empirical_m1,
    empirical_m2,
    empirical_m3,
    exact_cp_tensor,
)
from .pipeline import LearnResult, generate, learn, resolve_mode
from .scores import (
    CoordinateMap,
    Gaussian,
    GaussianMixture,
    ScoreEvaluation,
    ScoreModel,
    StandardGaussian,
    Transformed,
    evaluate_scores,
    score1,
    score3_closed_gaussian,
    score3_transformed,
    score_m_recursive,
    score_model_from_dict,
)
from .synthetic import GlmMixture, random_model, sample
from .tensors import SymTensor3, matricize, multilinear, outer3, slice_contract, symmetrize

__version__ = "0.1.0"
