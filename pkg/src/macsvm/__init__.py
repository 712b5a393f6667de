"""Low-dimensional nonlinear SVMs trained by auxiliary-coordinate alternation."""

from .baselines import (PcaModel, error_rate, nn_classify, pca_fit, pca_project,
                        within_class_scatter)
from .coords import (CoordResult, solve_point, solve_point_binary,
                     solve_point_exhaustive, solve_points)
from .data import (Dataset, ParseError, SplitSpec, gen_spirals, load_delimited,
                   split, standardize_apply, standardize_fit)
from .features import (RbfCenters, RbfMapParams, default_sigma, design_matrix,
                       kmeans_centers, map_latent, map_points, rbf_design_matrix)
from .model_io import ModelFile, load_model, save_model
from .ridge import GramCache, NumericError, build_gram, solve_weights
from .svm import (BinarySvm, OvaSvm, class_targets, decision_values, predict,
                  predict_batch, train_binary, train_ova)
from .training import (HistoryRecord, StepRecord, TrainConfig, TrainState,
                       TrainedModel, collapse, init_coords, map_subgrad_steps,
                       nested_objective, penalty_objective, predict_collapsed,
                       predict_two_stage, simplex_vertices, train_mac,
                       two_step_baseline)

__version__ = "0.1.0"

__all__ = [
    "PcaModel", "error_rate", "nn_classify", "pca_fit", "pca_project",
    "within_class_scatter",
    "CoordResult", "solve_point", "solve_point_binary", "solve_point_exhaustive",
    "solve_points",
    "Dataset", "ParseError", "SplitSpec", "gen_spirals", "load_delimited",
    "split", "standardize_apply", "standardize_fit",
    "RbfCenters", "RbfMapParams", "default_sigma", "design_matrix",
    "kmeans_centers", "map_latent", "map_points", "rbf_design_matrix",
    "ModelFile", "load_model", "save_model",
    "GramCache", "NumericError", "build_gram", "solve_weights",
    "BinarySvm", "OvaSvm", "class_targets", "decision_values", "predict",
    "predict_batch", "train_binary", "train_ova",
    "HistoryRecord", "StepRecord", "TrainConfig", "TrainState", "TrainedModel",
    "collapse", "init_coords", "map_subgrad_steps", "nested_objective",
    "penalty_objective", "predict_collapsed", "predict_two_stage",
    "simplex_vertices", "train_mac", "two_step_baseline",
    "__version__",
]
