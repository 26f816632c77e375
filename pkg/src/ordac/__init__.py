"""Adaptive correction of noisy ordinal labels with Gaussian label distributions."""
from .correction import (CorrectionParams, class_wise_means, correct_fold, correction_coefficient,
                         filter_uncertain, kfold_train, ordac_train, shift_predictions, train_fldl,
                         train_on_corrected, update_distribution)
from .data import Dataset, FoldPlan, SyntheticSpec, generate_synthetic, load_csv, split_folds, write_csv
from .label_dist import LabelDistribution, discretize, expected_rank, kl_divergence
from .metrics import class_of, label_quality, macro_mae, macro_recall
from .model import MlpRegressor, ModelParams
from .noise import NoiseMatrix, build_noise_matrix, inject_noise

__version__ = "0.1.0"
