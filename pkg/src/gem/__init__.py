"""General effect modelling: GLM effect decomposition followed by PCA, PLS and elastic-net analysis of ER matrices."""

from .core import GemFit, combined_er, effect_matrix, er_matrix, fit_gem, gem, load_fit, reconstruct, save_fit
from .dataset import Dataset, Schema, Variable, VariableSpec, load_dataset, save_dataset, validate_dataset
from .design import CodedDesign, ModelSpec, Term, build_design, code_factor, interaction_block, parse_formula
from .enet import EnetPath, cv_enet, fit_enet_path, nonzero_set
from .pca import PcaModel, correlation_loadings, fit_pca, project
from .pls import (
    CvResult,
    PlsModel,
    ShaveResult,
    TargetCoding,
    classify,
    cross_validate,
    encode_target,
    fit_pls,
    jackknife,
    majority_class_error,
    predict,
    shave,
    smc_importance,
)
from .validation import CvScheme

__version__ = "0.1.0"
