"""The five anomaly-score model kinds behind one train/score contract."""

from . import bgmm, dcae, gmm, iforest, realnvp
from .base import (
    DEFAULT_CONFIGS,
    FEATURE_VECTOR,
    KINDS,
    MEL_SPEC,
    PREPROCESSING_FOR_KIND,
    ScoreModel,
    fit_score_model,
    preprocess,
    score,
    score_clip,
    train,
)
from .bgmm import BgmmConfig, BgmmParams, vb_iterate
from .dcae import DcaeConfig, DcaeParams
from .gmm import GmmConfig, GmmParams, em_iterate
from .iforest import IforestConfig, IforestParams
from .realnvp import RealNvpConfig, RealNvpParams
from .realnvp import forward as realnvp_forward
from .realnvp import inverse as realnvp_inverse
from .serialize import ModelFormatError, load_model, save_model

__all__ = [
    "DEFAULT_CONFIGS", "FEATURE_VECTOR", "KINDS", "MEL_SPEC", "PREPROCESSING_FOR_KIND",
    "ScoreModel", "fit_score_model", "preprocess", "score", "score_clip", "train",
    "BgmmConfig", "BgmmParams", "vb_iterate",
    "DcaeConfig", "DcaeParams",
    "GmmConfig", "GmmParams", "em_iterate",
    "IforestConfig", "IforestParams",
    "RealNvpConfig", "RealNvpParams", "realnvp_forward", "realnvp_inverse",
    "ModelFormatError", "load_model", "save_model",
    "bgmm", "dcae", "gmm", "iforest", "realnvp",
]
