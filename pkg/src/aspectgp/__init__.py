"""Telicity classification from aspectual indicators over similar corpus clauses."""

from .clause import (
    AspectLabel,
    ClauseRecord,
    ConstituentKey,
    IndicatorBits,
    TenseForm,
    extract_indicators,
    validate_record,
)
from .corpus import Corpus, CorpusIndex, SimilarityConfig, SimilarSet, build_index, ingest
from .gp import ExprTree, GPConfig, evolve, parse_tree
from .classifier import ClassifierModel, Objective, classify, train
from .estimator import SimilarClauseFeaturizer, TelicityGPClassifier

__version__ = "0.1.0"

__all__ = [
    "AspectLabel",
    "ClassifierModel",
    "ClauseRecord",
    "ConstituentKey",
    "Corpus",
    "CorpusIndex",
    "ExprTree",
    "GPConfig",
    "IndicatorBits",
    "Objective",
    "SimilarClauseFeaturizer",
    "SimilarSet",
    "SimilarityConfig",
    "TelicityGPClassifier",
    "TenseForm",
    "build_index",
    "classify",
    "evolve",
    "extract_indicators",
    "ingest",
    "parse_tree",
    "train",
    "validate_record",
]
