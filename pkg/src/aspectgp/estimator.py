"""scikit-learn estimator wrappers.

``SimilarClauseFeaturizer`` maps clause records to an (n, 32) matrix counting
how many similar-set members carry each of the 32 indicator-bit patterns;
``TelicityGPClassifier`` evolves a tree on such a matrix. Chained in a
``Pipeline`` they form the full clause classifier.
"""
from __future__ import annotations

import logging
import sys

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .classifier import (
    ClassifierModel,
    Objective,
    calibrate_threshold,
    count_matrix,
    featurize,
    make_fitness,
    scores_from_counts,
    telic_mask,
)
from .corpus import Corpus, CorpusIndex, SimilarityConfig, build_index
from .gp import GPConfig, evolve

logger = logging.getLogger(__name__)

CLASSES = np.array(["non_telic", "telic"])


class SimilarClauseFeaturizer(TransformerMixin, BaseEstimator):
    """Turn clauses into indicator-pattern counts over their similar corpus clauses.

    Parameters
    ----------
    corpus : Corpus or CorpusIndex
        Reference corpus searched for similar clauses.
    k : int, default=100
        Similar clauses gathered per input.
    exclude_self : bool, default=True
        Drop an input clause from its own similar set when it is a corpus member.
    """

    def __init__(self, corpus=None, k=100, exclude_self=True):
        self.corpus = corpus
        self.k = k
        self.exclude_self = exclude_self

    def fit(self, X=None, y=None):
        if self.corpus is None:
            raise ValueError("SimilarClauseFeaturizer needs a corpus")
        if isinstance(self.corpus, CorpusIndex):
            self.index_ = self.corpus
        else:
            self.index_ = build_index(self.corpus if isinstance(self.corpus, Corpus) else Corpus(tuple(self.corpus)))
        self.config_ = SimilarityConfig(int(self.k), bool(self.exclude_self))
        return self

    def featurize(self, X):
        check_is_fitted(self, "index_")
        return [featurize(self.index_, clause, self.config_) for clause in X]

    def transform(self, X):
        return count_matrix(self.featurize(X))


class TelicityGPClassifier(ClassifierMixin, BaseEstimator):
    """Steady-state GP classifier over indicator-pattern count matrices.

    The decision score of a row is the sum, over its similar clauses, of the
    evolved tree's value; rows scoring above ``threshold_`` are telic.

    Attributes
    ----------
    tree_ : ExprTree
    threshold_ : float
    objective_value_ : float
        Training objective at ``threshold_``.
    history_ : list of (insert, best fitness)
    """

    def __init__(
        self,
        objective="accuracy",
        population_size=500,
        total_inserts=10_000,
        tournament_size=4,
        max_nodes=256,
        init_depth_range=(2, 6),
        mutation_rate=0.0,
        random_state=None,
        verbose=0,
    ):
        self.objective = objective
        self.population_size = population_size
        self.total_inserts = total_inserts
        self.tournament_size = tournament_size
        self.max_nodes = max_nodes
        self.init_depth_range = init_depth_range
        self.mutation_rate = mutation_rate
        self.random_state = random_state
        self.verbose = verbose

    @classmethod
    def from_config(cls, config: GPConfig, **kwargs):
        return cls(
            population_size=config.population_size,
            total_inserts=config.total_inserts,
            tournament_size=config.tournament_size,
            max_nodes=config.max_nodes,
            init_depth_range=config.init_depth_range,
            mutation_rate=config.mutation_rate,
            random_state=config.seed,
            **kwargs,
        )

    def _gp_config(self) -> GPConfig:
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % 2**63)
        return GPConfig(
            population_size=self.population_size,
            total_inserts=self.total_inserts,
            tournament_size=self.tournament_size,
            max_nodes=self.max_nodes,
            init_depth_range=tuple(self.init_depth_range),
            mutation_rate=self.mutation_rate,
            seed=int(seed),
        )

    def _progress(self, every):
        def sink(n, best, pop):
            if n % every == 0:
                print(f"insert {n}\tbest {best:.4f}", file=sys.stderr)

        return sink

    def fit(self, X, y):
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != 32:
            raise ValueError(f"expected 32 indicator-pattern columns, got {X.shape[1]}")
        telic = telic_mask(y)
        if len(telic) != len(X):
            raise ValueError("X and y differ in length")
        if len(telic) < 2 or telic.all() or not telic.any():
            raise ValueError("degenerate training set")
        objective = Objective(self.objective)
        config = self._gp_config()
        progress = self._progress(max(1, config.total_inserts // 10)) if self.verbose else None
        result = evolve(make_fitness(X, telic, objective), config, progress=progress)
        cal = calibrate_threshold(scores_from_counts(result.best, X), telic, objective)

        self.classes_ = CLASSES
        self.n_features_in_ = 32
        self.gp_config_ = config
        self.tree_ = result.best
        self.threshold_ = cal.threshold
        self.objective_value_ = cal.value
        self.history_ = result.history
        self.n_train_ = len(X)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.int64)
        return scores_from_counts(self.tree_, X)

    def predict(self, X):
        return np.where(self.decision_function(X) > self.threshold_, "telic", "non_telic")

    def to_model(self, similarity_config: SimilarityConfig = SimilarityConfig()) -> ClassifierModel:
        check_is_fitted(self, "tree_")
        return ClassifierModel(
            tree=self.tree_,
            threshold=self.threshold_,
            objective=Objective(self.objective),
            similarity_config=similarity_config,
            gp_fingerprint=self.gp_config_.fingerprint(),
            objective_value=self.objective_value_,
            seed=self.gp_config_.seed,
            trained_on=self.n_train_,
        )
