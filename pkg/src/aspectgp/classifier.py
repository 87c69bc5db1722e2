"""Telicity scoring with an evolved tree: featurization, threshold calibration, training."""
from __future__ import annotations

import enum
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .clause import AspectLabel, ClauseRecord, IndicatorBits, extract_indicators
from .corpus import Corpus, CorpusIndex, SimilarityConfig, build_index, retrieve_similar
from .gp import INT64_MAX, ExprTree, GPConfig, parse_tree, saturate


class Objective(str, enum.Enum):
    ACCURACY = "accuracy"
    NON_TELIC_F = "non_telic_f"


@dataclass(frozen=True)
class FeatureMatrix:
    """Indicator bits of every similar-set member, in member order."""

    clause_id: int
    rows: tuple[IndicatorBits, ...]
    level_reached: int = 5

    def __len__(self):
        return len(self.rows)

    def codes(self) -> np.ndarray:
        return np.array([r.code for r in self.rows], dtype=np.int64)

    def counts(self) -> np.ndarray:
        """Histogram of rows over the 32 indicator codes."""
        return np.bincount(self.codes(), minlength=32).astype(np.int64)


def featurize(index: CorpusIndex, clause: ClauseRecord, config: SimilarityConfig = SimilarityConfig()) -> FeatureMatrix:
    """Indicator rows for ``clause``'s similar set, memoized on the index."""
    cache = index.feature_cache
    key = (clause, config)
    fm = cache.get(key)
    if fm is None:
        sim = retrieve_similar(index, clause.key, config, index.self_id(clause))
        recs = index.corpus.records
        rows = tuple(extract_indicators(recs[i], clause.key) for i in sim.member_ids)
        fm = cache[key] = FeatureMatrix(clause.id, rows, sim.level_reached)
    return fm


def count_matrix(features: Sequence[FeatureMatrix]) -> np.ndarray:
    if not features:
        return np.zeros((0, 32), dtype=np.int64)
    return np.vstack([fm.counts() for fm in features])


def scores_from_counts(tree: ExprTree, counts: np.ndarray, row_total: Optional[int] = None) -> np.ndarray:
    """Per-row scores of ``tree`` from an (n, 32) code-count matrix.

    A score is the exact sum of the tree's per-clause values, saturated to
    int64 once at the end, so it does not depend on row order.
    """
    if row_total is None:
        row_total = int(counts.sum(axis=1).max()) if len(counts) else 0
    bound = max(abs(int(v)) for v in (tree.vector.max(), tree.vector.min()))
    if bound * row_total <= INT64_MAX:
        return counts @ tree.vector
    exact = counts.astype(object) @ np.array(tree.values, dtype=object)
    return np.array([saturate(int(x)) for x in exact], dtype=np.int64)


def score(tree: ExprTree, fm: FeatureMatrix) -> int:
    if not len(fm):
        return 0
    return int(scores_from_counts(tree, fm.counts()[None, :])[0])


def telic_mask(labels) -> np.ndarray:
    """Boolean array (True = telic) from labels; anything but telic/non-telic is rejected."""
    if isinstance(labels, np.ndarray) and labels.dtype == bool:
        return labels
    out = np.empty(len(labels), dtype=bool)
    for i, lab in enumerate(labels):
        if isinstance(lab, (bool, np.bool_)):
            out[i] = bool(lab)
            continue
        lab = AspectLabel(lab)
        if not lab.is_event:
            raise ValueError(f"label {lab.value!r} is not telic or non-telic")
        out[i] = lab is AspectLabel.TELIC
    return out


@dataclass(frozen=True)
class Calibration:
    threshold: float
    value: float
    # F-measure objective hit 0/0 (no non-telic gold and no non-telic predictions)
    undefined: bool = False


def _scan(scores: np.ndarray, telic: np.ndarray, objective: Objective) -> Calibration:
    n = len(scores)
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    uniq, start = np.unique(s, return_index=True)
    # candidate j predicts the first j distinct score groups non-telic
    n_pred_nt = np.append(start, n)
    cum_t = np.concatenate(([0], np.cumsum(telic[order])))
    fn = cum_t[n_pred_nt]
    tn = n_pred_nt - fn
    n_telic = int(cum_t[-1])
    if objective is Objective.ACCURACY:
        correct = (n_telic - fn) + tn
        j = int(np.argmax(correct))
        value, undefined = correct[j] / n, False
    else:
        denom = n_pred_nt + (n - n_telic)
        f = np.divide(2 * tn, denom, out=np.zeros(len(denom)), where=denom > 0)
        j = int(np.argmax(f))
        value, undefined = float(f[j]), bool(denom[j] == 0)
    if j == 0:
        theta = -math.inf
    elif j == len(uniq):
        theta = math.inf
    else:
        theta = (int(uniq[j - 1]) + int(uniq[j])) / 2
    return Calibration(theta, float(value), undefined)


def calibrate_threshold(scores, labels, objective: Union[Objective, str] = Objective.ACCURACY) -> Calibration:
    """Pick the cutoff maximizing ``objective`` under the rule score > threshold -> telic.

    Candidates are -inf, the midpoints between consecutive distinct scores,
    and +inf; ties go to the smallest candidate.
    """
    scores = np.asarray(scores, dtype=np.int64)
    if scores.ndim != 1 or not len(scores):
        raise ValueError("need a non-empty 1-d sequence of scores")
    telic = telic_mask(labels)
    if len(telic) != len(scores):
        raise ValueError("scores and labels differ in length")
    return _scan(scores, telic, Objective(objective))


def make_fitness(features, labels, objective: Union[Objective, str] = Objective.ACCURACY) -> Callable[[ExprTree], float]:
    """Fitness closure over precomputed features; it never touches a corpus index.

    ``features`` is a sequence of :class:`FeatureMatrix` or an (n, 32) count matrix.
    """
    counts = features if isinstance(features, np.ndarray) else count_matrix(features)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    telic = telic_mask(labels)
    objective = Objective(objective)
    row_total = int(counts.sum(axis=1).max()) if len(counts) else 0

    def fitness(tree: ExprTree) -> float:
        return _scan(scores_from_counts(tree, counts, row_total), telic, objective).value

    return fitness


def predict_label(score_value: int, threshold: float) -> AspectLabel:
    return AspectLabel.TELIC if score_value > threshold else AspectLabel.NON_TELIC


@dataclass(frozen=True)
class ClassifierModel:
    tree: ExprTree
    threshold: float
    objective: Objective
    similarity_config: SimilarityConfig = SimilarityConfig()
    gp_fingerprint: str = ""
    objective_value: float = 0.0
    seed: int = 0
    trained_on: int = 0

    def to_dict(self) -> dict:
        thr = self.threshold
        if math.isinf(thr):
            thr = "+inf" if thr > 0 else "-inf"
        return {
            "tree": str(self.tree),
            "threshold": thr,
            "objective": self.objective.value,
            "k": self.similarity_config.k,
            "seed": self.seed,
            "trained_on": self.trained_on,
            "objective_value": self.objective_value,
            "gp_fingerprint": self.gp_fingerprint,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierModel":
        thr = data["threshold"]
        thr = float(thr.replace("+", "")) if isinstance(thr, str) else float(thr)
        return cls(
            tree=parse_tree(data["tree"]),
            threshold=thr,
            objective=Objective(data["objective"]),
            similarity_config=SimilarityConfig(k=int(data["k"])),
            gp_fingerprint=data.get("gp_fingerprint", ""),
            objective_value=float(data["objective_value"]),
            seed=int(data["seed"]),
            trained_on=int(data["trained_on"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def save_model(model: ClassifierModel, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model.dumps())


def load_model(path: Union[str, os.PathLike]) -> ClassifierModel:
    with open(path, encoding="utf-8") as fh:
        return ClassifierModel.from_dict(json.load(fh))


@dataclass
class TrainReport:
    model: ClassifierModel
    history: list[tuple[int, float]] = field(default_factory=list)
    elapsed: float = 0.0
    n_train: int = 0

    def to_dict(self, history_every: int = 100) -> dict:
        """JSON-ready summary; wall time is left out so reports replay byte-identically."""
        hist = [h for h in self.history if h[0] % history_every == 0 or h is self.history[-1]]
        return {
            "model": self.model.to_dict(),
            "n_train": self.n_train,
            "history": [[n, f] for n, f in hist],
        }


def _as_index(corpus: Union[Corpus, CorpusIndex]) -> CorpusIndex:
    return corpus if isinstance(corpus, CorpusIndex) else build_index(corpus)


def check_training_set(clauses: Sequence[ClauseRecord]) -> np.ndarray:
    telic = telic_mask([c.label for c in clauses])
    if len(telic) < 2 or telic.all() or not telic.any():
        raise ValueError("degenerate training set")
    return telic


def train(
    corpus: Union[Corpus, CorpusIndex],
    clauses: Sequence[ClauseRecord],
    objective: Union[Objective, str] = Objective.ACCURACY,
    gp_config: GPConfig = GPConfig(),
    similarity_config: SimilarityConfig = SimilarityConfig(),
    verbose: int = 0,
) -> TrainReport:
    """Featurize ``clauses`` once, evolve a tree on them, and recalibrate its threshold."""
    from .estimator import TelicityGPClassifier

    start = time.perf_counter()
    check_training_set(clauses)
    index = _as_index(corpus)
    X = count_matrix([featurize(index, c, similarity_config) for c in clauses])
    y = [c.label.value for c in clauses]
    clf = TelicityGPClassifier.from_config(gp_config, objective=objective, verbose=verbose).fit(X, y)
    model = clf.to_model(similarity_config)
    return TrainReport(model, clf.history_, time.perf_counter() - start, len(clauses))


def classify(model: ClassifierModel, index: CorpusIndex, clause: ClauseRecord) -> tuple[AspectLabel, int]:
    s = score(model.tree, featurize(index, clause, model.similarity_config))
    return predict_label(s, model.threshold), s
