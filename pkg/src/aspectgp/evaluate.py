"""Confusion-matrix metrics, uninformed baselines, binomial test, splitting, and batches."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from .clause import ClauseRecord
from .classifier import Objective, count_matrix, featurize, telic_mask
from .corpus import Corpus, CorpusIndex, SimilarityConfig, build_index
from .gp import GPConfig

METRIC_COLUMNS = (
    "telic_recall",
    "telic_precision",
    "non_telic_recall",
    "non_telic_precision",
    "accuracy",
    "non_telic_f",
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with telic as the positive class."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, gold, predicted) -> "ConfusionMatrix":
        g = telic_mask(gold)
        p = telic_mask(predicted)
        return cls(
            int(np.sum(g & p)), int(np.sum(~g & p)), int(np.sum(g & ~p)), int(np.sum(~g & ~p))
        )


@dataclass(frozen=True)
class MetricsRow:
    telic_recall: float
    telic_precision: float
    non_telic_recall: float
    non_telic_precision: float
    accuracy: float
    non_telic_f: float
    # names of metrics that hit 0/0 and took their conventional value
    flags: tuple[str, ...] = ()

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in METRIC_COLUMNS)


def _ratio(num, den, name, undefined, flags):
    if den == 0:
        flags.append(name)
        return undefined
    return num / den


def f_measure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metrics(cm: ConfusionMatrix) -> MetricsRow:
    """Per-class recall/precision, accuracy and non-telic F-measure.

    A precision with no predictions is 1.0 and a recall with no gold
    members is 0.0; either case is named in ``flags``.
    """
    if cm.n < 1:
        raise ValueError("empty confusion matrix")
    flags: list[str] = []
    t_rec = _ratio(cm.tp, cm.tp + cm.fn, "telic_recall", 0.0, flags)
    t_prec = _ratio(cm.tp, cm.tp + cm.fp, "telic_precision", 1.0, flags)
    nt_rec = _ratio(cm.tn, cm.tn + cm.fp, "non_telic_recall", 0.0, flags)
    nt_prec = _ratio(cm.tn, cm.tn + cm.fn, "non_telic_precision", 1.0, flags)
    # 2PR/(P+R) in count form; matches the training objective bit for bit
    f_den = 2 * cm.tn + cm.fn + cm.fp
    nt_f = 2 * cm.tn / f_den if f_den else 0.0
    return MetricsRow(t_rec, t_prec, nt_rec, nt_prec, (cm.tp + cm.tn) / cm.n, nt_f, tuple(flags))


class BaselineKind(str, enum.Enum):
    ALL_TELIC = "all_telic"
    RANDOM_FRACTION = "random_fraction"


@dataclass(frozen=True)
class BaselineSpec:
    kind: BaselineKind = BaselineKind.ALL_TELIC
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    @classmethod
    def random_fraction(cls, p: float) -> "BaselineSpec":
        return cls(BaselineKind.RANDOM_FRACTION, p)


def baseline(spec: BaselineSpec, base_telic: float, n: int = 1) -> MetricsRow:
    """Expected metrics of an uninformed classifier on data with telic rate ``base_telic``.

    ``RANDOM_FRACTION`` labels a random fraction ``p`` of clauses non-telic;
    its metrics are expectations, not samples. ``n`` is carried for reports only.
    """
    if not 0.0 <= base_telic <= 1.0:
        raise ValueError("base_telic must lie in [0, 1]")
    p = 0.0 if spec.kind is BaselineKind.ALL_TELIC else spec.p
    flags = []
    if p == 0.0:
        flags.append("non_telic_precision")
    if p == 1.0:
        flags.append("telic_precision")
    t_prec = 1.0 if p == 1.0 else base_telic
    nt_prec = 1.0 if p == 0.0 else 1.0 - base_telic
    nt_rec = p
    return MetricsRow(
        telic_recall=1.0 - p,
        telic_precision=t_prec,
        non_telic_recall=nt_rec,
        non_telic_precision=nt_prec,
        accuracy=(1.0 - p) * base_telic + p * (1.0 - base_telic),
        non_telic_f=f_measure(nt_prec, nt_rec) if p > 0 else 0.0,
        flags=tuple(flags),
    )


def _log_choose(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def binomial_test(successes: int, n: int, p0: float) -> float:
    """One-sided exact p-value P[X >= successes] for X ~ Binomial(n, p0)."""
    if n <= 0:
        raise ValueError("binomial test needs n >= 1")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie in (0, 1)")
    if successes == 0:
        return 1.0
    lp, lq = math.log(p0), math.log1p(-p0)
    logs = [_log_choose(n, i) + i * lp + (n - i) * lq for i in range(successes, n + 1)]
    top = max(logs)
    total = math.fsum(math.exp(x - top) for x in logs)
    return min(1.0, math.exp(top + math.log(total)))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    seed: int = 0
    stratified: bool = True


def split_indices(labels, spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/test index partition, per class when ``spec.stratified``.

    Each stratum sends ``floor(size * train_fraction)`` members to training.
    Both index arrays are sorted.
    """
    if len(labels) < 2:
        raise ValueError("need at least 2 labeled clauses to split")
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        telic = telic_mask(labels)
        strata = [np.flatnonzero(telic), np.flatnonzero(~telic)]
        if any(len(s) == 0 for s in strata):
            raise ValueError("stratified split needs both telic and non-telic clauses")
    else:
        strata = [np.arange(len(labels))]
    train = []
    for members in strata:
        perm = rng.permutation(members)
        train.append(perm[: int(math.floor(len(members) * spec.train_fraction))])
    is_train = np.zeros(len(labels), dtype=bool)
    is_train[np.concatenate(train)] = True
    return np.flatnonzero(is_train), np.flatnonzero(~is_train)


def split(clauses: Sequence[ClauseRecord], spec: SplitSpec = SplitSpec()):
    """Partition labeled clauses into (train, test) lists, both in input order."""
    tr, te = split_indices([c.label for c in clauses], spec)
    return [clauses[i] for i in tr], [clauses[i] for i in te]


def sample_labeled(clauses: Sequence[ClauseRecord], n: Optional[int], seed: int) -> list[ClauseRecord]:
    """Seeded subsample of ``n`` clauses, kept in input order; all of them if ``n`` is None."""
    if n is None or n >= len(clauses):
        return list(clauses)
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(clauses), size=n, replace=False))
    return [clauses[i] for i in keep]


@dataclass
class RunResult:
    run: int
    seed: int
    metrics: MetricsRow
    confusion: ConfusionMatrix
    model_tree: str
    threshold: float
    train_objective: float


@dataclass
class BatchResult:
    objective: Objective
    runs: list[RunResult]
    mean: MetricsRow
    baselines: dict[str, MetricsRow] = field(default_factory=dict)
    base_telic: float = 0.0
    n_test: int = 0

    @property
    def majority_rate(self) -> float:
        return max(self.base_telic, 1.0 - self.base_telic)

    def to_text(self) -> str:
        """Tab-separated report: one row per run, the mean, then baselines A/B/C."""
        lines = ["\t".join(("run",) + METRIC_COLUMNS)]

        def row(name, m):
            lines.append("\t".join([name] + [f"{100 * v:.1f}" for v in m.values()]))

        for r in self.runs:
            row(str(r.run), r.metrics)
        row("mean", self.mean)
        for name, m in self.baselines.items():
            row(name, m)
        return "\n".join(lines) + "\n"


def mean_metrics(rows: Sequence[MetricsRow]) -> MetricsRow:
    vals = np.mean([r.values() for r in rows], axis=0)
    flags = tuple(sorted({f for r in rows for f in r.flags}))
    return MetricsRow(*(float(v) for v in vals), flags=flags)


class BatchError(RuntimeError):
    """A run failed; ``completed`` holds the runs that finished before it."""

    def __init__(self, completed, cause):
        self.completed = list(completed)
        self.cause = cause
        super().__init__(f"run {len(self.completed) + 1} failed after {len(self.completed)} completed: {cause}")


def _one_run(run, seed, X, telic, train_fraction, objective, gp_config):
    try:
        return _train_and_test(run, seed, X, telic, train_fraction, objective, gp_config)
    except Exception as exc:
        return exc


def _train_and_test(run, seed, X, telic, train_fraction, objective, gp_config):
    from .estimator import TelicityGPClassifier

    tr, te = split_indices(telic, SplitSpec(train_fraction, seed))
    clf = TelicityGPClassifier.from_config(replace(gp_config, seed=seed), objective=objective)
    clf.fit(X[tr], telic[tr])
    predicted = clf.decision_function(X[te]) > clf.threshold_
    cm = ConfusionMatrix.from_labels(telic[te], predicted)
    return RunResult(run, seed, metrics(cm), cm, str(clf.tree_), clf.threshold_, clf.objective_value_)


def run_batch(
    corpus: Union[Corpus, CorpusIndex],
    clauses: Sequence[ClauseRecord],
    objective: Union[Objective, str] = Objective.ACCURACY,
    n_runs: int = 1,
    base_seed: int = 0,
    gp_config: GPConfig = GPConfig(),
    similarity_config: SimilarityConfig = SimilarityConfig(),
    train_fraction: float = 0.5,
    n_jobs: int = 1,
) -> BatchResult:
    """Train and test ``n_runs`` times on seeded halves and average the test metrics.

    Run ``i`` uses seed ``base_seed + i`` for both its split and its GP. All
    clauses are featurized once up front, so runs only differ in the split
    and the evolved tree. Baselines B and C both use the batch's mean
    non-telic recall as their random non-telic fraction.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    objective = Objective(objective)
    index = corpus if isinstance(corpus, CorpusIndex) else build_index(corpus)
    telic = telic_mask([c.label for c in clauses])
    X = count_matrix([featurize(index, c, similarity_config) for c in clauses])
    jobs = [
        delayed(_one_run)(i + 1, base_seed + i, X, telic, train_fraction, objective, gp_config)
        for i in range(n_runs)
    ]
    outcomes = Parallel(n_jobs=n_jobs)(jobs) if n_jobs != 1 else [f(*a, **kw) for f, a, kw in jobs]
    runs = []
    for out in outcomes:
        if isinstance(out, BaseException):
            raise BatchError(runs, out) from out
        runs.append(out)

    n_test = runs[0].confusion.n
    base_telic = float(np.mean([(r.confusion.tp + r.confusion.fn) / r.confusion.n for r in runs]))
    mean = mean_metrics([r.metrics for r in runs])
    p = min(1.0, max(0.0, mean.non_telic_recall))
    baselines = {
        "baseline_a": baseline(BaselineSpec(), base_telic, n_test),
        "baseline_b": baseline(BaselineSpec.random_fraction(p), base_telic, n_test),
        "baseline_c": baseline(BaselineSpec.random_fraction(p), base_telic, n_test),
    }
    return BatchResult(objective, runs, mean, baselines, base_telic, n_test)
