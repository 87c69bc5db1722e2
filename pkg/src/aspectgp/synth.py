"""Labeled synthetic corpora with planted, class-conditional morphology."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .clause import SLOTS, AspectLabel, ClauseRecord, ConstituentKey, TenseForm, extract_indicators
from .corpus import Corpus

_CLASSES = ("telic", "non_telic")


def _default_tenses():
    return {"past": 0.8, "present": 0.1, "present_participle": 0.1}


@dataclass
class GenSpec:
    """Generator parameters. Per-class maps are keyed ``"telic"`` / ``"non_telic"``.

    ``vocab_sizes`` counts the tokens per constituent slot, in key order; an
    absent constituent is one extra option on top of them.
    """

    n_clauses: int = 5000
    n_key_clusters: int = 60
    telic_fraction: float = 0.68
    p_progressive: dict = field(default_factory=lambda: {"telic": 0.03, "non_telic": 0.15})
    p_perfect: dict = field(default_factory=lambda: {"telic": 0.60, "non_telic": 0.05})
    tense_distribution: dict = field(
        default_factory=lambda: {"telic": _default_tenses(), "non_telic": _default_tenses()}
    )
    cluster_purity: float = 0.9
    vocab_sizes: tuple = (4, 4, 40, 3, 4)
    seed: int = 42

    def __post_init__(self):
        self.vocab_sizes = tuple(int(v) for v in self.vocab_sizes)
        self.validate()

    def validate(self) -> None:
        probs = [self.telic_fraction, self.cluster_purity]
        for cls in _CLASSES:
            probs += [self.p_progressive[cls], self.p_perfect[cls]]
            dist = self.tense_distribution[cls]
            for tense, p in dist.items():
                TenseForm(tense)
                probs.append(p)
            if abs(sum(dist.values()) - 1.0) > 1e-9:
                raise ValueError(f"{cls} tense distribution sums to {sum(dist.values())}, not 1")
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.n_key_clusters < 1:
            raise ValueError("n_key_clusters must be >= 1")
        if self.n_clauses < 0:
            raise ValueError("n_clauses must be >= 0")
        if len(self.vocab_sizes) != 5 or min(self.vocab_sizes) < 0:
            raise ValueError("vocab_sizes needs five non-negative sizes")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vocab_sizes"] = list(self.vocab_sizes)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "GenSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown GenSpec fields: {', '.join(sorted(unknown))}")
        return cls(**data)


def default_planted_spec() -> GenSpec:
    return GenSpec()


def null_spec(seed: int = 42, **overrides) -> GenSpec:
    """No-signal spec: both classes share one morphology distribution and labels ignore clusters."""
    shared = {
        "p_progressive": {"telic": 0.08, "non_telic": 0.08},
        "p_perfect": {"telic": 0.3, "non_telic": 0.3},
        "cluster_purity": 0.5,
        "seed": seed,
    }
    shared.update(overrides)
    return GenSpec(**shared)


@dataclass
class GenReport:
    class_counts: dict
    indicator_rates: dict
    morphology_rates: dict
    cluster_sizes: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _cluster_keys(rng, spec: GenSpec) -> list[ConstituentKey]:
    options = [[None] + [f"{slot.split('_')[0]}{j}" for j in range(size)]
               for slot, size in zip(SLOTS, spec.vocab_sizes)]
    capacity = int(np.prod([len(o) for o in options]))
    if spec.n_key_clusters > capacity:
        raise ValueError(
            f"vocabulary allows {capacity} distinct keys, fewer than {spec.n_key_clusters} clusters"
        )
    keys: list[ConstituentKey] = []
    seen = set()
    while len(keys) < spec.n_key_clusters:
        key = ConstituentKey(*(o[rng.integers(len(o))] for o in options))
        if key not in seen:
            seen.add(key)
            keys.append(key)
    return keys


def _cluster_majorities(rng, spec: GenSpec) -> np.ndarray:
    """Telic flag per cluster, sized so the realized telic rate targets ``telic_fraction``."""
    purity = spec.cluster_purity
    if abs(2 * purity - 1) < 1e-12:
        share = spec.telic_fraction
    else:
        share = (spec.telic_fraction - (1 - purity)) / (2 * purity - 1)
    share = min(1.0, max(0.0, share))
    n_telic = int(round(share * spec.n_key_clusters))
    majority = np.zeros(spec.n_key_clusters, dtype=bool)
    majority[:n_telic] = True
    return rng.permutation(majority)


def generate(spec: Optional[GenSpec] = None):
    """Draw a corpus from ``spec``.

    Every clause picks a cluster uniformly, copies its key, keeps the
    cluster's majority label with probability ``cluster_purity``, then draws
    progressive, perfect and tense from its class's distributions.

    Returns
    -------
    (Corpus, GenReport)
    """
    spec = spec or default_planted_spec()
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    keys = _cluster_keys(rng, spec)
    majority = _cluster_majorities(rng, spec)

    n = spec.n_clauses
    cluster = rng.integers(spec.n_key_clusters, size=n)
    keep = rng.random(n) < spec.cluster_purity
    telic = np.where(keep, majority[cluster], ~majority[cluster])
    u_prog = rng.random(n)
    u_perf = rng.random(n)
    u_tense = rng.random(n)

    tables = {}
    for cls in _CLASSES:
        dist = spec.tense_distribution[cls]
        names = list(dist)
        tables[cls] = (names, np.cumsum([dist[t] for t in names]))

    records = []
    for i in range(n):
        cls = "telic" if telic[i] else "non_telic"
        names, cum = tables[cls]
        t = min(int(np.searchsorted(cum, u_tense[i], side="right")), len(names) - 1)
        records.append(
            ClauseRecord(
                id=i,
                key=keys[cluster[i]],
                tense=TenseForm(names[t]),
                progressive=bool(u_prog[i] < spec.p_progressive[cls]),
                perfect=bool(u_perf[i] < spec.p_perfect[cls]),
                label=AspectLabel(cls),
            )
        )
    corpus = Corpus(tuple(records), f"synthetic(seed={spec.seed})")
    return corpus, _report(records, cluster, spec)


def _report(records, cluster, spec) -> GenReport:
    counts = {cls: 0 for cls in _CLASSES}
    ind_sum = {cls: np.zeros(5) for cls in _CLASSES}
    morph = {cls: np.zeros(2) for cls in _CLASSES}
    for rec in records:
        cls = rec.label.value
        counts[cls] += 1
        ind_sum[cls] += extract_indicators(rec, rec.key)
        morph[cls] += (rec.progressive, rec.perfect)
    names = ("not_progressive", "special_perfect", "all_match", "not_pres_tense", "past_pres_participle")

    def rate(total, n):
        return [float(v) / n if n else 0.0 for v in total]

    sizes = Counter(np.bincount(cluster, minlength=spec.n_key_clusters).tolist()) if len(cluster) else Counter()
    return GenReport(
        class_counts=counts,
        indicator_rates={cls: dict(zip(names, rate(ind_sum[cls], counts[cls]))) for cls in _CLASSES},
        morphology_rates={
            cls: dict(zip(("progressive", "perfect"), rate(morph[cls], counts[cls]))) for cls in _CLASSES
        },
        cluster_sizes={str(size): c for size, c in sorted(sizes.items())},
    )
