import io
import json
import math
from collections import defaultdict

import pytest

from aspectgp.clause import validate_record
from aspectgp.corpus import ingest, write_corpus
from aspectgp.synth import GenSpec, default_planted_spec, generate, null_spec


def test_pure_clusters_share_labels():
    corpus, _ = generate(GenSpec(n_clauses=400, n_key_clusters=2, telic_fraction=0.5, cluster_purity=1.0, seed=3))
    by_key = defaultdict(set)
    for r in corpus:
        by_key[r.key].add(r.label)
    assert len(by_key) == 2
    assert all(len(v) == 1 for v in by_key.values())
    assert {next(iter(v)).value for v in by_key.values()} == {"telic", "non_telic"}


def test_planted_perfect_rates():
    spec = GenSpec(n_clauses=10_000, p_perfect={"telic": 0.30, "non_telic": 0.05}, seed=8)
    _, report = generate(spec)
    for cls, p in (("telic", 0.30), ("non_telic", 0.05)):
        n = report.class_counts[cls]
        se = math.sqrt(p * (1 - p) / n)
        assert abs(report.morphology_rates[cls]["perfect"] - p) < 3 * se


def test_null_spec_has_no_special_perfect_gap():
    _, report = generate(null_spec(seed=5, n_clauses=10_000))
    n_t, n_n = report.class_counts["telic"], report.class_counts["non_telic"]
    r_t = report.indicator_rates["telic"]["special_perfect"]
    r_n = report.indicator_rates["non_telic"]["special_perfect"]
    pooled = (r_t * n_t + r_n * n_n) / (n_t + n_n)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n_t + 1 / n_n))
    assert abs(r_t - r_n) < 3 * se


def test_default_spec_report_is_consistent():
    spec = default_planted_spec()
    spec.validate()
    corpus, report = generate(spec)
    assert sum(report.class_counts.values()) == spec.n_clauses == len(corpus)
    assert sum(int(size) * c for size, c in report.cluster_sizes.items()) == spec.n_clauses
    assert abs(report.class_counts["telic"] / spec.n_clauses - 0.68) < 0.05


def test_deterministic_and_seed_sensitive():
    spec = GenSpec(n_clauses=500, n_key_clusters=10, seed=1)
    a, ra = generate(spec)
    b, rb = generate(GenSpec(n_clauses=500, n_key_clusters=10, seed=1))
    c, _ = generate(GenSpec(n_clauses=500, n_key_clusters=10, seed=2))
    assert a.records == b.records and ra.dumps() == rb.dumps()
    assert a.records != c.records


def test_vocab_too_small():
    with pytest.raises(ValueError, match="distinct keys"):
        generate(GenSpec(n_key_clusters=10, vocab_sizes=(0, 0, 2, 0, 0)))


@pytest.mark.parametrize(
    "bad",
    [
        {"telic_fraction": 1.5},
        {"cluster_purity": -0.1},
        {"tense_distribution": {"telic": {"past": 0.5}, "non_telic": {"past": 1.0}}},
        {"tense_distribution": {"telic": {"aorist": 1.0}, "non_telic": {"past": 1.0}}},
        {"n_key_clusters": 0},
    ],
)
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        GenSpec(**bad)


def test_spec_dict_roundtrip():
    spec = null_spec(seed=9)
    assert GenSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    with pytest.raises(ValueError, match="unknown"):
        GenSpec.from_dict({"n_clause": 5})


def test_records_survive_jsonl_roundtrip():
    corpus, _ = generate(GenSpec(n_clauses=300, n_key_clusters=15, seed=4))
    buf = io.StringIO()
    write_corpus(corpus, buf)
    for i, (line, rec) in enumerate(zip(buf.getvalue().splitlines(), corpus)):
        assert validate_record(json.loads(line), id=i) == rec
    again, report = ingest(io.StringIO(buf.getvalue()))
    assert report.rejected == 0 and again.records == corpus.records


def test_empty_corpus():
    corpus, report = generate(GenSpec(n_clauses=0, n_key_clusters=3))
    assert len(corpus) == 0 and sum(report.class_counts.values()) == 0
