"""End-to-end acceptance suite. Each test prints one PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from aspectgp.classifier import FeatureMatrix, calibrate_threshold, score
from aspectgp.clause import TERMINALS, IndicatorBits
from aspectgp.cli import main
from aspectgp.corpus import Corpus, SimilarityConfig, build_index, retrieve_similar
from aspectgp.evaluate import BaselineSpec, baseline, binomial_test
from aspectgp.gp import ARITY, ExprTree, GPConfig, eval_tree, evolve, parse_tree, random_tree
from aspectgp.synth import null_spec

from oracles import (
    brute_similar,
    exhaustive_threshold,
    monte_carlo_tail,
    naive_eval,
    naive_score,
    random_key,
    random_records,
    sexpr,
)


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}  {detail}".rstrip())
        return ok

    return emit


def test_baseline_reproduction(report):
    t0 = time.perf_counter()
    base = 138 / 203
    expected = {
        "A": (BaselineSpec(), (100.0, 68.0, 0.0, 100.0, 68.0)),
        "B": (BaselineSpec.random_fraction(0.264), (73.6, 68.0, 26.4, 32.0, 58.5)),
        "C": (BaselineSpec.random_fraction(0.727), (27.3, 68.0, 72.7, 32.0, 41.8)),
    }
    worst = 0.0
    for spec, row in expected.values():
        got = [100 * v for v in baseline(spec, base, 203).values()[:5]]
        worst = max(worst, max(abs(g - w) for g, w in zip(got, row)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.1 and elapsed < 1.0
    assert report(1, "baseline rows A/B/C", ok, f"max |err| {worst:.3f}pp, {elapsed:.3f}s")


def test_retrieval_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(50):
        vocab = [None] + ["a", "b", "c", "d"][: int(rng.integers(1, 5))]
        recs = random_records(rng, int(rng.integers(0, 501)), vocab=vocab)
        index = build_index(Corpus(tuple(recs)))
        for _ in range(20):
            key = random_key(rng, vocab + ["zz"])
            k = int(rng.integers(1, 150))
            self_id = int(rng.integers(len(recs))) if recs and rng.random() < 0.5 else None
            sim = retrieve_similar(index, key, SimilarityConfig(k=k), self_id)
            if (list(sim.member_ids), sim.level_reached) != brute_similar(recs, key, k, self_id):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    assert report(2, "retrieval equals brute-force scan", ok, f"{mismatches} mismatches / 1000, {elapsed:.1f}s")


def _deep_multiply(rng, depth):
    tree = parse_tree("(add (add NP NPT) (add AM PPP))")
    for _ in range(depth):
        other = random_tree(rng, GPConfig(init_depth_range=(1, 3)))
        tree = ExprTree("mul", [tree, ExprTree("add", [other, parse_tree("(add NP NP)")])])
    if rng.random() < 0.5:
        tree = ExprTree("sub", [ExprTree("SP"), tree])
    return tree


def test_tree_evaluation_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    bad = saturated = 0
    for i in range(1000):
        tree = _deep_multiply(rng, int(rng.integers(40, 80))) if i % 10 == 0 else random_tree(rng, GPConfig())
        node = sexpr(str(tree))
        bits = IndicatorBits.from_code(int(rng.integers(32)))
        v = eval_tree(tree, bits)
        bad += v != naive_eval(node, bits)
        saturated += abs(v) >= 2**63 - 1
        rows = tuple(IndicatorBits.from_code(int(c)) for c in rng.integers(32, size=int(rng.integers(0, 120))))
        bad += score(tree, FeatureMatrix(0, rows)) != naive_score(str(tree), rows)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and saturated > 0 and elapsed < 10
    assert report(3, "eval/score equal naive interpreter", ok,
                  f"{bad} mismatches, {saturated} saturated values, {elapsed:.1f}s")


def test_threshold_optimality(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(31)
    bad = 0
    for i in range(200):
        n = int(rng.integers(1, 80))
        spread = int(rng.choice([3, 20, 10**6]))
        scores = rng.integers(-spread, spread + 1, size=n)
        telic = rng.random(n) < rng.random()
        for objective in ("accuracy", "non_telic_f"):
            cal = calibrate_threshold(scores, telic, objective)
            theta, value = exhaustive_threshold(scores.tolist(), telic.tolist(), objective)
            bad += cal.threshold != theta or abs(cal.value - value) > 1e-12
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 10
    assert report(4, "threshold equals exhaustive scan (smallest on ties)", ok, f"{bad} mismatches / 400, {elapsed:.1f}s")


def _tree_ok(tree, max_nodes):
    stack, count = [tree], 0
    while stack:
        node = stack.pop()
        count += 1
        if node.op in TERMINALS:
            if node.children:
                return False
        elif len(node.children) != ARITY[node.op]:
            return False
        stack.extend(node.children)
    return count == tree.size <= max_nodes


def test_elitism_monotonicity(report):
    t0 = time.perf_counter()
    violations = 0
    for seed in range(20):
        cfg = GPConfig(population_size=100, total_inserts=2000, seed=seed)
        target = np.random.default_rng(seed).integers(-3, 4, size=32)

        def fitness(tree):
            return -float(np.abs(np.clip(tree.vector, -10, 10) - target).sum())

        state = {"best": -math.inf, "prev": None}

        def sink(n, best, pop):
            nonlocal violations
            violations += best < state["best"]
            violations += best != pop.fitness.max()
            if n == 0:
                violations += sum(not _tree_ok(t, cfg.max_nodes) for t in pop.trees)
            else:
                # exactly one slot changes per insert; check whichever tree is new
                changed = [i for i, t in enumerate(pop.trees) if t is not state["prev"][i]]
                violations += len(changed) > 1
                violations += sum(not _tree_ok(pop.trees[i], cfg.max_nodes) for i in changed)
            state["best"] = best
            state["prev"] = list(pop.trees)

        evolve(fitness, cfg, progress=sink)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 60
    assert report(5, "best-so-far monotone, trees well formed", ok, f"{violations} violations, {elapsed:.1f}s")


def _report_rows(path):
    lines = path.read_text().splitlines()
    header = lines[0].split("\t")
    return {cells[0]: dict(zip(header[1:], map(float, cells[1:]))) for cells in (l.split("\t") for l in lines[1:])}


@pytest.fixture(scope="module")
def planted_corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("accept") / "planted.jsonl"
    assert main(["synth", "--out", str(path)]) == 0
    return path


def test_planted_signal(report, planted_corpus, tmp_path):
    t0 = time.perf_counter()
    rows = {}
    for objective in ("accuracy", "non_telic_f"):
        out = tmp_path / f"{objective}.tsv"
        assert main(["evaluate", "--corpus", str(planted_corpus), "--labeled", "400", "--runs", "3",
                     "--objective", objective, "--out", str(out)]) == 0
        rows[objective] = _report_rows(out)
    elapsed = time.perf_counter() - t0
    acc = rows["accuracy"]["mean"]["accuracy"] / 100
    all_telic = rows["accuracy"]["baseline_a"]["accuracy"] / 100
    nt_acc = rows["accuracy"]["mean"]["non_telic_recall"]
    nt_f = rows["non_telic_f"]["mean"]["non_telic_recall"]
    ok = acc >= 0.85 and acc > all_telic and acc > 0.68 and nt_f > nt_acc and elapsed <= 600
    assert report(6, "planted signal end-to-end", ok,
                  f"accuracy {acc:.3f} vs all-telic {all_telic:.3f}; "
                  f"non-telic recall F {nt_f:.1f} vs accuracy {nt_acc:.1f}; {elapsed:.0f}s")


def test_null_signal(report, tmp_path):
    t0 = time.perf_counter()
    spec = tmp_path / "null.json"
    spec.write_text(json.dumps(null_spec().to_dict()))
    corpus = tmp_path / "null.jsonl"
    assert main(["synth", "--spec", str(spec), "--out", str(corpus)]) == 0
    out = tmp_path / "null.tsv"
    assert main(["evaluate", "--corpus", str(corpus), "--labeled", "400", "--runs", "3", "--out", str(out)]) == 0
    rows = _report_rows(out)
    elapsed = time.perf_counter() - t0
    acc = rows["mean"]["accuracy"] / 100
    b = rows["baseline_a"]["accuracy"] / 100
    majority = max(b, 1 - b)
    ok = abs(acc - majority) <= 0.05 and elapsed <= 600
    assert report(7, "null signal near majority rate", ok,
                  f"accuracy {acc:.3f}, majority {majority:.3f}, {elapsed:.0f}s")


def test_cli_determinism(report, planted_corpus, tmp_path):
    fast = ["--pop", "100", "--inserts", "1500", "--labeled", "300", "--seed", "11"]
    blobs = {}
    for jobs in ("1", "4"):
        for rep in (0, 1):
            rpt, model = tmp_path / f"r{jobs}{rep}.tsv", tmp_path / f"m{jobs}{rep}.json"
            assert main(["evaluate", "--corpus", str(planted_corpus), "--runs", "4", "--jobs", jobs,
                         "--out", str(rpt), *fast]) == 0
            assert main(["train", "--corpus", str(planted_corpus), "--model", str(model), *fast]) == 0
            blobs[jobs, rep] = (rpt.read_bytes(), model.read_bytes())
    repeat_ok = all(blobs[j, 0] == blobs[j, 1] for j in ("1", "4"))
    across = blobs["1", 0] == blobs["4", 0]
    assert report(8, "byte-identical reruns at --jobs 1 and 4", repeat_ok and across,
                  f"repeat {repeat_ok}, jobs-1 equals jobs-4 {across}")


def test_binomial(report):
    rng = np.random.default_rng(77)
    closed = all(binomial_test(n, n, 0.5) == pytest.approx(0.5**n, rel=1e-9) for n in range(1, 60))
    closed &= all(binomial_test(0, n, p) == 1.0 for n in (1, 7, 300) for p in (0.1, 0.5, 0.9))
    worst = 0.0
    for i in range(10):
        n = int(rng.integers(1, 301))
        p0 = float(rng.uniform(0.05, 0.95))
        k = int(np.clip(round(n * p0 + np.clip(rng.normal(0, 1.5), -2.5, 2.5) * math.sqrt(n * p0 * (1 - p0))), 0, n))
        est, sigma = monte_carlo_tail(k, n, p0, seed=i)
        worst = max(worst, abs(binomial_test(k, n, p0) - est) / sigma)
    ok = closed and worst <= 3
    assert report(9, "binomial test exact and Monte-Carlo agreement", ok,
                  f"closed forms {closed}, worst MC deviation {worst:.2f} sigma")
