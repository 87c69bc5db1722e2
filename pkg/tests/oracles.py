"""Independent reference implementations used only by the tests.

None of these touch the package's evaluation caches, mask indexes or
vectorized scans; they work from first principles on plain Python data.
"""
import math
import re

import numpy as np

from aspectgp.clause import AspectLabel, ClauseRecord, ConstituentKey, TenseForm

LO, HI = -(2**63), 2**63 - 1
TERMINAL_INDEX = {"NP": 0, "SP": 1, "AM": 2, "NPT": 3, "PPP": 4}


def clamp(x):
    return max(LO, min(HI, x))


def sexpr(text):
    """Parse the s-expression text into nested lists (no package code involved)."""
    tokens = re.findall(r"\(|\)|[^\s()]+", text)

    def walk(i):
        if tokens[i] == "(":
            node, i = [tokens[i + 1]], i + 2
            while tokens[i] != ")":
                child, i = walk(i)
                node.append(child)
            return node, i + 1
        return tokens[i], i + 1

    node, end = walk(0)
    assert end == len(tokens)
    return node


def naive_eval(node, bits):
    """Recursive interpreter over the nested-list form; ``bits`` is a 5-tuple."""
    if isinstance(node, str):
        return int(bits[TERMINAL_INDEX[node]])
    op, *args = node
    if op == "if":
        return naive_eval(args[1], bits) if naive_eval(args[0], bits) != 0 else naive_eval(args[2], bits)
    a, b = naive_eval(args[0], bits), naive_eval(args[1], bits)
    if op == "add":
        return clamp(a + b)
    if op == "sub":
        return clamp(a - b)
    if op == "mul":
        return clamp(a * b)
    if op == "and":
        return int(a != 0 and b != 0)
    if op == "or":
        return int(a != 0 or b != 0)
    raise ValueError(op)


def naive_score(tree_text, rows):
    node = sexpr(tree_text)
    return clamp(sum(naive_eval(node, r) for r in rows))


def naive_bits(similar, input_key):
    return (
        0 if similar.progressive else 1,
        1 if (similar.perfect and not similar.progressive) else 0,
        1 if all(a == b for a, b in zip(similar.key, input_key)) else 0,
        0 if similar.tense == TenseForm.PRESENT else 1,
        1 if similar.tense in (TenseForm.PAST, TenseForm.PRESENT_PARTICIPLE) else 0,
    )


def brute_similar(records, key, k, self_id=None):
    """Sort every record by (number of mismatched slots, id) and cut at k.

    Returns (member_ids, level_reached).
    """
    cands = []
    for rec in records:
        if rec.id == self_id:
            continue
        mismatch = sum(1 for a, b in zip(rec.key, key) if a != b)
        cands.append((mismatch, rec.id))
    cands.sort()
    chosen = cands[:k]
    level = chosen[-1][0] if len(cands) >= k else 5
    return [cid for _, cid in chosen], level


def brute_mask_scan(records, key, mask):
    return [
        r.id
        for r in records
        if all((mask >> i) & 1 or r.key[i] == key[i] for i in range(5))
    ]


def objective_at(scores, telic, theta, objective):
    tp = fp = fn = tn = 0
    for s, t in zip(scores, telic):
        pred = s > theta
        if t and pred:
            tp += 1
        elif t:
            fn += 1
        elif pred:
            fp += 1
        else:
            tn += 1
    if objective == "accuracy":
        return (tp + tn) / len(scores)
    prec_den, rec_den = tn + fn, tn + fp
    if prec_den + rec_den == 0:
        return 0.0
    return 2 * tn / (prec_den + rec_den)


def exhaustive_threshold(scores, telic, objective):
    """Scan -inf, every midpoint and +inf in ascending order; first maximum wins."""
    distinct = sorted(set(int(s) for s in scores))
    cands = [-math.inf] + [(a + b) / 2 for a, b in zip(distinct, distinct[1:])] + [math.inf]
    best = None
    for theta in cands:
        v = objective_at(scores, telic, theta, objective)
        if best is None or v > best[1]:
            best = (theta, v)
    return best


TOKENS = [None, "a", "b", "c"]


def random_records(rng, n, vocab=TOKENS):
    tenses = list(TenseForm)
    labels = [AspectLabel.TELIC, AspectLabel.NON_TELIC]
    recs = []
    for i in range(n):
        key = ConstituentKey(*(vocab[rng.integers(len(vocab))] for _ in range(5)))
        recs.append(
            ClauseRecord(
                i,
                key,
                tenses[rng.integers(len(tenses))],
                bool(rng.integers(2)),
                bool(rng.integers(2)),
                labels[rng.integers(2)],
            )
        )
    return recs


def random_key(rng, vocab=TOKENS):
    return ConstituentKey(*(vocab[rng.integers(len(vocab))] for _ in range(5)))


def recount_metrics(gold, pred):
    """Metrics straight from (gold, predicted) pairs; True means telic."""
    pairs = list(zip(gold, pred))
    tp = sum(1 for g, p in pairs if g and p)
    tn = sum(1 for g, p in pairs if not g and not p)
    gold_t = sum(1 for g, _ in pairs if g)
    pred_t = sum(1 for _, p in pairs if p)
    gold_nt = len(pairs) - gold_t
    pred_nt = len(pairs) - pred_t
    return {
        "telic_recall": tp / gold_t if gold_t else 0.0,
        "telic_precision": tp / pred_t if pred_t else 1.0,
        "non_telic_recall": tn / gold_nt if gold_nt else 0.0,
        "non_telic_precision": tn / pred_nt if pred_nt else 1.0,
        "accuracy": (tp + tn) / len(pairs),
    }


def monte_carlo_tail(successes, n, p0, draws=10**6, seed=0):
    rng = np.random.default_rng(seed)
    hits = rng.binomial(n, p0, size=draws) >= successes
    est = hits.mean()
    return est, math.sqrt(max(est * (1 - est), 1e-12) / draws)
