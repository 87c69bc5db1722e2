"""Corpus ingestion, the 32 wildcard-mask indexes, and similar-clause retrieval."""
from __future__ import annotations

import io
import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

from .clause import (
    SLOTS,
    AspectLabel,
    ClauseRecord,
    ConstituentKey,
    RecordError,
    encode_record,
    extract_indicators,
    validate_record,
)

logger = logging.getLogger(__name__)

N_MASKS = 32
MASKS_BY_LEVEL = tuple(
    tuple(m for m in range(N_MASKS) if bin(m).count("1") == level) for level in range(6)
)
_KNOWN_FIELDS = frozenset(SLOTS) | {"tense", "progressive", "perfect", "label", "text"}


@dataclass(frozen=True)
class Corpus:
    records: tuple[ClauseRecord, ...] = ()
    source_name: str = "<memory>"

    def __post_init__(self):
        for i, rec in enumerate(self.records):
            if rec.id != i:
                raise ValueError(f"record at position {i} has id {rec.id}")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labeled(self) -> list[ClauseRecord]:
        """Records usable for supervision (telic or non-telic gold label)."""
        return [r for r in self.records if r.label.is_event]


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)


def ingest(stream: Union[str, os.PathLike, IO[str], Iterable[str]], source_name: Optional[str] = None):
    """Read a JSON-lines clause stream into a :class:`Corpus`.

    Malformed lines are skipped and reported by 1-based line number; blank
    lines are ignored. Ids are assigned in acceptance order.

    Returns
    -------
    (Corpus, IngestReport)
    """
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, encoding="utf-8") as fh:
            return ingest(fh, source_name or os.fspath(stream))

    records: list[ClauseRecord] = []
    report = IngestReport()
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            report.rejected += 1
            report.errors.append((lineno, f"invalid JSON: {exc.msg}"))
            continue
        try:
            rec = validate_record(raw, id=len(records))
        except RecordError as exc:
            report.rejected += 1
            report.errors.extend((lineno, msg) for msg in exc.errors)
            continue
        extra = sorted(set(raw) - _KNOWN_FIELDS)
        if extra:
            msg = f"ignored unknown fields {', '.join(extra)}"
            logger.warning("line %d: %s", lineno, msg)
            report.warnings.append((lineno, msg))
        records.append(rec)
        report.accepted += 1
    name = source_name or getattr(stream, "name", "<stream>")
    return Corpus(tuple(records), str(name)), report


def write_corpus(records: Iterable[ClauseRecord], path_or_file) -> None:
    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file, "w", encoding="utf-8") as fh:
            return write_corpus(records, fh)
    for rec in records:
        path_or_file.write(json.dumps(encode_record(rec), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class SimilarityConfig:
    k: int = 100
    exclude_self: bool = True

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class SimilarSet:
    input_key: ConstituentKey
    member_ids: tuple[int, ...]
    level_reached: int
    exact_count: int
    # members first matched at each level 0..level_reached
    level_counts: tuple[int, ...] = ()


class CorpusIndex:
    """Exact-match maps from masked key to ascending id list, one per wildcard mask.

    Bit ``i`` of a mask wildcards slot ``i`` of :class:`ConstituentKey`.
    Immutable after construction apart from the ``query_count`` diagnostic.
    """

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        maps = [defaultdict(list) for _ in range(N_MASKS)]
        for rec in corpus.records:
            for mask in range(N_MASKS):
                maps[mask][rec.key.masked(mask)].append(rec.id)
        self._maps = [dict(m) for m in maps]
        self.query_count = 0
        self.feature_cache: dict = {}

    def __len__(self):
        return len(self.corpus)

    def lookup(self, mask: int, key: ConstituentKey) -> list[int]:
        return self._maps[mask].get(ConstituentKey(*key).masked(mask), [])

    def entries(self, mask: int) -> dict:
        return self._maps[mask]

    def self_id(self, clause: ClauseRecord) -> Optional[int]:
        """``clause.id`` when the clause is itself the corpus record with that id."""
        recs = self.corpus.records
        if 0 <= clause.id < len(recs) and recs[clause.id] == clause:
            return clause.id
        return None


def build_index(corpus: Corpus) -> CorpusIndex:
    return CorpusIndex(corpus)


def retrieve_similar(
    index: CorpusIndex,
    input_key: ConstituentKey,
    config: SimilarityConfig = SimilarityConfig(),
    self_id: Optional[int] = None,
) -> SimilarSet:
    """Collect the ``config.k`` clauses sharing the most constituents with ``input_key``.

    Wildcard levels are relaxed cumulatively from 0 to 5 until at least ``k``
    clauses have matched. Members are ordered by the level at which they first
    matched, then by ascending id; the last level is truncated by id.
    ``self_id`` is dropped from the result when ``config.exclude_self`` is set.
    """
    index.query_count += 1
    input_key = ConstituentKey(*input_key)
    k = config.k
    skip = self_id if config.exclude_self else None
    members: list[int] = []
    seen: set[int] = set()
    counts: list[int] = []
    level = 5
    for lvl in range(6):
        fresh: set[int] = set()
        for mask in MASKS_BY_LEVEL[lvl]:
            fresh.update(index.lookup(mask, input_key))
        fresh -= seen
        fresh.discard(skip)
        ordered = sorted(fresh)
        room = k - len(members)
        if len(ordered) >= room:
            members.extend(ordered[:room])
            counts.append(room)
            level = lvl
            break
        members.extend(ordered)
        counts.append(len(ordered))
        seen |= fresh
    return SimilarSet(input_key, tuple(members), level, counts[0] if counts else 0, tuple(counts))


@dataclass
class FrequencyTable:
    """Mean percentage of similar clauses carrying each indicator, per gold class."""

    telic: np.ndarray
    non_telic: np.ndarray
    n_telic: int
    n_non_telic: int

    NAMES = ("NotProgressive", "SpecialPerfect", "allMatch", "NotPresTense", "Past/PresParticiple")

    def rows(self):
        for i, name in enumerate(self.NAMES):
            yield name, float(self.telic[i]), float(self.non_telic[i])

    def to_text(self) -> str:
        lines = ["indicator\ttelic\tnon_telic"]
        lines += [f"{name}\t{t:.2f}\t{nt:.2f}" for name, t, nt in self.rows()]
        lines.append(f"n\t{self.n_telic}\t{self.n_non_telic}")
        return "\n".join(lines) + "\n"


def indicator_rates(index: CorpusIndex, clause: ClauseRecord, config: SimilarityConfig) -> Optional[np.ndarray]:
    """Percentage of the clause's similar set with each indicator set, or None if empty."""
    sim = retrieve_similar(index, clause.key, config, index.self_id(clause))
    if not sim.member_ids:
        return None
    recs = index.corpus.records
    bits = np.array([extract_indicators(recs[i], clause.key) for i in sim.member_ids])
    return 100.0 * bits.mean(axis=0)


def frequency_table(
    index: CorpusIndex,
    labeled: Sequence[ClauseRecord],
    config: SimilarityConfig = SimilarityConfig(),
) -> FrequencyTable:
    """Average indicator percentages over the similar sets of telic and non-telic inputs."""
    if not labeled:
        raise ValueError("no labeled clauses")
    per_class: dict[AspectLabel, list] = {AspectLabel.TELIC: [], AspectLabel.NON_TELIC: []}
    for clause in labeled:
        if clause.label not in per_class:
            raise ValueError(f"clause {clause.id} has non-event label {clause.label.value}")
        rates = indicator_rates(index, clause, config)
        if rates is not None:
            per_class[clause.label].append(rates)

    def mean(rows):
        return np.mean(rows, axis=0) if rows else np.full(5, np.nan)

    return FrequencyTable(
        mean(per_class[AspectLabel.TELIC]),
        mean(per_class[AspectLabel.NON_TELIC]),
        len(per_class[AspectLabel.TELIC]),
        len(per_class[AspectLabel.NON_TELIC]),
    )


def read_corpus_text(text: str) -> tuple[Corpus, IngestReport]:
    return ingest(io.StringIO(text), "<string>")
