"""Clause records, aspect labels, and the five aspectual indicator bits.

An absent constituent is ``None`` throughout; the wire format spells it ``null``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Mapping, NamedTuple, Optional

SLOTS = (
    "adjunct_preposition",
    "object_determiner",
    "verb",
    "particle",
    "complement_preposition",
)

TERMINALS = ("NP", "SP", "AM", "NPT", "PPP")


class AspectLabel(str, enum.Enum):
    TELIC = "telic"
    NON_TELIC = "non_telic"
    STATE = "state"
    UNKNOWN = "unknown"

    @property
    def is_event(self) -> bool:
        return self in (AspectLabel.TELIC, AspectLabel.NON_TELIC)


class TenseForm(str, enum.Enum):
    PRESENT = "present"
    PAST = "past"
    PRESENT_PARTICIPLE = "present_participle"
    PAST_PARTICIPLE = "past_participle"
    FUTURE = "future"
    OTHER = "other"


# Swap PAST for PAST_PARTICIPLE here to read the participle indicator the other way.
PARTICIPLE_INDICATOR_TENSES = frozenset({TenseForm.PAST, TenseForm.PRESENT_PARTICIPLE})


class ConstituentKey(NamedTuple):
    """The five constituent slots used for clause similarity, in mask order."""

    adjunct_preposition: Optional[str] = None
    object_determiner: Optional[str] = None
    verb: Optional[str] = None
    particle: Optional[str] = None
    complement_preposition: Optional[str] = None

    def masked(self, mask: int) -> tuple:
        """Return the key with every slot whose mask bit is set erased."""
        return tuple(None if mask >> i & 1 else tok for i, tok in enumerate(self))


@dataclass(frozen=True)
class ClauseRecord:
    id: int
    key: ConstituentKey
    tense: TenseForm = TenseForm.OTHER
    progressive: bool = False
    perfect: bool = False
    label: AspectLabel = AspectLabel.UNKNOWN
    source_text: Optional[str] = None


class IndicatorBits(NamedTuple):
    not_progressive: int
    special_perfect: int
    all_match: int
    not_pres_tense: int
    past_pres_participle: int

    @property
    def code(self) -> int:
        """Pack into 0..31, field ``i`` at bit ``i``."""
        return sum(b << i for i, b in enumerate(self))

    @classmethod
    def from_code(cls, code: int) -> "IndicatorBits":
        return cls(*((code >> i) & 1 for i in range(5)))


def extract_indicators(similar: ClauseRecord, input_key: ConstituentKey) -> IndicatorBits:
    not_prog = not similar.progressive
    return IndicatorBits(
        int(not_prog),
        int(similar.perfect and not_prog),
        int(tuple(similar.key) == tuple(input_key)),
        int(similar.tense is not TenseForm.PRESENT),
        int(similar.tense in PARTICIPLE_INDICATOR_TENSES),
    )


class RecordError(ValueError):
    """A raw record failed validation; ``errors`` lists one message per bad field."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _token(value, field, errors):
    if value is None:
        return None
    if not isinstance(value, str):
        errors.append(f"{field}: expected string or null, got {type(value).__name__}")
        return None
    value = value.strip().lower()
    return value or None


def validate_record(raw: Mapping[str, Any], id: int = 0) -> ClauseRecord:
    """Decode one wire-format object into a normalized :class:`ClauseRecord`.

    Missing constituents decode as absent, a missing tense as ``other``, missing
    morphology flags as false and a missing label as ``unknown``.

    Raises
    ------
    RecordError
        With one message per offending field.
    """
    if not isinstance(raw, Mapping):
        raise RecordError([f"expected a JSON object, got {type(raw).__name__}"])
    errors: list[str] = []
    key = ConstituentKey(*(_token(raw.get(slot), slot, errors) for slot in SLOTS))

    tense = TenseForm.OTHER
    if raw.get("tense") is not None:
        try:
            tense = TenseForm(raw["tense"])
        except ValueError:
            errors.append(f"tense: unknown tense {raw['tense']!r}")

    flags = {}
    for name in ("progressive", "perfect"):
        value = raw.get(name, False)
        if not isinstance(value, bool):
            errors.append(f"{name}: expected boolean, got {value!r}")
        flags[name] = bool(value) if isinstance(value, bool) else False

    label = AspectLabel.UNKNOWN
    if raw.get("label") is not None:
        try:
            label = AspectLabel(raw["label"])
        except ValueError:
            errors.append(f"label: unknown label {raw['label']!r}")

    text = raw.get("text")
    if text is not None and not isinstance(text, str):
        errors.append("text: expected string")
        text = None

    if errors:
        raise RecordError(errors)
    return ClauseRecord(id, key, tense, flags["progressive"], flags["perfect"], label, text)


def encode_record(record: ClauseRecord) -> dict:
    """Inverse of :func:`validate_record` for normalized records."""
    out: dict[str, Any] = dict(zip(SLOTS, record.key))
    out["tense"] = record.tense.value
    out["progressive"] = record.progressive
    out["perfect"] = record.perfect
    out["label"] = record.label.value
    if record.source_text is not None:
        out["text"] = record.source_text
    return out
