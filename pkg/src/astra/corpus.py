"""Institution corpus: loading, validation, and axis-text tokenization.

The input file is a UTF-8 JSON document holding a list of institution
records. Each record carries identity/metadata fields plus an ``axes``
object keyed by the eight canonical axis names (see :class:`AxisId`). The
exact schema is documented in the README.
"""
from __future__ import annotations

import datetime
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

log = logging.getLogger(__name__)


class AxisId(IntEnum):
    """The eight conceptual axes, in fixed canonical order."""

    CURATORIAL_PHILOSOPHY = 0
    TERRITORIAL_RELATION = 1
    KNOWLEDGE_PRODUCTION = 2
    INSTITUTIONAL_GENEALOGY = 3
    TEMPORAL_ORIENTATION = 4
    ECOSYSTEM_FUNCTION = 5
    AUDIENCE_RELATION = 6
    DISCIPLINARY_POSITIONING = 7

    @property
    def key(self) -> str:
        """snake_case key used in input files and exports."""
        return self.name.lower()


AXIS_KEYS = tuple(axis.key for axis in AxisId)

# Primary type labels named in the source dataset; other values are accepted
# with a warning (the full category list is larger than the named ten).
KNOWN_PRIMARY_TYPES = frozenset(
    {
        "Festival",
        "Conference",
        "Center",
        "University",
        "Lab",
        "Biennial",
        "Residency",
        "Education",
        "Award",
        "Other",
    }
)

MIN_FOUNDING_YEAR = 1500

MIN_TOKEN_LENGTH = 3

# Fixed stopword list applied by the tokenizer. Kept deliberately small and
# frozen: changing it changes every downstream codebook and feature matrix.
STOPWORDS = frozenset(
    """
    a an and are as at be been but by for from had has have her his how its
    their them then there these they this that the those to too via was were
    what when where which while who whom why will with within without can
    could did do does done each few into more most not of on onto or our out
    over own per so some such than through under until upon very we you your
    also both any all between during about above below after before again
    further once here now only same other it is if in
    """.split()
)

_SPLIT_RE = re.compile(r"[^a-z0-9]+")


class CorpusError(ValueError):
    """Structured validation failure naming the offending record and field."""

    def __init__(self, message: str, record_id: str | None = None, fld: str | None = None):
        self.record_id = record_id
        self.field = fld
        prefix = ""
        if record_id is not None:
            prefix += f"record {record_id!r}"
        if fld is not None:
            prefix += f" field {fld!r}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


def tokenize_axis(text: str) -> list[str]:
    """Tokenize one axis description.

    Lowercase, split on any non-alphanumeric character, drop tokens shorter
    than three characters and tokens in :data:`STOPWORDS`. Order is
    preserved and duplicates are retained.
    """
    tokens = _SPLIT_RE.split(text.lower())
    return [t for t in tokens if len(t) >= MIN_TOKEN_LENGTH and t not in STOPWORDS]


@dataclass(frozen=True)
class InstitutionProfile:
    """One institution with its eight axis descriptions."""

    id: str
    name: str
    primary_type: str
    country: str
    founding_year: int
    axis_texts: tuple[str, ...]
    secondary_type: str | None = None

    def __post_init__(self) -> None:
        if len(self.axis_texts) != len(AxisId):
            raise CorpusError(
                f"expected {len(AxisId)} axis texts, got {len(self.axis_texts)}",
                record_id=self.id,
                fld="axes",
            )
        for axis in AxisId:
            if not self.axis_texts[axis].strip():
                raise CorpusError("empty axis text", record_id=self.id, fld=axis.key)
        current_year = datetime.date.today().year
        if not MIN_FOUNDING_YEAR <= self.founding_year <= current_year:
            raise CorpusError(
                f"founding_year {self.founding_year} outside "
                f"[{MIN_FOUNDING_YEAR}, {current_year}]",
                record_id=self.id,
                fld="founding_year",
            )

    def axis_text(self, axis: AxisId) -> str:
        return self.axis_texts[axis]

    def tokens(self) -> tuple[list[str], ...]:
        """Token lists for all eight axes, in axis order."""
        return tuple(tokenize_axis(self.axis_texts[axis]) for axis in AxisId)

    def to_record(self) -> dict:
        record = {
            "id": self.id,
            "name": self.name,
            "primary_type": self.primary_type,
            "country": self.country,
            "founding_year": self.founding_year,
            "axes": {axis.key: self.axis_texts[axis] for axis in AxisId},
        }
        if self.secondary_type is not None:
            record["secondary_type"] = self.secondary_type
        return record


@dataclass(frozen=True)
class Corpus:
    """Immutable collection of institution profiles; safe to share across
    pipeline stages."""

    institutions: tuple[InstitutionProfile, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for inst in self.institutions:
            if inst.id in seen:
                raise CorpusError("duplicate id", record_id=inst.id, fld="id")
            seen.add(inst.id)

    def __len__(self) -> int:
        return len(self.institutions)

    def __iter__(self):
        return iter(self.institutions)

    def ids(self) -> list[str]:
        return [inst.id for inst in self.institutions]

    def type_histogram(self) -> dict[str, int]:
        return dict(Counter(inst.primary_type for inst in self.institutions))

    def vocabulary(self) -> set[str]:
        """All distinct tokens across every institution and axis."""
        vocab: set[str] = set()
        for inst in self.institutions:
            for tokens in inst.tokens():
                vocab.update(tokens)
        return vocab

    def token_lists(self) -> dict[str, tuple[list[str], ...]]:
        """Per-institution token lists, keyed by institution id."""
        return {inst.id: inst.tokens() for inst in self.institutions}

    def to_records(self) -> list[dict]:
        return [inst.to_record() for inst in self.institutions]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_records(), indent=2, sort_keys=True, ensure_ascii=False)
            + "\n",
            encoding="utf-8",
        )


def _parse_record(raw: dict, index: int) -> InstitutionProfile:
    record_id = str(raw.get("id") or f"<record {index}>")
    for required in ("id", "name", "primary_type", "country", "founding_year", "axes"):
        if required not in raw:
            raise CorpusError("missing field", record_id=record_id, fld=required)
    axes = raw["axes"]
    if not isinstance(axes, dict):
        raise CorpusError("axes must be an object", record_id=record_id, fld="axes")
    texts: list[str] = []
    for axis in AxisId:
        if axis.key not in axes:
            raise CorpusError("missing axis text", record_id=record_id, fld=axis.key)
        texts.append(str(axes[axis.key]))
    unknown = set(axes) - set(AXIS_KEYS)
    if unknown:
        raise CorpusError(
            f"unknown axis keys {sorted(unknown)}", record_id=record_id, fld="axes"
        )
    year = raw["founding_year"]
    if not isinstance(year, int) or isinstance(year, bool):
        raise CorpusError(
            f"founding_year must be an integer, got {year!r}",
            record_id=record_id,
            fld="founding_year",
        )
    primary_type = str(raw["primary_type"])
    if primary_type not in KNOWN_PRIMARY_TYPES:
        log.warning("record %s: unrecognized primary_type %r", record_id, primary_type)
    secondary = raw.get("secondary_type")
    return InstitutionProfile(
        id=str(raw["id"]),
        name=str(raw["name"]),
        primary_type=primary_type,
        country=str(raw["country"]),
        founding_year=year,
        axis_texts=tuple(texts),
        secondary_type=None if secondary is None else str(secondary),
    )


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a corpus file; logs count and type histogram."""
    path = Path(path)
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        raise CorpusError("no records: file is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise CorpusError("expected a JSON list of institution records")
    if not data:
        raise CorpusError("no records: empty list")
    corpus = Corpus(tuple(_parse_record(raw, i) for i, raw in enumerate(data)))
    log.info(
        "loaded %d institutions from %s; types: %s",
        len(corpus),
        path,
        dict(sorted(corpus.type_histogram().items())),
    )
    return corpus
