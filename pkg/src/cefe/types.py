"""Data model, sentence segmentation and JSONL dataset I/O."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Iterable

from .errors import ConfigError, EmptyInput, IoError, ParseError, SchemaError

SCHEMA_VERSION = 1

SENTENCE_DELIMITERS = frozenset("。！？；")
_LINE_BREAKS = frozenset("\r\n")


class FluencyLabel(IntEnum):
    """Essay fluency grade. Ordinals are fixed: smaller is more fluent."""

    Excellent = 0
    Moderate = 1
    Failing = 2

    @classmethod
    def parse(cls, value) -> "FluencyLabel":
        if isinstance(value, FluencyLabel):
            return value
        if isinstance(value, str):
            try:
                return cls[value]
            except KeyError:
                pass
            if value.isdigit():
                value = int(value)
        if isinstance(value, int) and not isinstance(value, bool):
            try:
                return cls(value)
            except ValueError:
                pass
        raise SchemaError(f"not a fluency label: {value!r}")


class Coarse(str, Enum):
    """The four coarse-grained error categories."""

    Char = "Char"
    Miss = "Miss"
    Redu = "Redu"
    Coll = "Coll"


MISORDER = "Misorder"
REDUNDANCY_OTHER = "RedundancyOtherConstituents"
KNOWN_FINE = (MISORDER, REDUNDANCY_OTHER)


@dataclass(frozen=True)
class CategoryMap:
    """Fine error type -> parent bucket.

    A parent is either one of the four ``Coarse`` names or a pseudo-coarse
    bucket (any other string) that no coarse model predicts. Misorder gets
    its own pseudo bucket by default because no coarse owner is known;
    set ``{"Misorder": "Coll"}`` to fold it under Coll instead.
    """

    parents: dict = field(default_factory=lambda: {MISORDER: MISORDER, REDUNDANCY_OTHER: Coarse.Redu.value})

    def parent(self, fine: str) -> str:
        try:
            return self.parents[fine]
        except KeyError:
            raise ConfigError(f"fine error type {fine!r} has no parent in the category map") from None

    def is_pseudo(self, parent: str) -> bool:
        return parent not in Coarse.__members__

    def category(self, fine: str) -> "ErrorCategory":
        return ErrorCategory(self.parent(fine), fine)

    def with_overrides(self, overrides: dict) -> "CategoryMap":
        merged = dict(self.parents)
        merged.update(overrides or {})
        return CategoryMap(merged)


DEFAULT_CATEGORY_MAP = CategoryMap()


@dataclass(frozen=True)
class ErrorCategory:
    """An error label: a coarse bucket plus an optional fine-grained type."""

    coarse: str
    fine: str | None = None

    @property
    def name(self) -> str:
        """The most specific label; distinct-type checks compare on this."""
        return self.fine or self.coarse

    def to_record(self) -> dict:
        rec = {"coarse": self.coarse}
        if self.fine is not None:
            rec["fine"] = self.fine
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ErrorCategory":
        if not isinstance(rec, dict) or "coarse" not in rec:
            raise SchemaError(f"error label needs a 'coarse' field: {rec!r}")
        return cls(str(rec["coarse"]), rec.get("fine"))

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Sentence:
    """A sentence of an essay.

    ``lead`` and ``tail`` hold the whitespace and line breaks that
    segmentation peeled off around the text, so that joining sentences
    restores the original string. They take no part in equality and are
    not serialized.
    """

    id: str
    text: str
    lead: str = field(default="", compare=False, repr=False)
    tail: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        if not self.text.strip():
            raise SchemaError(f"sentence {self.id!r} has empty text")
        if _LINE_BREAKS & set(self.text):
            raise SchemaError(f"sentence {self.id!r} contains a line break")

    def to_record(self) -> dict:
        return {"id": self.id, "text": self.text}

    @classmethod
    def from_record(cls, rec: dict) -> "Sentence":
        try:
            return cls(str(rec["id"]), rec["text"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"sentence record missing field: {exc}") from None


@dataclass(frozen=True)
class Essay:
    id: str
    sentences: tuple
    label: FluencyLabel | None = None

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.sentences:
            raise SchemaError(f"essay {self.id!r} has no sentences")
        ids = [s.id for s in self.sentences]
        if len(set(ids)) != len(ids):
            raise SchemaError(f"essay {self.id!r} has duplicate sentence ids")
        if self.label is not None:
            object.__setattr__(self, "label", FluencyLabel.parse(self.label))

    @classmethod
    def from_text(cls, id: str, text: str, label=None) -> "Essay":
        return cls(id, segment_sentences(text), label)

    @property
    def text(self) -> str:
        return join_sentences(self.sentences)

    def with_label(self, label) -> "Essay":
        return Essay(self.id, self.sentences, label)

    def to_record(self) -> dict:
        rec = {"id": self.id, "sentences": [s.to_record() for s in self.sentences]}
        if self.label is not None:
            rec["label"] = self.label.name
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Essay":
        if "id" not in rec or "sentences" not in rec:
            raise SchemaError("essay record needs 'id' and 'sentences'")
        sentences = [Sentence.from_record(s) for s in rec["sentences"]]
        return cls(str(rec["id"]), sentences, rec.get("label"))


def segment_sentences(text: str, id_prefix: str = "s") -> list[Sentence]:
    """Split ``text`` after 。！？； and at line breaks.

    A run of delimiters stays on the sentence it ends. Line breaks and
    whitespace-only fragments are kept in ``Sentence.lead``/``tail`` so that
    ``join_sentences(segment_sentences(t)) == t``.

    >>> [s.text for s in segment_sentences("今天下雨。我没去。")]
    ['今天下雨。', '我没去。']
    """
    if not text or not text.strip():
        raise EmptyInput("cannot segment empty or whitespace-only text")

    # pieces alternate between content fragments and line-break runs
    pieces: list[tuple[str, bool]] = []
    buf: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in _LINE_BREAKS:
            if buf:
                pieces.append(("".join(buf), False))
                buf = []
            j = i
            while j < n and text[j] in _LINE_BREAKS:
                j += 1
            pieces.append((text[i:j], True))
            i = j
            continue
        buf.append(ch)
        if ch in SENTENCE_DELIMITERS and (i + 1 == n or text[i + 1] not in SENTENCE_DELIMITERS):
            pieces.append(("".join(buf), False))
            buf = []
        i += 1
    if buf:
        pieces.append(("".join(buf), False))

    texts: list[str] = []
    leads: list[str] = []
    tails: list[str] = []
    pending = ""
    for piece, is_break in pieces:
        if is_break or not piece.strip():
            if texts:
                tails[-1] += piece
            else:
                pending += piece
            continue
        texts.append(piece)
        leads.append(pending)
        tails.append("")
        pending = ""
    return [
        Sentence(f"{id_prefix}{k}", t, lead=ld, tail=tl)
        for k, (t, ld, tl) in enumerate(zip(texts, leads, tails))
    ]


def join_sentences(sentences: Iterable[Sentence]) -> str:
    return "".join(s.lead + s.text + s.tail for s in sentences)


# ---------------------------------------------------------------------------
# JSONL datasets

_REQUIRED_FIELDS = {
    "essay": ("id", "sentences"),
    "sentence": ("id", "text"),
    "pair": ("id", "source", "target"),
    "any": (),
}


@dataclass
class Dataset:
    """An ordered list of JSON records of one kind.

    Records are plain dicts; fields this package does not know about are
    carried through untouched.
    """

    items: list = field(default_factory=list)
    kind: str = "any"
    schema_version: int = SCHEMA_VERSION

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def _check_record(rec: Any, kind: str, line: int, path) -> None:
    if not isinstance(rec, dict):
        raise ParseError("record is not a JSON object", line=line, path=path)
    missing = [f for f in _REQUIRED_FIELDS[kind] if f not in rec]
    if missing:
        raise SchemaError(f"{path}:{line}: {kind} record missing {missing}")
    if kind == "essay":
        Essay.from_record(rec)


def load_dataset(path, kind: str = "any") -> Dataset:
    """Read a JSONL file. Raises ParseError (with line number) or SchemaError."""
    if kind not in _REQUIRED_FIELDS:
        raise SchemaError(f"unknown dataset kind {kind!r}")
    path = Path(path)
    items = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=lineno, path=path) from None
            _check_record(rec, kind, lineno, path)
            version = rec.pop("schema_version", SCHEMA_VERSION)
            if version != SCHEMA_VERSION:
                raise SchemaError(f"{path}:{lineno}: schema_version {version} unsupported (want {SCHEMA_VERSION})")
            items.append(rec)
    return Dataset(items, kind)


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def save_dataset(d: Dataset, path) -> None:
    """Write one record per line, keys sorted, UTF-8."""
    path = Path(path)
    lines = []
    for rec in d.items:
        out = dict(rec)
        out["schema_version"] = d.schema_version
        lines.append(dumps_record(out) + "\n")
    try:
        if path.parent and not path.parent.exists():
            os.makedirs(path.parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_essays(path) -> list[Essay]:
    return [Essay.from_record(r) for r in load_dataset(path, "essay")]


def save_essays(essays: Iterable[Essay], path) -> None:
    save_dataset(Dataset([e.to_record() for e in essays], "essay"), path)
