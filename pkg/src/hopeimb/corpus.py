"""Dataset ingestion, tokenization and corpus statistics."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

log = logging.getLogger(__name__)


class Label(str, enum.Enum):
    HOPE = "Hope"
    NON_HOPE = "NonHope"
    NOT_ENGLISH = "NotEnglish"

    @property
    def index(self) -> int:
        """Integer target used by the classifier (Hope is the positive class)."""
        if self is Label.HOPE:
            return 1
        if self is Label.NON_HOPE:
            return 0
        raise ValueError("NotEnglish has no classifier index")

    @classmethod
    def from_index(cls, i: int) -> "Label":
        return cls.HOPE if int(i) == 1 else cls.NON_HOPE


class Split(str, enum.Enum):
    TRAIN = "Train"
    VALIDATION = "Validation"
    TEST = "Test"


class Provenance(str, enum.Enum):
    ORIGINAL = "Original"
    CONTEXTUAL = "ContextualAug"
    BACK_TRANSLATION = "BackTranslationAug"


DEFAULT_LABEL_STRINGS: dict[str, Label] = {
    "Hope_speech": Label.HOPE,
    "Non_hope_speech": Label.NON_HOPE,
    "not-English": Label.NOT_ENGLISH,
}


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(raw_text: str) -> list[str]:
    """Lowercase, split on whitespace and strip edge punctuation from each piece.

    >>> tokenize("I'm so proud for her.")
    ["i'm", 'so', 'proud', 'for', 'her']
    """
    tokens = []
    for piece in raw_text.lower().split():
        start, end = 0, len(piece)
        while start < end and _is_punct(piece[start]):
            start += 1
        while end > start and _is_punct(piece[end - 1]):
            end -= 1
        if start < end:
            tokens.append(piece[start:end])
    return tokens


@dataclass(frozen=True)
class LabeledDocument:
    id: str
    raw_text: str
    tokens: tuple[str, ...]
    label: Label
    split: Split = Split.TRAIN
    provenance: Provenance = Provenance.ORIGINAL
    # set by contextual augmentation when fewer than a_min words could be replaced
    under_augmented: bool = field(default=False, compare=False)

    @classmethod
    def from_text(cls, id: str, raw_text: str, label: Label, split: Split = Split.TRAIN,
                  provenance: Provenance = Provenance.ORIGINAL) -> "LabeledDocument":
        return cls(id, raw_text, tuple(tokenize(raw_text)), Label(label), Split(split),
                   Provenance(provenance))

    @classmethod
    def from_tokens(cls, id: str, tokens: Iterable[str], label: Label,
                    split: Split = Split.TRAIN,
                    provenance: Provenance = Provenance.ORIGINAL) -> "LabeledDocument":
        tokens = tuple(tokens)
        return cls(id, " ".join(tokens), tokens, Label(label), Split(split), Provenance(provenance))

    def with_tokens(self, tokens: Iterable[str], **changes) -> "LabeledDocument":
        tokens = tuple(tokens)
        return replace(self, raw_text=" ".join(tokens), tokens=tokens, **changes)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.raw_text,
            "label": self.label.value,
            "split": self.split.value,
            "provenance": self.provenance.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LabeledDocument":
        return cls.from_text(str(d["id"]), d["text"], Label(d["label"]), Split(d["split"]),
                             Provenance(d.get("provenance", Provenance.ORIGINAL.value)))


@dataclass(frozen=True)
class RecordError:
    line: int
    message: str


@dataclass
class IngestResult:
    """Documents read from one file plus what was filtered or rejected on the way."""

    documents: list[LabeledDocument]
    n_dropped: int = 0
    errors: list[RecordError] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)


def _iter_records(text: str, fmt: str):
    """Yield (line_number, text_field, label_field) or (line_number, None, error_message)."""
    if fmt == "tsv":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            if "\t" not in line:
                yield lineno, None, "missing TAB separator"
                continue
            body, label = line.rsplit("\t", 1)
            yield lineno, body, label.strip()
    elif fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            return
        missing = {"text", "label"} - set(reader.fieldnames)
        if missing:
            yield 1, None, f"header lacks column(s) {sorted(missing)}"
            return
        for row in reader:
            lineno = reader.line_num
            if row.get("text") is None or row.get("label") is None:
                yield lineno, None, "short record"
                continue
            yield lineno, row["text"], row["label"].strip()
    elif fmt == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield lineno, obj, None
            except (json.JSONDecodeError, TypeError) as exc:
                yield lineno, None, f"bad JSON: {exc}"
    else:
        raise ValueError(f"unknown format {fmt!r}; expected tsv, csv or jsonl")


def ingest(path: str | Path, format: str | None = None, *, split: Split = Split.TRAIN,
           label_strings: Mapping[str, Label] | None = None,
           keep_not_english: bool = False, id_prefix: str | None = None) -> IngestResult:
    """Read a labelled corpus file.

    ``format`` is inferred from the suffix when omitted. Malformed records and
    unknown labels are collected in ``errors`` with their line number; reading
    continues past them. NotEnglish records are dropped unless
    ``keep_not_english`` is set (useful for distribution statistics only).
    JSON Lines files are the canonical dump written by :func:`dump_jsonl` and
    keep their own ids, splits and provenance.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "tsv").lower()
    text = path.read_text(encoding="utf-8")
    mapping = dict(DEFAULT_LABEL_STRINGS if label_strings is None else label_strings)
    split = Split(split)
    prefix = f"{split.value.lower()}-" if id_prefix is None else id_prefix

    docs: list[LabeledDocument] = []
    errors: list[RecordError] = []
    dropped = 0
    for lineno, body, label_field in _iter_records(text, fmt):
        if body is None:
            errors.append(RecordError(lineno, label_field))
            continue
        if fmt == "jsonl":
            try:
                doc = LabeledDocument.from_dict(body)
            except (KeyError, ValueError, TypeError) as exc:
                errors.append(RecordError(lineno, f"bad document: {exc}"))
                continue
        else:
            label = mapping.get(label_field)
            if label is None:
                try:
                    label = Label(label_field)
                except ValueError:
                    errors.append(RecordError(lineno, f"unknown label {label_field!r}"))
                    continue
            doc = LabeledDocument.from_text(f"{prefix}{len(docs) + dropped}", body, label, split)
        if doc.label is Label.NOT_ENGLISH and not keep_not_english:
            dropped += 1
            continue
        docs.append(doc)

    for err in errors:
        log.warning("%s:%d: %s", path, err.line, err.message)
    log.info("ingested %d documents from %s (%d NotEnglish dropped, %d errors)",
             len(docs), path, dropped, len(errors))
    return IngestResult(docs, dropped, errors)


def dump_jsonl(docs: Iterable[LabeledDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


@dataclass
class CorpusStats:
    per_class_counts: dict[Label, int]
    per_class_vocab: dict[Label, set[str]]
    class_fractions: dict[Label, float]

    @property
    def overlap_vocab(self) -> set[str]:
        hope = self.per_class_vocab.get(Label.HOPE, set())
        non_hope = self.per_class_vocab.get(Label.NON_HOPE, set())
        return hope & non_hope

    @property
    def n_documents(self) -> int:
        return sum(self.per_class_counts.values())

    def to_dict(self) -> dict:
        return {
            "n_documents": self.n_documents,
            "per_class_counts": {k.value: v for k, v in self.per_class_counts.items()},
            "class_fractions": {k.value: v for k, v in self.class_fractions.items()},
            "vocab_sizes": {k.value: len(v) for k, v in self.per_class_vocab.items()},
            "overlap_vocab_size": len(self.overlap_vocab),
        }


def compute_stats(docs: Sequence[LabeledDocument]) -> CorpusStats:
    if not docs:
        raise ValueError("compute_stats needs at least one document")
    counts: Counter[Label] = Counter()
    vocab: dict[Label, set[str]] = {}
    for doc in docs:
        counts[doc.label] += 1
        vocab.setdefault(doc.label, set()).update(doc.tokens)
    total = sum(counts.values())
    order = [lab for lab in Label if lab in counts]
    return CorpusStats(
        per_class_counts={lab: counts[lab] for lab in order},
        per_class_vocab={lab: vocab[lab] for lab in order},
        class_fractions={lab: counts[lab] / total for lab in order},
    )


def split_by_label(docs: Iterable[LabeledDocument]) -> dict[Label, list[LabeledDocument]]:
    out: dict[Label, list[LabeledDocument]] = {}
    for doc in docs:
        out.setdefault(doc.label, []).append(doc)
    return out
