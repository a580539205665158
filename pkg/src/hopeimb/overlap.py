"""Overlapping word removal.

Words of one class are scored by how often they occur among the tokens of the
other class. A word whose cross-class count reaches ``tau`` is removed from
every document of both classes.
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import Label, LabeledDocument
from ._validation import as_token_lists, as_label_indices

TAU_DEFAULT = 25
TAU_PRESETS = {"default": 25, "strict": 50}


class Direction(str, enum.Enum):
    SYMMETRIC = "symmetric"
    C1_ONLY = "c1_only"
    C2_ONLY = "c2_only"


@dataclass(frozen=True)
class FilterConfig:
    tau: int = TAU_DEFAULT
    direction: Direction = Direction.SYMMETRIC

    def __post_init__(self):
        if isinstance(self.tau, bool) or int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be an integer >= 1, got {self.tau!r}")
        object.__setattr__(self, "direction", Direction(self.direction))

    @classmethod
    def preset(cls, name: str) -> "FilterConfig":
        return cls(tau=TAU_PRESETS[name])


@dataclass
class OverlapMatrix:
    """Sparse form of the inter-class word/token occurrence matrix.

    The dense matrix has one row per unique class-1 word (``L`` rows) and one
    column per class-2 token occurrence (``Q`` columns); an entry is
    ``normalizer`` where the row word equals the column token and 0 otherwise.
    Only row counts are stored: ``token_count_c2[w]`` is the number of class-2
    tokens equal to ``w``. The ``*_c1`` fields hold the mirrored matrix.
    """

    vocab_c1: list[str]
    vocab_c2: list[str]
    token_count_c2: dict[str, int]
    token_count_c1: dict[str, int]
    L: int
    Q: int
    L2: int
    Q2: int

    @property
    def normalizer(self) -> float:
        return 1.0 / (self.L * self.Q)

    @property
    def normalizer_c2(self) -> float:
        return 1.0 / (self.L2 * self.Q2)

    def entry(self, word: str, token: str) -> float:
        """Dense entry for class-1 word ``word`` against one class-2 token occurrence."""
        return self.normalizer if word == token else 0.0

    def row_sum(self, word: str) -> float:
        return self.token_count_c2.get(word, 0) * self.normalizer


def _unique_in_order(docs: Iterable[Sequence[str]]) -> list[str]:
    seen: dict[str, None] = {}
    for tokens in docs:
        for tok in tokens:
            seen.setdefault(tok, None)
    return list(seen)


def _cross_counts(vocab: list[str], counts: Counter) -> dict[str, int]:
    return {w: counts[w] for w in vocab if counts[w] > 0}


def build_overlap_from_tokens(tokens_c1: Sequence[Sequence[str]],
                              tokens_c2: Sequence[Sequence[str]]) -> OverlapMatrix:
    if not tokens_c1 or not tokens_c2:
        raise ValueError("both classes need at least one document")
    vocab_c1 = _unique_in_order(tokens_c1)
    vocab_c2 = _unique_in_order(tokens_c2)
    counts_c1 = Counter(tok for doc in tokens_c1 for tok in doc)
    counts_c2 = Counter(tok for doc in tokens_c2 for tok in doc)
    q1, q2 = sum(counts_c1.values()), sum(counts_c2.values())
    if not vocab_c1 or not vocab_c2:
        raise ValueError("both classes need at least one token")
    return OverlapMatrix(
        vocab_c1=vocab_c1,
        vocab_c2=vocab_c2,
        token_count_c2=_cross_counts(vocab_c1, counts_c2),
        token_count_c1=_cross_counts(vocab_c2, counts_c1),
        L=len(vocab_c1), Q=q2, L2=len(vocab_c2), Q2=q1,
    )


def build_overlap(docs_c1: Sequence[LabeledDocument],
                  docs_c2: Sequence[LabeledDocument]) -> OverlapMatrix:
    return build_overlap_from_tokens([d.tokens for d in docs_c1], [d.tokens for d in docs_c2])


def select_removals(matrix: OverlapMatrix, cfg: FilterConfig) -> set[str]:
    """Words whose occurrence count in the opposite class is at least ``cfg.tau``.

    Thresholding a row aggregate ``count * 1/(L*Q)`` against ``tau * 1/(L*Q)``
    is the same as comparing the raw count against ``tau``.
    """
    out: set[str] = set()
    if cfg.direction in (Direction.SYMMETRIC, Direction.C1_ONLY):
        out.update(w for w, c in matrix.token_count_c2.items() if c >= cfg.tau)
    if cfg.direction in (Direction.SYMMETRIC, Direction.C2_ONLY):
        out.update(w for w, c in matrix.token_count_c1.items() if c >= cfg.tau)
    return out


class Removed(NamedTuple):
    documents: list[LabeledDocument]
    n_dropped: int


def apply_removal(docs: Iterable[LabeledDocument], removals: set[str]) -> Removed:
    """Delete every occurrence of the removal words; drop documents left empty."""
    kept: list[LabeledDocument] = []
    dropped = 0
    for doc in docs:
        if not removals:
            kept.append(doc)
            continue
        tokens = [t for t in doc.tokens if t not in removals]
        if not tokens:
            dropped += 1
            continue
        kept.append(doc if len(tokens) == len(doc.tokens) else doc.with_tokens(tokens))
    return Removed(kept, dropped)


def fit_removals(train_docs: Sequence[LabeledDocument], cfg: FilterConfig,
                 c1: Label = Label.HOPE, c2: Label = Label.NON_HOPE
                 ) -> tuple[set[str], OverlapMatrix]:
    matrix = build_overlap([d for d in train_docs if d.label is c1],
                           [d for d in train_docs if d.label is c2])
    return select_removals(matrix, cfg), matrix


def write_removals(path: str | Path, removals: set[str], matrix: OverlapMatrix,
                   cfg: FilterConfig) -> None:
    payload = {
        "removed": sorted(removals),
        "tau": cfg.tau,
        "L": matrix.L,
        "Q": matrix.Q,
        "direction": cfg.direction.value,
    }
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_removals(path: str | Path) -> set[str]:
    return set(json.loads(Path(path).read_text(encoding="utf-8"))["removed"])


class OverlapWordRemover(TransformerMixin, BaseEstimator):
    """Estimator wrapper: learn the removal set on labelled text, strip it from any text.

    ``fit`` takes raw strings or token lists plus binary targets (1 = Hope);
    ``transform`` returns token lists with removal words deleted. Documents
    that end up empty are returned as empty lists so row alignment is kept;
    use :func:`apply_removal` on documents when they should be dropped.

    Parameters
    ----------
    tau : int, default=25
        Minimum cross-class occurrence count for a word to be removed.
    direction : {"symmetric", "c1_only", "c2_only"}, default="symmetric"
        ``c1_only`` scores Hope words against NonHope tokens only.
    """

    def __init__(self, tau: int = TAU_DEFAULT, direction: str = "symmetric"):
        self.tau = tau
        self.direction = direction

    def fit(self, X, y):
        cfg = FilterConfig(self.tau, Direction(self.direction))
        tokens = as_token_lists(X)
        targets = as_label_indices(y, n=len(tokens))
        c1 = [t for t, lab in zip(tokens, targets) if lab == 1]
        c2 = [t for t, lab in zip(tokens, targets) if lab == 0]
        self.matrix_ = build_overlap_from_tokens(c1, c2)
        self.removals_ = select_removals(self.matrix_, cfg)
        return self

    def transform(self, X):
        check_is_fitted(self, "removals_")
        return [[t for t in doc if t not in self.removals_] for doc in as_token_lists(X)]
