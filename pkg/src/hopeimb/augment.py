"""Minority-class data augmentation.

Two generators are provided: contextual word substitution driven by a masked
language model, and back-translation through an intermediate language. Both
are written against small protocols so real models can be dropped in; an
offline count-based masked LM is included for desk-scale runs.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .corpus import Label, LabeledDocument, Provenance, Split, tokenize
from .translate import Translator

log = logging.getLogger(__name__)

MASK = "[MASK]"
# used, in order, when a back-translation pipeline names no intermediate language
DEFAULT_INTERMEDIATES = ("fr", "es")


class MaskedLM(Protocol):
    def predict(self, tokens: Sequence[str], masked_index: int, k: int) -> list[str]: ...


class AugmentationError(RuntimeError):
    def __init__(self, message: str, *, position: int | None = None, leg: str | None = None):
        super().__init__(message)
        self.position = position
        self.leg = leg


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Pipeline:
    """One augmentation pass: ``contextual`` (uses ``model``) or ``back_translate``."""

    kind: str
    model: str = "count"
    intermediate: str | None = None
    source: str = "en"

    def __post_init__(self):
        if self.kind not in ("contextual", "back_translate"):
            raise ConfigError(f"unknown pipeline kind {self.kind!r}")
        if self.kind == "back_translate" and not self.intermediate:
            raise ConfigError("back_translate pipeline needs an intermediate language")

    @property
    def name(self) -> str:
        if self.kind == "contextual":
            return f"contextual:{self.model}"
        return f"back_translate:{self.model}:{self.intermediate}"

    @classmethod
    def contextual(cls, lm_id: str = "count") -> "Pipeline":
        return cls("contextual", lm_id)

    @classmethod
    def back_translate(cls, translator_id: str, intermediate: str, source: str = "en") -> "Pipeline":
        return cls("back_translate", translator_id, intermediate, source)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "model": self.model}
        if self.kind == "back_translate":
            d.update(intermediate=self.intermediate, source=self.source)
        return d


@dataclass(frozen=True)
class AugmentationPlan:
    k_candidates: int = 5
    a_min: int = 3
    a_max: int = 10
    pipelines: tuple[Pipeline, ...] = ()
    seed: int = 0
    sample_top_k: bool = False

    def __post_init__(self):
        pipelines = []
        for p in self.pipelines:
            if isinstance(p, Pipeline):
                pipelines.append(p)
            elif p.get("kind") == "back_translate" and not p.get("intermediate"):
                pipelines.extend(Pipeline(**{**p, "intermediate": lang}) for lang in DEFAULT_INTERMEDIATES)
            else:
                pipelines.append(Pipeline(**p))
        object.__setattr__(self, "pipelines", tuple(pipelines))
        if self.k_candidates < 1:
            raise ConfigError("k_candidates must be >= 1")
        if self.a_min < 0 or self.a_max < 0:
            raise ConfigError("a_min and a_max must be non-negative")
        if self.a_min > self.a_max:
            raise ConfigError(f"a_min ({self.a_min}) exceeds a_max ({self.a_max})")

    def to_dict(self) -> dict:
        return {"k_candidates": self.k_candidates, "a_min": self.a_min, "a_max": self.a_max,
                "pipelines": [p.to_dict() for p in self.pipelines], "seed": self.seed,
                "sample_top_k": self.sample_top_k}


class CountMaskedLM:
    """Masked-word predictor from positional co-occurrence counts.

    For every token and every offset ``o`` in ``[-window, window] \\ {0}`` the
    table records which words appeared ``o`` positions away. A prediction sums
    the tables of the context words around the mask and ranks words by count,
    ties broken alphabetically. Without any known context it falls back to
    global unigram counts.
    """

    def __init__(self, window: int = 2):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.table: dict[tuple[int, str], Counter] = {}
        self.unigrams: Counter = Counter()

    def fit(self, token_lists: Sequence[Sequence[str]]) -> "CountMaskedLM":
        for tokens in token_lists:
            self.unigrams.update(tokens)
            n = len(tokens)
            for i, word in enumerate(tokens):
                for o in range(-self.window, self.window + 1):
                    j = i + o
                    if o == 0 or j < 0 or j >= n:
                        continue
                    # word at i has tokens[j] sitting o positions away
                    self.table.setdefault((o, tokens[j]), Counter())[word] += 1
        return self

    @staticmethod
    def _top(counts: Counter, k: int) -> list[str]:
        ranked = sorted((w for w in counts if w != MASK), key=lambda w: (-counts[w], w))
        return ranked[:k]

    def predict(self, tokens: Sequence[str], masked_index: int, k: int) -> list[str]:
        if k < 1:
            raise ValueError("k must be >= 1")
        scores: Counter = Counter()
        n = len(tokens)
        for o in range(-self.window, self.window + 1):
            j = masked_index + o
            if o == 0 or j < 0 or j >= n or tokens[j] == MASK:
                continue
            hit = self.table.get((o, tokens[j]))
            if hit:
                scores.update(hit)
        return self._top(scores if scores else self.unigrams, k)


def train_count_mlm(docs: Sequence[LabeledDocument], window: int = 2) -> CountMaskedLM:
    if not docs:
        raise ValueError("train_count_mlm needs at least one document")
    return CountMaskedLM(window).fit([d.tokens for d in docs])


def contextual_augment(doc: LabeledDocument, lm: MaskedLM, plan: AugmentationPlan, *,
                       rng: np.random.Generator | None = None,
                       new_id: str | None = None) -> LabeledDocument:
    """Left-to-right masked substitution of at most ``plan.a_max`` words.

    At each position the word is masked and the model asked for
    ``plan.k_candidates`` fillers. The best candidate that differs from the
    current word replaces it; with ``plan.sample_top_k`` a differing candidate
    is drawn uniformly instead. Documents with fewer than ``plan.a_min``
    replacements are returned with ``under_augmented`` set.
    """
    if not doc.tokens:
        raise AugmentationError("document has no tokens")
    tokens = list(doc.tokens)
    replaced = 0
    for i, original in enumerate(doc.tokens):
        if replaced >= plan.a_max:
            break
        masked = tokens[:i] + [MASK] + tokens[i + 1:]
        try:
            candidates = lm.predict(masked, i, plan.k_candidates)
        except Exception as exc:
            raise AugmentationError(f"language model failed at position {i}: {exc}",
                                    position=i) from exc
        usable = []
        for c in candidates[:plan.k_candidates]:
            # candidates must survive re-tokenization as exactly one token
            norm = tokenize(c) if c != MASK else []
            if len(norm) == 1 and norm[0] != original and norm[0] not in usable:
                usable.append(norm[0])
        if not usable:
            continue
        if plan.sample_top_k:
            if rng is None:
                rng = np.random.default_rng(plan.seed)
            choice = usable[int(rng.integers(len(usable)))]
        else:
            choice = usable[0]
        tokens[i] = choice
        replaced += 1
    return doc.with_tokens(tokens, id=new_id or f"{doc.id}~ctx",
                           provenance=Provenance.CONTEXTUAL,
                           under_augmented=replaced < plan.a_min)


def back_translate_augment(doc: LabeledDocument, translator: Translator, intermediate: str,
                           source: str = "en", *, new_id: str | None = None) -> LabeledDocument:
    """Translate ``raw_text`` to ``intermediate`` and back, then re-tokenize."""
    if not doc.raw_text:
        raise AugmentationError("document has no text")
    try:
        mid = translator.translate(doc.raw_text, source, intermediate)
    except Exception as exc:
        raise AugmentationError(f"forward translation failed: {exc}", leg="forward") from exc
    try:
        back = translator.translate(mid, intermediate, source)
    except Exception as exc:
        raise AugmentationError(f"backward translation failed: {exc}", leg="backward") from exc
    if not tokenize(back):
        raise AugmentationError("round trip produced no tokens", leg="backward")
    return LabeledDocument.from_text(new_id or f"{doc.id}~bt-{intermediate}", back,
                                     doc.label, doc.split, Provenance.BACK_TRANSLATION)


@dataclass
class PipelineCounts:
    attempted: int = 0
    produced: int = 0
    skipped: int = 0
    under_augmented: int = 0

    def to_dict(self) -> dict:
        return {"attempted": self.attempted, "produced": self.produced,
                "skipped": self.skipped, "under_augmented": self.under_augmented}


@dataclass
class AugmentResult:
    documents: list[LabeledDocument]
    counts: dict[str, PipelineCounts] = field(default_factory=dict)

    def report(self) -> dict:
        return {name: c.to_dict() for name, c in self.counts.items()}

    def write_report(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.report(), indent=2, sort_keys=True) + "\n")


def augment_dataset(docs: Sequence[LabeledDocument], target_class: Label, plan: AugmentationPlan,
                    lm_registry: Mapping[str, MaskedLM] | None = None,
                    translator_registry: Mapping[str, Translator] | None = None,
                    *, n_workers: int = 1) -> AugmentResult:
    """Run every pipeline once over the Train documents of ``target_class``.

    Returns the input documents followed by the generated ones, ordered by
    (source document position, pipeline index). Failures are logged and
    counted as skips.
    """
    lm_registry = lm_registry or {}
    translator_registry = translator_registry or {}
    for p in plan.pipelines:
        registry = lm_registry if p.kind == "contextual" else translator_registry
        if p.model not in registry:
            raise ConfigError(f"pipeline {p.name}: no model registered as {p.model!r}")

    target_class = Label(target_class)
    sources = [d for d in docs if d.label is target_class and d.split is Split.TRAIN]
    names = [f"{j}:{p.name}" for j, p in enumerate(plan.pipelines)]
    counts = {name: PipelineCounts() for name in names}

    def run_one(task):
        doc_idx, p_idx = task
        doc, p = sources[doc_idx], plan.pipelines[p_idx]
        new_id = f"{doc.id}~aug{p_idx}"
        try:
            if p.kind == "contextual":
                rng = np.random.default_rng([plan.seed, p_idx, doc_idx]) if plan.sample_top_k else None
                return contextual_augment(doc, lm_registry[p.model], plan, rng=rng, new_id=new_id)
            return back_translate_augment(doc, translator_registry[p.model], p.intermediate,
                                          p.source, new_id=new_id)
        except AugmentationError as exc:
            where = f"position {exc.position}" if exc.position is not None else f"leg {exc.leg}"
            log.warning("skipping %s in %s (%s): %s", doc.id, p.name, where, exc)
            return None

    tasks = [(i, j) for i in range(len(sources)) for j in range(len(plan.pipelines))]
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_one, tasks))
    else:
        results = [run_one(t) for t in tasks]

    produced = []
    for (_, p_idx), out in zip(tasks, results):
        c = counts[names[p_idx]]
        c.attempted += 1
        if out is None:
            c.skipped += 1
            continue
        c.produced += 1
        c.under_augmented += int(out.under_augmented)
        produced.append(out)
    return AugmentResult(list(docs) + produced, counts)
