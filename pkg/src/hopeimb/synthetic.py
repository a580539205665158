"""Seeded synthetic corpora for tests, demos and the acceptance suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import Label, LabeledDocument, Split

LABEL_STRINGS = {Label.HOPE: "Hope_speech", Label.NON_HOPE: "Non_hope_speech"}


def separable_corpus(n_docs: int = 200, vocab_per_class: int = 10, doc_len: int = 5,
                     seed: int = 0, split: Split = Split.TRAIN) -> list[LabeledDocument]:
    """Balanced corpus whose two classes use disjoint vocabularies."""
    rng = np.random.default_rng(seed)
    vocab = {Label.HOPE: [f"hope{i}" for i in range(vocab_per_class)],
             Label.NON_HOPE: [f"other{i}" for i in range(vocab_per_class)]}
    docs = []
    for i in range(n_docs):
        label = Label.HOPE if i % 2 else Label.NON_HOPE
        words = rng.choice(vocab[label], size=doc_len)
        docs.append(LabeledDocument.from_tokens(f"{split.value.lower()}-{i}", words, label, split))
    return docs


def imbalanced_corpus(n_docs: int = 1000, minority_fraction: float = 0.05, seed: int = 0,
                      split: Split = Split.TRAIN, n_signal: int = 15, n_noise: int = 150,
                      signal_per_doc: int = 1, noise_per_doc: tuple[int, int] = (6, 12),
                      leak: float = 0.0) -> list[LabeledDocument]:
    """Skewed corpus: each document has a few class-specific words buried in shared noise.

    Noise words are drawn from one vocabulary for both classes, so they occur
    across the class boundary. With ``leak > 0`` a signal word is, with that
    probability, taken from the other class's signal vocabulary.
    """
    rng = np.random.default_rng(seed)
    signal = {Label.HOPE: [f"hope{i}" for i in range(n_signal)],
              Label.NON_HOPE: [f"other{i}" for i in range(n_signal)]}
    noise = [f"noise{i}" for i in range(n_noise)]
    n_hope = max(1, int(round(n_docs * minority_fraction)))
    labels = [Label.HOPE] * n_hope + [Label.NON_HOPE] * (n_docs - n_hope)
    labels = [labels[i] for i in rng.permutation(n_docs)]
    docs = []
    for i, label in enumerate(labels):
        other = Label.NON_HOPE if label is Label.HOPE else Label.HOPE
        words = []
        for _ in range(signal_per_doc):
            src = signal[other] if rng.random() < leak else signal[label]
            words.append(src[rng.integers(len(src))])
        k = int(rng.integers(noise_per_doc[0], noise_per_doc[1] + 1))
        words.extend(noise[j] for j in rng.integers(len(noise), size=k))
        words = [words[j] for j in rng.permutation(len(words))]
        docs.append(LabeledDocument.from_tokens(f"{split.value.lower()}-{i}", words, label, split))
    return docs


def write_tsv(docs: list[LabeledDocument], path: str | Path) -> Path:
    """Write documents as ``text<TAB>label`` using the default file label strings."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(f"{d.raw_text}\t{LABEL_STRINGS[d.label]}\n")
    return path
