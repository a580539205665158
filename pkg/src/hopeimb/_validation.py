"""Input coercion shared by the estimators."""

from __future__ import annotations

import numpy as np

from .corpus import Label, LabeledDocument, tokenize


def as_token_lists(X) -> list[list[str]]:
    """Accept raw strings, token sequences or LabeledDocuments; return token lists."""
    if isinstance(X, (str, bytes)):
        raise TypeError("expected a collection of documents, got a single string")
    out = []
    for i, doc in enumerate(X):
        if isinstance(doc, LabeledDocument):
            out.append(list(doc.tokens))
        elif isinstance(doc, str):
            out.append(tokenize(doc))
        elif isinstance(doc, (list, tuple, np.ndarray)):
            if not all(isinstance(t, str) for t in doc):
                raise TypeError(f"document {i}: token sequences must contain strings")
            out.append(list(doc))
        else:
            raise TypeError(f"document {i}: unsupported type {type(doc).__name__}")
    return out


def _label_index(v) -> int:
    if isinstance(v, Label):
        return v.index
    if isinstance(v, str):
        return Label(v).index
    if isinstance(v, (bool, np.bool_)) or (np.issubdtype(type(v), np.integer) and v in (0, 1)):
        return int(v)
    if isinstance(v, (float, np.floating)) and v in (0.0, 1.0):
        return int(v)
    raise ValueError(f"unsupported label {v!r}; expected Hope/NonHope or 0/1")


def as_label_indices(y, n: int | None = None) -> np.ndarray:
    """Binary targets with 1 = Hope, 0 = NonHope."""
    if isinstance(y, LabeledDocument):
        raise TypeError("y must be a collection of labels")
    vals = np.array([_label_index(v) for v in y], dtype=np.int64)
    if n is not None and len(vals) != n:
        raise ValueError(f"X has {n} documents but y has {len(vals)} labels")
    return vals
