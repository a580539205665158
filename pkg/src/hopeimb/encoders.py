"""Document encoders with explicit forward/backward passes in numpy.

An encoder maps a batch of token-id arrays to a ``(batch, dim)`` matrix of
pooled document vectors. Parameters live in ``encoder.params`` (name ->
array); ``backward`` accumulates into a dict of same-shaped gradient arrays.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

UNK = "<unk>"


class Vocabulary:
    """Token -> index map; index 0 is reserved for unknown tokens."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [UNK]
        self.stoi: dict[str, int] = {UNK: 0}
        for tok in tokens:
            if tok not in self.stoi:
                self.stoi[tok] = len(self.itos)
                self.itos.append(tok)

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]]) -> "Vocabulary":
        return cls(sorted({t for doc in token_lists for t in doc if t != UNK}))

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, tok: str) -> bool:
        return tok in self.stoi

    def encode(self, tokens: Sequence[str], max_len: int | None = None) -> np.ndarray:
        if max_len is not None:
            tokens = tokens[:max_len]
        ids = [self.stoi.get(t, 0) for t in tokens]
        return np.array(ids or [0], dtype=np.int64)


def _uniform(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


class BowEncoder:
    """Mean of learned token embeddings."""

    kind = "bow"

    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator | None = None,
                 init_scale: float = 0.05):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dim = dim
        self.params = {"embedding": _uniform(rng, (vocab_size, dim), init_scale)}

    def forward(self, batch: Sequence[np.ndarray]):
        lengths = np.array([len(ids) for ids in batch])
        flat = np.concatenate(batch)
        seg = np.repeat(np.arange(len(batch)), lengths)
        out = np.zeros((len(batch), self.dim))
        np.add.at(out, seg, self.params["embedding"][flat])
        out /= lengths[:, None]
        return out, (flat, seg, lengths)

    def backward(self, d_out: np.ndarray, cache, grads: dict[str, np.ndarray]) -> None:
        flat, seg, lengths = cache
        np.add.at(grads["embedding"], flat, (d_out / lengths[:, None])[seg])


class TinyAttentionEncoder:
    """Token plus position embeddings, one single-head self-attention layer, mean pooling.

    There is no residual connection or feed-forward block: with zero query and
    key projections and an identity value projection the output is exactly the
    mean of the input embeddings.
    """

    kind = "tiny_attention"

    def __init__(self, vocab_size: int, dim: int, max_len: int,
                 rng: np.random.Generator | None = None, init_scale: float = 0.05):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dim = dim
        self.max_len = max_len
        proj_scale = 1.0 / np.sqrt(dim)
        self.params = {
            "embedding": _uniform(rng, (vocab_size, dim), init_scale),
            "position": _uniform(rng, (max_len, dim), init_scale),
            "w_query": _uniform(rng, (dim, dim), proj_scale),
            "w_key": _uniform(rng, (dim, dim), proj_scale),
            "w_value": _uniform(rng, (dim, dim), proj_scale),
        }

    def _forward_one(self, ids: np.ndarray):
        p = self.params
        n = len(ids)
        if n > self.max_len:
            raise ValueError(f"sequence of length {n} exceeds max_len {self.max_len}")
        h0 = p["embedding"][ids] + p["position"][:n]
        q, k, v = h0 @ p["w_query"], h0 @ p["w_key"], h0 @ p["w_value"]
        scale = 1.0 / np.sqrt(self.dim)
        scores = (q @ k.T) * scale
        scores -= scores.max(axis=1, keepdims=True)
        att = np.exp(scores)
        att /= att.sum(axis=1, keepdims=True)
        out = att @ v
        return out.mean(axis=0), (ids, h0, q, k, v, att, scale)

    def forward(self, batch: Sequence[np.ndarray]):
        pooled, caches = zip(*(self._forward_one(ids) for ids in batch))
        return np.stack(pooled), caches

    def backward(self, d_out: np.ndarray, caches, grads: dict[str, np.ndarray]) -> None:
        p = self.params
        for dh, (ids, h0, q, k, v, att, scale) in zip(d_out, caches):
            n = len(ids)
            d_o = np.broadcast_to(dh / n, (n, self.dim))
            d_att = d_o @ v.T
            d_v = att.T @ d_o
            d_scores = att * (d_att - (d_att * att).sum(axis=1, keepdims=True)) * scale
            d_q = d_scores @ k
            d_k = d_scores.T @ q
            grads["w_query"] += h0.T @ d_q
            grads["w_key"] += h0.T @ d_k
            grads["w_value"] += h0.T @ d_v
            d_h0 = d_q @ p["w_query"].T + d_k @ p["w_key"].T + d_v @ p["w_value"].T
            np.add.at(grads["embedding"], ids, d_h0)
            grads["position"][:n] += d_h0


ENCODERS = {"bow": BowEncoder, "tiny_attention": TinyAttentionEncoder}


def make_encoder(kind: str, vocab_size: int, dim: int, max_len: int,
                 rng: np.random.Generator, init_scale: float = 0.05):
    if kind == "bow":
        return BowEncoder(vocab_size, dim, rng, init_scale)
    if kind == "tiny_attention":
        return TinyAttentionEncoder(vocab_size, dim, max_len, rng, init_scale)
    raise ValueError(f"unknown encoder kind {kind!r}; expected one of {sorted(ENCODERS)}")
