"""Trainable Hope/NonHope classifier: encoder, linear softmax head, CE or focal loss."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_label_indices, as_token_lists
from .corpus import Label, LabeledDocument, Split
from .encoders import Vocabulary, make_encoder
from .losses import LossConfig, LossKind, focal_from_margin

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "hopeimb-checkpoint/1"


@dataclass(frozen=True)
class TrainingConfig:
    """Optimizer settings. The defaults suit fine-tuning a large pretrained
    encoder; the small from-scratch encoders here need a far larger learning rate."""

    epochs: int = 10
    batch_size: int = 8
    learning_rate: float = 3.0e-5
    warmup_steps: int = 1000
    grad_clip: float = 1.0
    adam_epsilon: float = 1e-8
    max_sequence_length: int = 160

    def __post_init__(self):
        for name in ("epochs", "batch_size", "max_sequence_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("learning_rate", "grad_clip", "adam_epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")


class TextClassifier(ClassifierMixin, BaseEstimator):
    """Binary text classifier trained from scratch.

    ``X`` is a sequence of raw strings, token lists or
    :class:`~hopeimb.corpus.LabeledDocument`; ``y`` holds 0/1 targets (1 =
    Hope) or :class:`~hopeimb.corpus.Label` values. ``predict_proba`` columns
    are ordered ``[NonHope, Hope]``.

    Parameters
    ----------
    encoder : {"bow", "tiny_attention"}
    dim : int
        Embedding and pooled-vector dimension.
    loss : {"cross_entropy", "focal"}
    gamma : float
        Focusing parameter; only used when ``loss="focal"``.
    epochs, batch_size, learning_rate, warmup_steps, grad_clip, adam_epsilon,
    max_sequence_length :
        Adam with linear warmup and global-norm gradient clipping.
    init_scale : float
        Embeddings start uniform in ``[-init_scale, init_scale]``.
    random_state : int
        Seeds initialization and batch shuffling.
    """

    def __init__(self, encoder: str = "bow", dim: int = 32, loss: str = "cross_entropy",
                 gamma: float = 0.0, epochs: int = 10, batch_size: int = 8,
                 learning_rate: float = 3.0e-5, warmup_steps: int = 1000, grad_clip: float = 1.0,
                 adam_epsilon: float = 1e-8, max_sequence_length: int = 160,
                 init_scale: float = 0.05, random_state: int = 0):
        self.encoder = encoder
        self.dim = dim
        self.loss = loss
        self.gamma = gamma
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.warmup_steps = warmup_steps
        self.grad_clip = grad_clip
        self.adam_epsilon = adam_epsilon
        self.max_sequence_length = max_sequence_length
        self.init_scale = init_scale
        self.random_state = random_state

    # -- configuration views -------------------------------------------------

    @property
    def loss_config(self) -> LossConfig:
        kind = {"cross_entropy": LossKind.CROSS_ENTROPY, "focal": LossKind.FOCAL}.get(self.loss, self.loss)
        return LossConfig(LossKind(kind), self.gamma)

    @property
    def training_config(self) -> TrainingConfig:
        return TrainingConfig(self.epochs, self.batch_size, self.learning_rate, self.warmup_steps,
                              self.grad_clip, self.adam_epsilon, self.max_sequence_length)

    @classmethod
    def from_configs(cls, encoder: str, loss: LossConfig, cfg: TrainingConfig,
                     random_state: int = 0, **kwargs) -> "TextClassifier":
        name = "focal" if loss.kind is LossKind.FOCAL else "cross_entropy"
        return cls(encoder=encoder, loss=name, gamma=loss.gamma, random_state=random_state,
                   **asdict(cfg), **kwargs)

    # -- parameters ----------------------------------------------------------

    def named_parameters(self) -> dict[str, np.ndarray]:
        check_is_fitted(self, "head_weight_")
        params = {f"encoder.{k}": v for k, v in self.encoder_.params.items()}
        params["head.weight"] = self.head_weight_
        params["head.bias"] = self.head_bias_
        return params

    def get_flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.named_parameters().values()])

    def set_flat_params(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.named_parameters().values():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != len(flat):
            raise ValueError(f"expected {offset} parameters, got {len(flat)}")

    # -- forward / backward --------------------------------------------------

    def _ids(self, token_lists: Sequence[Sequence[str]]) -> list[np.ndarray]:
        return [self.vocabulary_.encode(t, self.max_sequence_length) for t in token_lists]

    def _logits(self, batch: list[np.ndarray]):
        pooled, cache = self.encoder_.forward(batch)
        if pooled.shape[1] != self.head_weight_.shape[0]:
            raise RuntimeError("encoder output does not match head dimension")
        return pooled @ self.head_weight_ + self.head_bias_, pooled, cache

    def loss_and_grads(self, batch: list[np.ndarray], targets: np.ndarray
                       ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean loss over the batch and its gradient for every named parameter."""
        logits, pooled, cache = self._logits(batch)
        rows = np.arange(len(batch))
        margin = logits[rows, targets] - logits[rows, 1 - targets]
        losses, d_margin = focal_from_margin(margin, self.loss_config.effective_gamma)
        n = len(batch)
        d_logits = np.zeros_like(logits)
        d_logits[rows, targets] = d_margin / n
        d_logits[rows, 1 - targets] = -d_margin / n

        grads = {name: np.zeros_like(p) for name, p in self.named_parameters().items()}
        grads["head.weight"] += pooled.T @ d_logits
        grads["head.bias"] += d_logits.sum(axis=0)
        enc_grads = {k: grads[f"encoder.{k}"] for k in self.encoder_.params}
        self.encoder_.backward(d_logits @ self.head_weight_.T, cache, enc_grads)
        return float(losses.mean()), grads

    def _mean_loss(self, ids: list[np.ndarray], targets: np.ndarray, chunk: int = 512) -> float:
        total = 0.0
        gamma = self.loss_config.effective_gamma
        for s in range(0, len(ids), chunk):
            logits, _, _ = self._logits(ids[s:s + chunk])
            t = targets[s:s + chunk]
            rows = np.arange(len(t))
            losses, _ = focal_from_margin(logits[rows, t] - logits[rows, 1 - t], gamma)
            total += float(losses.sum())
        return total / len(ids)

    # -- estimator API -------------------------------------------------------

    def _init_state(self, token_lists, rng: np.random.Generator) -> None:
        self.vocabulary_ = Vocabulary.build(token_lists)
        self.encoder_ = make_encoder(self.encoder, len(self.vocabulary_), self.dim,
                                     self.max_sequence_length, rng, self.init_scale)
        self.head_weight_ = rng.uniform(-self.init_scale, self.init_scale, size=(self.dim, 2))
        self.head_bias_ = np.zeros(2)

    def fit(self, X, y):
        cfg = self.training_config
        loss_cfg = self.loss_config
        tokens = as_token_lists(X)
        targets = as_label_indices(y, n=len(tokens))
        if len(tokens) == 0:
            raise ValueError("cannot fit on an empty dataset")
        if len(np.unique(targets)) < 2:
            raise ValueError("training data must contain both Hope and NonHope documents")
        log.info("training %s encoder, loss=%s gamma=%s on %d documents",
                 self.encoder, loss_cfg.kind.value, loss_cfg.gamma, len(tokens))

        rng = np.random.default_rng(self.random_state)
        self._init_state(tokens, rng)
        self.classes_ = np.array([0, 1])
        ids = self._ids(tokens)
        params = self.named_parameters()
        m = {k: np.zeros_like(v) for k, v in params.items()}
        v2 = {k: np.zeros_like(v) for k, v in params.items()}
        beta1, beta2 = 0.9, 0.999
        step = 0
        self.loss_trace_ = []
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(ids))
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                loss, grads = self.loss_and_grads([ids[i] for i in idx], targets[idx])
                if not np.isfinite(loss):
                    raise FloatingPointError(
                        f"non-finite loss {loss} at epoch {epoch + 1}, step {step + 1}")
                norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
                clip = min(1.0, cfg.grad_clip / norm) if norm > 0 else 1.0
                step += 1
                lr = cfg.learning_rate * (min(1.0, step / cfg.warmup_steps) if cfg.warmup_steps else 1.0)
                c1 = 1.0 - beta1 ** step
                c2 = 1.0 - beta2 ** step
                for k, p in params.items():
                    g = grads[k] * clip
                    m[k] = beta1 * m[k] + (1 - beta1) * g
                    v2[k] = beta2 * v2[k] + (1 - beta2) * g * g
                    p -= lr * (m[k] / c1) / (np.sqrt(v2[k] / c2) + cfg.adam_epsilon)
            epoch_loss = self._mean_loss(ids, targets)
            if not np.isfinite(epoch_loss):
                raise FloatingPointError(f"non-finite loss after epoch {epoch + 1}")
            self.loss_trace_.append(epoch_loss)
            log.debug("epoch %d: mean loss %.6f", epoch + 1, epoch_loss)
        self.n_steps_ = step
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "head_weight_")
        ids = self._ids(as_token_lists(X))
        out = []
        for s in range(0, len(ids), 512):
            logits, _, _ = self._logits(ids[s:s + 512])
            logits = logits - logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            out.append(e / e.sum(axis=1, keepdims=True))
        return np.concatenate(out) if out else np.zeros((0, 2))

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def predict_labels(self, X) -> list[Label]:
        return [Label.from_index(i) for i in self.predict(X)]

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "head_weight_")
        payload = {
            "format": CHECKPOINT_FORMAT,
            "encoder_kind": self.encoder,
            "hyperparameters": self.get_params(),
            "loss": self.loss_config.to_dict(),
            "seed": self.random_state,
            "vocabulary": self.vocabulary_.itos,
            "arrays": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in self.named_parameters().items()},
            "loss_trace": list(self.loss_trace_),
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TextClassifier":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format {payload.get('format')!r}")
        model = cls(**payload["hyperparameters"])
        model.vocabulary_ = Vocabulary(payload["vocabulary"][1:])
        model.encoder_ = make_encoder(model.encoder, len(model.vocabulary_), model.dim,
                                      model.max_sequence_length, np.random.default_rng(0))
        model.head_weight_ = np.zeros((model.dim, 2))
        model.head_bias_ = np.zeros(2)
        model.classes_ = np.array([0, 1])
        model.loss_trace_ = payload.get("loss_trace", [])
        arrays = payload["arrays"]
        for name, p in model.named_parameters().items():
            a = arrays[name]
            p[...] = np.array(a["data"], dtype=np.float64).reshape(a["shape"])
        return model


def train(docs: Sequence[LabeledDocument], encoder_kind: str = "bow",
          loss: LossConfig | None = None, cfg: TrainingConfig | None = None,
          seed: int = 0, **kwargs) -> TextClassifier:
    """Fit a :class:`TextClassifier` on Train-split documents."""
    if any(d.split is not Split.TRAIN for d in docs):
        raise ValueError("train() only accepts Train-split documents")
    model = TextClassifier.from_configs(encoder_kind, loss or LossConfig(), cfg or TrainingConfig(),
                                        random_state=seed, **kwargs)
    return model.fit(list(docs), [d.label for d in docs])


def predict(model: TextClassifier, doc: LabeledDocument) -> np.ndarray:
    """Probability vector ``[P(NonHope), P(Hope)]`` for one document."""
    return model.predict_proba([doc])[0]
