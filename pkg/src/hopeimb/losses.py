"""Cross-entropy and focal loss for the binary Hope/NonHope problem.

The scalar functions take ``p``, the predicted probability of Hope. The
``*_from_margin`` variants take the logit margin of the true class over the
other class and are what the trainer differentiates; they avoid forming
``log(p)`` from a rounded probability.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .corpus import Label

EPS = 1e-12


class LossKind(str, enum.Enum):
    CROSS_ENTROPY = "CrossEntropy"
    FOCAL = "Focal"


@dataclass(frozen=True)
class LossConfig:
    kind: LossKind = LossKind.CROSS_ENTROPY
    gamma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if not (self.gamma >= 0) or math.isinf(self.gamma):
            raise ValueError(f"gamma must be a finite non-negative number, got {self.gamma!r}")

    @property
    def effective_gamma(self) -> float:
        return float(self.gamma) if self.kind is LossKind.FOCAL else 0.0

    @classmethod
    def focal(cls, gamma: float) -> "LossConfig":
        return cls(LossKind.FOCAL, gamma)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "gamma": float(self.gamma)}


def _is_hope(y) -> bool:
    if isinstance(y, Label):
        return y is Label.HOPE
    if isinstance(y, str):
        return Label(y) is Label.HOPE
    return int(y) == 1


def p_true(p: float, y) -> float:
    """Probability assigned to the true class, after range check and clamping."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    pt = p if _is_hope(y) else 1.0 - p
    return min(max(pt, EPS), 1.0 - EPS)


def cross_entropy(p: float, y) -> float:
    return -math.log(p_true(p, y))


def focal_loss(p: float, y, gamma: float) -> float:
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma!r}")
    pt = p_true(p, y)
    return -((1.0 - pt) ** gamma) * math.log(pt)


def focal_loss_grad(p: float, y, gamma: float) -> float:
    """Derivative of :func:`focal_loss` with respect to ``p`` (probability of Hope)."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma!r}")
    pt = p_true(p, y)
    q = 1.0 - pt
    d_pt = -(q ** gamma) / pt
    if gamma != 0:
        d_pt += gamma * q ** (gamma - 1.0) * math.log(pt)
    return d_pt if _is_hope(y) else -d_pt


def focal_from_margin(margin: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-example focal loss and its derivative w.r.t. the true-class logit margin.

    With ``pt = sigmoid(margin)``, ``d loss / d margin`` equals
    ``gamma * (1-pt)**gamma * pt * log(pt) - (1-pt)**(gamma+1)``.
    ``gamma == 0`` gives plain cross-entropy.
    """
    margin = np.asarray(margin, dtype=np.float64)
    log_pt = -np.logaddexp(0.0, -margin)
    pt = np.exp(log_pt)
    q = 1.0 / (1.0 + np.exp(margin))  # 1 - pt without cancellation
    if gamma == 0:
        return -log_pt, -q
    mod = q ** gamma
    loss = -mod * log_pt
    grad = gamma * mod * pt * log_pt - mod * q
    return loss, grad
