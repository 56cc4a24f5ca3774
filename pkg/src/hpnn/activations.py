"""Pointwise activations and the softmax/cross-entropy head.

Feature maps are plain float64 arrays shaped ``(S, H, W)`` (sub-layer, row,
column), optionally with a leading batch axis.
"""

from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import TargetOutOfRange

LOG_FLOOR = 1e-300


def as_real(x) -> np.ndarray:
    """Array view of ``x`` as float64, leaving extended-precision input as is."""
    x = np.asarray(x)
    return x if x.dtype == np.longdouble else x.astype(np.float64, copy=False)


class Activation(str, Enum):
    TANH = "tanh"
    LOGISTIC = "logistic"
    RELU = "relu"
    IDENTITY = "identity"

    @property
    def code(self) -> int:
        return _CODES.index(self)

    @classmethod
    def from_code(cls, code: int) -> "Activation":
        return _CODES[code]


_CODES = [Activation.TANH, Activation.LOGISTIC, Activation.RELU, Activation.IDENTITY]


def apply_activation(pre, kind: Activation) -> np.ndarray:
    pre = as_real(pre)
    kind = Activation(kind)
    if kind is Activation.TANH:
        return np.tanh(pre)
    if kind is Activation.LOGISTIC:
        return expit(pre)
    if kind is Activation.RELU:
        return np.maximum(pre, 0.0)
    return pre.copy()


def activation_derivative(pre, kind: Activation) -> np.ndarray:
    """f'(pre). The rectifier's derivative at exactly 0 is taken as 0."""
    pre = as_real(pre)
    kind = Activation(kind)
    if kind is Activation.TANH:
        t = np.tanh(pre)
        return 1.0 - t * t
    if kind is Activation.LOGISTIC:
        s = expit(pre)
        return s * (1.0 - s)
    if kind is Activation.RELU:
        return (pre > 0.0).astype(pre.dtype)
    return np.ones_like(pre)


def softmax(logits) -> np.ndarray:
    z = as_real(logits)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits, target):
    """Softmax cross-entropy.

    Works on a single logit vector ``(C,)`` with an int target, or on a batch
    ``(B, C)`` with an int array of targets.  Returns ``(loss, probs, grad)``
    where ``grad`` is dLoss/dLogits = probs - onehot(target).
    """
    logits = as_real(logits)
    n_classes = logits.shape[-1]
    if n_classes < 2:
        raise ValueError("need at least two classes")
    target = np.asarray(target)
    if np.any(target < 0) or np.any(target >= n_classes):
        raise TargetOutOfRange(f"target {target} outside [0, {n_classes})")
    probs = softmax(logits)
    if logits.ndim == 1:
        t = int(target)
        loss = -np.log(max(probs[t], LOG_FLOOR))
        grad = probs.copy()
        grad[t] -= 1.0
        return loss if loss.dtype == np.longdouble else float(loss), probs, grad
    rows = np.arange(logits.shape[0])
    picked = np.maximum(probs[rows, target], LOG_FLOOR)
    grad = probs.copy()
    grad[rows, target] -= 1.0
    return -np.log(picked), probs, grad
