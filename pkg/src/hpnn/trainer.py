"""Mini-batch SGD with momentum, early stopping, evaluation and gradient checking.

A dataset is a pair ``(images, labels)``: images ``(N, 1, H, W)`` float64 and
integer labels ``(N,)``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .activations import Activation
from .errors import EmptyDataset, LabelOutOfRange, ShapeMismatch, TooManyParameters
from .activations import softmax_xent
from .network import (
    Network,
    NetworkSpec,
    init_params,
    loss_and_gradients,
    network_backward,
    network_forward,
)
from .rng import SplitMix64

GRADCHECK_MAX_PARAMS = 50_000


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 16
    max_epochs: int = 300
    patience: int = 30
    seed: int = 0
    activation: Activation = Activation.TANH

    def __post_init__(self):
        self.activation = Activation(self.activation)
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "train_acc", "val_acc"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.train_acc), repr(r.val_acc)])


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted class
    recall: np.ndarray
    predictions: np.ndarray


def sgd_step(params, grads, velocity, lr: float, momentum: float) -> None:
    """Classical momentum, in place: v <- momentum*v - lr*g; theta <- theta + v."""
    if not len(params) == len(grads) == len(velocity):
        raise ShapeMismatch("parameter, gradient and velocity lists differ in length")
    for p, g, v in zip(params, grads, velocity):
        if not p.shape == g.shape == v.shape:
            raise ShapeMismatch(f"shapes differ: {p.shape}, {g.shape}, {v.shape}")
        v *= momentum
        v -= lr * g
        p += v


def _check_set(dataset, num_classes: int, name: str):
    images, labels = dataset
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise EmptyDataset(f"{name} set is empty")
    if len(images) != len(labels):
        raise ShapeMismatch(f"{name}: {len(images)} images but {len(labels)} labels")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise LabelOutOfRange(f"{name}: labels must lie in [0, {num_classes})")
    return images, labels


def predict(net: Network, images, batch_size: int = 256) -> np.ndarray:
    """Argmax class per image; ties go to the lowest index.

    The argmax is taken over the logits, which order classes exactly as the
    softmax probabilities do but without ties introduced by rounding.
    """
    images = np.asarray(images, dtype=np.float64)
    out = []
    for start in range(0, len(images), batch_size):
        logits = network_forward(net, images[start : start + batch_size]).logits
        out.append(np.argmax(logits, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate(net: Network, dataset) -> EvalReport:
    images, labels = _check_set(dataset, net.spec.num_classes, "evaluation")
    preds = predict(net, images)
    c = net.spec.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = np.where(totals > 0, np.diag(confusion) / np.maximum(totals, 1), np.nan)
    return EvalReport(float(np.trace(confusion) / len(labels)), confusion, recall, preds)


def train(spec: NetworkSpec, train_set, val_set, cfg: TrainConfig):
    """Train from a seeded initialisation; returns ``(best_network, history)``.

    Per-epoch train loss and accuracy are accumulated from the mini-batch
    forward passes, i.e. before each batch's update.  The returned network is
    the snapshot at the earliest epoch with the highest validation accuracy.
    """
    c = spec.num_classes
    x_train, y_train = _check_set(train_set, c, "training")
    x_val, y_val = _check_set(val_set, c, "validation")
    net = init_params(spec, cfg.seed)
    rng = SplitMix64(cfg.seed ^ 0x5DEECE66D)
    velocity = [np.zeros_like(t) for t in net.tensors()]
    history = TrainHistory()
    best_acc, best_net, since_best = -1.0, net.copy(), 0
    n = len(y_train)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            fwd = network_forward(net, x_train[idx])
            loss, grads = network_backward(net, fwd, y_train[idx])
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(fwd.logits, axis=1) == y_train[idx]))
            sgd_step(net.tensors(), grads, velocity, cfg.learning_rate, cfg.momentum)
        val_acc = float(np.mean(predict(net, x_val) == y_val))
        history.records.append(EpochRecord(epoch, loss_sum / n, correct / n, val_acc))
        if val_acc > best_acc:
            best_acc, best_net, since_best = val_acc, net.copy(), 0
            history.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return best_net, history


def _loss(net: Network, image, label):
    return softmax_xent(network_forward(net, image).logits, label)[0]


def _as_dtype(net: Network, dtype) -> Network:
    out = net.copy()
    for p in out.pyramidal + out.dense:
        p.weights, p.biases = p.weights.astype(dtype), p.biases.astype(dtype)
    return out


def gradient_check(
    net: Network, sample, h: float = 1e-5, analytic=None, extended: bool = True
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``sample`` is ``(image, label)``.  ``analytic`` overrides the backprop
    gradients (used to exercise the detector).  The relative error of one
    parameter is |a - n| / max(|a|, |n|, 1e-8).

    With ``extended`` the perturbed losses are evaluated in ``np.longdouble``:
    in float64 the rounding noise of E(theta +- h) divided by 2h is ~1e-11,
    which alone exceeds a 1e-6 relative tolerance for gradients below ~1e-5.
    The analytic gradients are always the float64 backprop result.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    if net.num_params > GRADCHECK_MAX_PARAMS:
        raise TooManyParameters(f"{net.num_params} parameters exceeds {GRADCHECK_MAX_PARAMS}")
    image, label = sample
    if analytic is None:
        _, analytic = loss_and_gradients(net, image, label)
    if extended:
        net = _as_dtype(net, np.longdouble)
        image = np.asarray(image, dtype=np.longdouble)
        h = np.longdouble(h)
    worst = 0.0
    for tensor, grad in zip(net.tensors(), analytic):
        flat, gflat = tensor.reshape(-1), np.asarray(grad).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = _loss(net, image, label)
            flat[i] = orig - h
            down = _loss(net, image, label)
            flat[i] = orig
            numeric = float((up - down) / (2 * h))
            a = gflat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
