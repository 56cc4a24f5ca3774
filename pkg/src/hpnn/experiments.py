"""Cross-validation, single-split training and blur-sweep drivers."""

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import network
from .config import ExperimentConfig
from .data import DatasetIndex, FoldPlan, load_dataset, reduce_training_folds, subject_folds
from .trainer import evaluate, train

BLUR_SIZES = (3, 6, 9, 12, 15)


@dataclass
class TrialResult:
    trial: int
    train_folds: list
    test_acc: float
    best_epoch: int


def _input_size(spec) -> tuple:
    return spec.input_height, spec.input_width


def _subset(images, labels, mask):
    return images[mask], labels[mask]


def run_trial(cfg: ExperimentConfig, index, plan, images, labels, trial, half=False, out=None):
    test, val, train_folds = plan.roles(trial)
    seed = cfg.train.seed + trial
    if half:
        train_folds = reduce_training_folds(train_folds, seed)
    tcfg = replace(cfg.train, seed=seed)
    train_set = _subset(images, labels, plan.record_mask(index, train_folds))
    val_set = _subset(images, labels, plan.record_mask(index, [val]))
    test_set = _subset(images, labels, plan.record_mask(index, [test]))
    net, history = train(cfg.network, train_set, val_set, tcfg)
    if out is not None:
        network.save(net, Path(out) / f"trial{trial}.hpnn")
        history.to_csv(Path(out) / f"trial{trial}_history.csv")
    acc = evaluate(net, test_set).accuracy
    return TrialResult(trial, train_folds, float(acc), history.best_epoch), net


def run_cv(cfg: ExperimentConfig, index: DatasetIndex, out=None, half=False):
    """Subject-independent cross-validation; trial t tests fold t, validates on
    fold t+1 and trains on the rest.  Each trial is seeded with seed + t."""
    plan = subject_folds(index)
    images, labels = load_dataset(index, _input_size(cfg.network))
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        plan.to_csv(out / "folds.csv")
        cfg.save(out / "config.json")
    results = []
    for t in range(plan.n_folds):
        result, _ = run_trial(cfg, index, plan, images, labels, t, half, out)
        results.append(result)
    if out is not None:
        write_summary(results, out / "summary.csv")
    return plan, results


def write_summary(results, path) -> None:
    with open(path, "w") as fh:
        fh.write("trial,test_acc\n")
        for r in results:
            fh.write(f"{r.trial},{r.test_acc!r}\n")


def mean_std(values) -> tuple:
    """Mean and sample standard deviation (0 for a single value)."""
    values = np.asarray(values, dtype=np.float64)
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std


def format_rate(values) -> str:
    """Percentages as 'mean (std)' with two decimals."""
    mean, std = mean_std(values)
    return f"{100 * mean:.2f} ({100 * std:.2f})"


def trial_models(models_dir) -> list:
    """``(trial, path)`` pairs for ``trial<N>.hpnn`` files, ordered by trial."""
    found = []
    for p in Path(models_dir).iterdir():
        m = re.fullmatch(r"trial(\d+)\.hpnn", p.name)
        if m:
            found.append((int(m.group(1)), p))
    return sorted(found)


def blur_accuracy(net, index: DatasetIndex, size: int, mask=None) -> float:
    images, labels = load_dataset(index, _input_size(net.spec), blur=size, mask=mask)
    return float(evaluate(net, (images, labels)).accuracy)


def blur_sweep(models, index: DatasetIndex, sizes=BLUR_SIZES):
    """Accuracy per filter size over a list of ``(net, record mask)`` pairs.

    Returns rows ``(size, mean_acc, std_acc)``.
    """
    rows = []
    for size in sizes:
        accs = [blur_accuracy(net, index, size, mask) for net, mask in models]
        rows.append((size, *mean_std(accs)))
    return rows


def cv_models(models_dir, index: DatasetIndex):
    """Load each trial model of a cv run with the mask of its test fold."""
    models_dir = Path(models_dir)
    plan = FoldPlan.from_csv(models_dir / "folds.csv")
    out = []
    for trial, path in trial_models(models_dir):
        test, _, _ = plan.roles(trial)
        out.append((network.load(path), plan.record_mask(index, [test])))
    return out
