"""Command-line front end: ``hpnn <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on data or geometry errors.
"""

import argparse
import json
import sys
from pathlib import Path

from . import network
from .config import ExperimentConfig
from .data import FoldPlan, generate_synthetic, load_dataset, load_index, subject_folds
from .errors import HPNNError
from .experiments import (
    BLUR_SIZES,
    blur_sweep,
    cv_models,
    format_rate,
    run_cv,
    run_trial,
)
from .network import count_params, init_params
from .rng import SplitMix64
from .trainer import evaluate, gradient_check

GRADCHECK_LIMIT = 1e-5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sizes(text: str) -> list:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--sizes expects comma-separated integers, got {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("--sizes needs positive integers")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hpnn", description="Sub-layered pyramidal neural network experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train on one cross-validation split")
    t.add_argument("--config", required=True)
    t.add_argument("--index", required=True)
    t.add_argument("--out", default="hpnn-train")
    t.add_argument("--seed", type=int)
    t.add_argument("--trial", type=int, default=0, help="fold split to use (default 0)")

    e = sub.add_parser("eval", help="evaluate a saved model")
    e.add_argument("--model", required=True)
    e.add_argument("--index", required=True)
    e.add_argument("--fold-plan")
    e.add_argument("--fold", type=int)
    e.add_argument("--out", help="CSV report path")

    c = sub.add_parser("cv", help="subject-independent 10-fold cross-validation")
    c.add_argument("--config", required=True)
    c.add_argument("--index", required=True)
    c.add_argument("--half-subjects", action="store_true")
    c.add_argument("--out", default="hpnn-cv")
    c.add_argument("--seed", type=int)

    b = sub.add_parser("blur-sweep", help="accuracy under increasing mean-filter blur")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--models", help="directory written by 'cv'")
    b.add_argument("--index", required=True)
    b.add_argument("--sizes", type=_sizes, default=list(BLUR_SIZES))
    b.add_argument("--fold-plan")
    b.add_argument("--fold", type=int)
    b.add_argument("--out", help="CSV output path")

    pa = sub.add_parser("params", help="trainable-parameter table")
    pa.add_argument("--config", required=True)

    g = sub.add_parser("gradcheck", help="finite-difference gradient check")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--step", type=float, default=1e-5)

    s = sub.add_parser("synth", help="write a synthetic PGM corpus")
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--subjects", type=int, required=True)
    s.add_argument("--per-subject", type=int, required=True)
    s.add_argument("--size", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
    print(f"seed: {cfg.train.seed}")
    return cfg


def _fold_mask(args, index):
    if (args.fold_plan is None) != (args.fold is None):
        raise UsageError("--fold-plan and --fold must be given together")
    if args.fold_plan is None:
        return None
    return FoldPlan.from_csv(args.fold_plan).record_mask(index, [args.fold])


def _check_classes(net, index):
    if net.spec.num_classes != len(index.class_names):
        raise HPNNError(
            f"model has {net.spec.num_classes} outputs but the index declares "
            f"{len(index.class_names)} classes"
        )


def cmd_train(args) -> int:
    cfg = _load_config(args)
    index = load_index(args.index)
    _check_classes(init_params(cfg.network, 0), index)
    plan = subject_folds(index)
    size = (cfg.network.input_height, cfg.network.input_width)
    images, labels = load_dataset(index, size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan.to_csv(out / "folds.csv")
    cfg.save(out / "config.json")
    result, _ = run_trial(cfg, index, plan, images, labels, args.trial, out=out)
    print(f"best epoch: {result.best_epoch}")
    print(f"test fold {plan.roles(args.trial)[0]} accuracy: {100 * result.test_acc:.2f}")
    print(f"model: {out / f'trial{args.trial}.hpnn'}")
    print(f"history: {out / f'trial{args.trial}_history.csv'}")
    return 0


def cmd_eval(args) -> int:
    print("seed: none (evaluation is deterministic)")
    net = network.load(args.model)
    index = load_index(args.index)
    _check_classes(net, index)
    mask = _fold_mask(args, index)
    images, labels = load_dataset(index, (net.spec.input_height, net.spec.input_width), mask=mask)
    report = evaluate(net, (images, labels))
    names = index.class_names
    print(f"samples: {len(labels)}")
    print(f"accuracy: {100 * report.accuracy:.2f}")
    width = max(len(n) for n in names)
    print(" " * width + "  " + " ".join(f"{n:>{width}}" for n in names) + "  recall")
    for name, row, rec in zip(names, report.confusion, report.recall):
        cells = " ".join(f"{v:>{width}d}" for v in row)
        print(f"{name:>{width}}  {cells}  {100 * rec:.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"accuracy,{report.accuracy!r}\n")
            fh.write("true_label," + ",".join(names) + ",recall\n")
            for name, row, rec in zip(names, report.confusion, report.recall):
                fh.write(f"{name}," + ",".join(str(v) for v in row) + f",{float(rec)!r}\n")
    return 0


def cmd_cv(args) -> int:
    cfg = _load_config(args)
    index = load_index(args.index)
    _check_classes(init_params(cfg.network, 0), index)
    _, results = run_cv(cfg, index, out=args.out, half=args.half_subjects)
    for r in results:
        folds = " ".join(str(f) for f in r.train_folds)
        print(
            f"trial {r.trial}: test accuracy {100 * r.test_acc:.2f} "
            f"(best epoch {r.best_epoch}; train folds {folds})"
        )
    print(f"recognition rate: {format_rate([r.test_acc for r in results])}")
    print(f"summary: {Path(args.out) / 'summary.csv'}")
    return 0


def cmd_blur_sweep(args) -> int:
    print("seed: none (evaluation is deterministic)")
    index = load_index(args.index)
    if args.models:
        if args.fold_plan is not None or args.fold is not None:
            raise UsageError("--fold-plan/--fold only apply with --model")
        models = cv_models(args.models, index)
        if not models:
            raise HPNNError(f"no trial<N>.hpnn models in {args.models}")
    else:
        models = [(network.load(args.model), _fold_mask(args, index))]
    for net, _ in models:
        _check_classes(net, index)
    rows = blur_sweep(models, index, args.sizes)
    lines = ["filter_size,mean_acc,std_acc"] + [f"{s},{m!r},{d!r}" for s, m, d in rows]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def cmd_params(args) -> int:
    cfg = _load_config(args)
    counts = count_params(cfg.network)
    print("layer,weights,biases,total")
    for name, nw, nb, total in counts.rows:
        print(f"{name},{nw},{nb},{total}")
    print(f"total,{sum(r[1] for r in counts.rows)},{sum(r[2] for r in counts.rows)},{counts.total}")
    return 0


def gradcheck_sample(spec, seed: int):
    """Seeded random image in [-1, 1] and label for gradient checking."""
    rng = SplitMix64(seed + 1)
    image = rng.uniform(-1.0, 1.0, spec.input_height * spec.input_width)
    return image.reshape(1, spec.input_height, spec.input_width), seed % spec.num_classes


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args)
    net = init_params(cfg.network, cfg.train.seed)
    err = gradient_check(net, gradcheck_sample(cfg.network, cfg.train.seed), args.step)
    print(f"parameters: {net.num_params}")
    print(f"max relative error: {err:.3e}")
    return 0 if err <= GRADCHECK_LIMIT else 2


def cmd_synth(args) -> int:
    print(f"seed: {args.seed}")
    index = generate_synthetic(
        args.out, args.classes, args.subjects, args.per_subject, args.size, args.seed
    )
    print(f"images: {len(index.records)}")
    print(f"index: {Path(args.out) / 'index.csv'}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "blur-sweep": cmd_blur_sweep,
    "params": cmd_params,
    "gradcheck": cmd_gradcheck,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (HPNNError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
