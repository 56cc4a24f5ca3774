"""Dataset index, PGM images, preprocessing, blur and subject-independent folds.

Grayscale images are float64 arrays ``(H, W)`` with pixel values in [0, 255].
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DuplicatePath,
    FilterTooLarge,
    ParseError,
    TooFewSubjects,
    TruncatedPayload,
    UnknownLabel,
    UnsupportedMaxval,
    WrongFoldCount,
)
from .rng import SplitMix64

CLASSES_PREFIX = "#classes:"


@dataclass
class SampleRecord:
    image_path: str
    subject_id: str
    label: int
    label_name: str


@dataclass
class DatasetIndex:
    class_names: list
    records: list = field(default_factory=list)
    root: Path = Path(".")

    def __post_init__(self):
        if not self.class_names:
            raise ParseError("class list is empty")
        if len(set(self.class_names)) != len(self.class_names):
            raise ParseError("class names must be unique")

    def resolve(self, record: SampleRecord) -> Path:
        return self.root / record.image_path

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def subjects(self) -> list:
        return [r.subject_id for r in self.records]


def load_index(path) -> DatasetIndex:
    """Parse an index CSV; image paths are relative to the index's directory."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(CLASSES_PREFIX):
        raise ParseError(f"{path}: first line must start with '{CLASSES_PREFIX}'")
    names = [n.strip() for n in lines[0][len(CLASSES_PREFIX) :].split(",")]
    index = DatasetIndex(names, root=path.parent)
    lookup = {n: i for i, n in enumerate(names)}
    seen = set()
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        img, subject, label = (f.strip() for f in row)
        if label not in lookup:
            raise UnknownLabel(f"{path}:{lineno}: unknown label {label!r}")
        if img in seen:
            raise DuplicatePath(f"{path}:{lineno}: duplicate image path {img!r}")
        seen.add(img)
        index.records.append(SampleRecord(img, subject, lookup[label], label))
    return index


def write_index(index: DatasetIndex, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CLASSES_PREFIX + ",".join(index.class_names) + "\n")
        for r in index.records:
            fh.write(f"{r.image_path},{r.subject_id},{r.label_name}\n")


# ------------------------------------------------------------------ PGM


def _header_tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens and the payload offset."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedPayload("PGM header ended early")
        tokens.append(data[start:pos])
    return tokens, pos + 1  # a single whitespace byte precedes the raster


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) PGM with maxval <= 255."""
    if data[:2] != b"P5":
        raise BadMagic(f"expected binary PGM magic 'P5', got {data[:2]!r}")
    tokens, offset = _header_tokens(data[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(f"malformed PGM header {tokens!r}") from None
    if not 0 < maxval <= 255:
        raise UnsupportedMaxval(f"maxval {maxval} is not supported (must be 1..255)")
    payload = data[2 + offset :]
    n = width * height
    if len(payload) < n:
        raise TruncatedPayload(f"PGM payload has {len(payload)} bytes, need {n}")
    return np.frombuffer(payload, dtype=np.uint8, count=n).reshape(height, width).astype(np.float64)


def encode_pgm(img) -> bytes:
    pixels = np.clip(np.rint(np.asarray(img)), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_pgm(img, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


# ------------------------------------------------------------------ preprocessing


def _axis_weights(in_dim: int, out_dim: int):
    scale = in_dim / out_dim
    src = (np.arange(out_dim) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_dim - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, in_dim - 1)
    return lo, hi, src - lo


def resize_bilinear(img, out_h: int, out_w: int) -> np.ndarray:
    """Edge-clamped bilinear resampling with pixel-centre alignment."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    img = np.asarray(img, dtype=np.float64)
    r0, r1, fr = _axis_weights(img.shape[0], out_h)
    c0, c1, fc = _axis_weights(img.shape[1], out_w)
    top = img[r0][:, c0] + (img[r0][:, c1] - img[r0][:, c0]) * fc
    bottom = img[r1][:, c0] + (img[r1][:, c1] - img[r1][:, c0]) * fc
    out = top + (bottom - top) * fr[:, None]
    # rounding must not push a convex combination outside the input range
    return np.clip(out, img.min(), img.max())


def normalize(img) -> np.ndarray:
    """Map pixels [0, 255] to [-1, 1] as a single-sub-layer feature map."""
    return (np.asarray(img, dtype=np.float64) / 127.5 - 1.0)[None]


def denormalize(fmap) -> np.ndarray:
    return (np.asarray(fmap)[0] + 1.0) * 127.5


def mean_filter(img, size: int) -> np.ndarray:
    """Box blur with replicated borders; output keeps the input's size.

    The window spans offsets ``-(size // 2) .. size - 1 - size // 2`` around each
    pixel, which is centred for odd sizes and leans one pixel towards the
    top-left for even sizes.
    """
    img = np.asarray(img, dtype=np.float64)
    if size < 1:
        raise ValueError("filter size must be >= 1")
    if size > 2 * min(img.shape):
        raise FilterTooLarge(f"filter size {size} exceeds twice the image's smaller side")
    if size == 1:
        return img.copy()
    before = size // 2
    padded = np.pad(img, ((before, size - 1 - before),) * 2, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (size, size))
    out = windows.sum(axis=(-2, -1)) / (size * size)
    return np.clip(out, img.min(), img.max())


# ------------------------------------------------------------------ folds


def _subject_sort_key(ids):
    if all(s.isdigit() for s in ids):
        return lambda s: (int(s), s)
    return lambda s: s


@dataclass
class FoldPlan:
    n_folds: int
    assignment: dict  # subject_id -> fold

    def subjects_in(self, fold: int) -> list:
        return [s for s, f in self.assignment.items() if f == fold]

    def roles(self, trial: int):
        """``(test_fold, validation_fold, training_folds)`` for a trial."""
        test = trial % self.n_folds
        val = (test + 1) % self.n_folds
        train = [f for f in range(self.n_folds) if f not in (test, val)]
        return test, val, train

    def record_mask(self, index: DatasetIndex, folds) -> np.ndarray:
        folds = set(folds)
        return np.array([self.assignment.get(r.subject_id, -1) in folds for r in index.records], dtype=bool)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("subject_id,fold\n")
            for s, f in self.assignment.items():
                fh.write(f"{s},{f}\n")

    @classmethod
    def from_csv(cls, path, n_folds: int = 10) -> "FoldPlan":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["subject_id", "fold"]:
            raise ParseError(f"{path}: expected header 'subject_id,fold'")
        return cls(n_folds, {s: int(f) for s, f in rows[1:] if s})


def subject_folds(index: DatasetIndex, n_folds: int = 10) -> FoldPlan:
    """Sort subjects ascending and deal them round-robin: position p -> fold p mod n."""
    ids = sorted(set(index.subjects), key=_subject_sort_key(set(index.subjects)))
    if len(ids) < n_folds:
        raise TooFewSubjects(f"{len(ids)} subjects cannot fill {n_folds} folds")
    return FoldPlan(n_folds, {s: p % n_folds for p, s in enumerate(ids)})


def reduce_training_folds(train_folds, seed: int) -> list:
    """Keep a seeded random half (4) of the 8 training folds."""
    folds = list(train_folds)
    if len(folds) != 8:
        raise WrongFoldCount(f"expected 8 training folds, got {len(folds)}")
    SplitMix64(seed).shuffle(folds)
    return sorted(folds[:4])


# ------------------------------------------------------------------ loading


def prepare_image(raw, size: tuple, blur: int = 1) -> np.ndarray:
    """decode output -> resize -> optional mean filter -> normalised ``(1, H, W)``."""
    img = resize_bilinear(raw, *size)
    if blur > 1:
        img = mean_filter(img, blur)
    return normalize(img)


def load_dataset(index: DatasetIndex, size: tuple, blur: int = 1, mask=None):
    """Preprocessed images ``(N, 1, H, W)`` and labels for the selected records."""
    records = index.records if mask is None else [r for r, m in zip(index.records, mask) if m]
    images = np.empty((len(records), 1) + tuple(size))
    for n, r in enumerate(records):
        images[n] = prepare_image(read_pgm(index.resolve(r)), size, blur)
    labels = np.array([r.label for r in records], dtype=np.int64)
    return images, labels


# ------------------------------------------------------------------ synthetic data


def _class_pattern(c: int, classes: int, size: int):
    """Centre and orientation of the bar that identifies class ``c``.

    Classes come in pairs sharing a location and differing in orientation
    (horizontal / vertical), so position alone does not identify the class.
    """
    n_loc = math.ceil(classes / 2)
    angle = 2 * math.pi * (c // 2) / n_loc + math.pi / 4
    radius = size / 5 if n_loc > 1 else 0.0
    cy = size / 2 + radius * math.sin(angle)
    cx = size / 2 + radius * math.cos(angle)
    return cy, cx, c % 2


def synthetic_image(c, classes, size, subject_params, rng: SplitMix64) -> np.ndarray:
    background, brightness, dy, dx = subject_params
    cy, cx, vertical = _class_pattern(c, classes, size)
    cy += dy + rng.uniform(-1, 1, 1)[0]
    cx += dx + rng.uniform(-1, 1, 1)[0]
    half_long, half_thick = size / 8, max(size / 32, 0.5)
    if vertical:
        half_h, half_w = half_long, half_thick
    else:
        half_h, half_w = half_thick, half_long
    rows = np.arange(size)[:, None] + 0.5
    cols = np.arange(size)[None, :] + 0.5
    bar = (np.abs(rows - cy) <= half_h) & (np.abs(cols - cx) <= half_w)
    img = np.full((size, size), background) + bar * (brightness - background)
    img += rng.uniform(-20, 20, size * size).reshape(size, size)
    return np.clip(np.rint(img), 0, 255)


def generate_synthetic(out_dir, classes: int, subjects: int, per_subject: int, size: int, seed: int):
    """Write a seeded PGM corpus plus ``index.csv`` and return its index.

    Every subject contributes ``per_subject`` images of every class.  A subject
    has its own background level, bar brightness and bar offset, so subject
    identity varies within a class but never encodes it.
    """
    if classes < 2 or subjects < 10:
        raise ValueError("need at least 2 classes and 10 subjects")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = SplitMix64(seed)
    names = [f"class{c}" for c in range(classes)]
    index = DatasetIndex(names, root=out_dir)
    width = max(3, len(str(subjects)))
    shift = size / 16
    for n in range(subjects):
        sid = f"S{n + 1:0{width}d}"
        background, brightness = rng.uniform(40, 100, 1)[0], rng.uniform(150, 230, 1)[0]
        dy, dx = rng.uniform(-shift, shift, 2)
        for c in range(classes):
            for m in range(per_subject):
                img = synthetic_image(c, classes, size, (background, brightness, dy, dx), rng)
                rel = f"images/{sid}_{names[c]}_{m:02d}.pgm"
                write_pgm(img, out_dir / rel)
                index.records.append(SampleRecord(rel, sid, c, names[c]))
    write_index(index, out_dir / "index.csv")
    return index
