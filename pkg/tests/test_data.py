import filecmp

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hpnn.data import (
    DatasetIndex,
    FoldPlan,
    SampleRecord,
    decode_pgm,
    denormalize,
    encode_pgm,
    generate_synthetic,
    load_dataset,
    load_index,
    mean_filter,
    normalize,
    prepare_image,
    reduce_training_folds,
    resize_bilinear,
    subject_folds,
    write_pgm,
)
from hpnn.errors import (
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
from oracles import bilinear_point, naive_window_mean

CK_CLASSES = ["neutral", "anger", "contempt", "disgust", "fear", "happiness", "sadness", "surprise"]


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_two_rows(tmp_path):
    p = write(tmp_path / "i.csv", "#classes:a,b\nimg/1.pgm,S1,a\nimg/2.pgm,S2,b\n")
    index = load_index(p)
    assert index.class_names == ["a", "b"]
    assert [(r.image_path, r.subject_id, r.label) for r in index.records] == [
        ("img/1.pgm", "S1", 0),
        ("img/2.pgm", "S2", 1),
    ]
    assert index.resolve(index.records[0]) == tmp_path / "img/1.pgm"


def test_unknown_label_names_the_row(tmp_path):
    p = write(tmp_path / "i.csv", "#classes:a,b\nx.pgm,S1,a\ny.pgm,S1,zzz\n")
    with pytest.raises(UnknownLabel, match=":3:"):
        load_index(p)


@pytest.mark.parametrize(
    "text, error",
    [
        ("#classes:a\nx.pgm,S1,a\nx.pgm,S2,a\n", DuplicatePath),
        ("#classes:a\nx.pgm,S1\n", ParseError),
        ("path,subject,label\nx.pgm,S1,a\n", ParseError),
        ("#classes:a,a\n", ParseError),
    ],
)
def test_index_errors(tmp_path, text, error):
    with pytest.raises(error):
        load_index(write(tmp_path / "i.csv", text))


def test_ck_style_index_counts(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["#classes:" + ",".join(CK_CLASSES)]
    for n in range(1308):
        subject = f"S{(n % 118) + 1:03d}"
        lines.append(f"frames/{n:05d}.png.pgm,{subject},{CK_CLASSES[rng.integers(0, 8)]}")
    text = "\n".join(lines) + "\n"
    index = load_index(write(tmp_path / "ck.csv", text))
    assert len(index.records) == 1308
    assert len(set(index.subjects)) == 118
    counts = np.bincount(index.labels, minlength=8)
    # independent recount straight from the text lines
    for c, name in enumerate(CK_CLASSES):
        assert counts[c] == sum(1 for line in text.splitlines()[1:] if line.endswith("," + name))


def test_decode_pgm_example():
    img = decode_pgm(b"P5 2 2 255\n" + bytes([0, 255, 128, 64]))
    np.testing.assert_array_equal(img, [[0, 255], [128, 64]])
    assert img.dtype == np.float64


def test_decode_pgm_with_comments_and_round_trip():
    data = b"P5\n# made by hand\n3 2\n# max\n255\n" + bytes(range(6))
    np.testing.assert_array_equal(decode_pgm(data), np.arange(6).reshape(2, 3))
    img = np.random.default_rng(0).integers(0, 256, size=(7, 5)).astype(float)
    np.testing.assert_array_equal(decode_pgm(encode_pgm(img)), img)


@pytest.mark.parametrize(
    "data, error",
    [
        (b"P2 2 2 255\n0 1 2 3", BadMagic),
        (b"P5 2 2 255\n" + bytes(3), TruncatedPayload),
        (b"P5 2 2 65535\n" + bytes(8), UnsupportedMaxval),
        (b"P5 2", TruncatedPayload),
    ],
)
def test_decode_pgm_errors(data, error):
    with pytest.raises(error):
        decode_pgm(data)


def test_resize_same_size_is_identity():
    img = np.random.default_rng(1).uniform(0, 255, size=(6, 9))
    np.testing.assert_array_equal(resize_bilinear(img, 6, 9), img)


def test_resize_constant():
    out = resize_bilinear(np.full((5, 7), 0.1), 96, 96)
    assert np.all(out == 0.1)


def test_resize_two_by_two_to_four_by_four():
    img = np.array([[0.0, 100.0], [100.0, 200.0]])
    # source coordinates clamp to 0, .25, .75, 1 along both axes
    expected = np.array(
        [
            [0, 25, 75, 100],
            [25, 50, 100, 125],
            [75, 100, 150, 175],
            [100, 125, 175, 200],
        ],
        dtype=float,
    )
    out = resize_bilinear(img, 4, 4)
    np.testing.assert_allclose(out, expected, atol=1e-12)
    for y in range(4):
        for x in range(4):
            assert out[y, x] == pytest.approx(bilinear_point(img, (y + 0.5) / 2 - 0.5, (x + 0.5) / 2 - 0.5))


@pytest.mark.parametrize("shape, out", [((10, 13), (96, 96)), ((120, 100), (96, 96)), ((7, 7), (3, 11))])
def test_resize_matches_pointwise_oracle(shape, out):
    img = np.random.default_rng(2).uniform(0, 255, size=shape)
    got = resize_bilinear(img, *out)
    sy, sx = shape[0] / out[0], shape[1] / out[1]
    for y in range(out[0]):
        for x in range(out[1]):
            assert got[y, x] == pytest.approx(bilinear_point(img, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5), abs=1e-9)


images = arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.floats(0, 255))


@settings(max_examples=100, deadline=None)
@given(images, st.integers(1, 20), st.integers(1, 20))
def test_resize_stays_in_range(img, h, w):
    out = resize_bilinear(img, h, w)
    assert out.min() >= img.min() and out.max() <= img.max()


def test_normalize_endpoints_and_inverse():
    fmap = normalize(np.array([[0.0, 255.0, 127.5]]))
    assert fmap.shape == (1, 1, 3)
    np.testing.assert_array_equal(fmap[0, 0], [-1.0, 1.0, 0.0])
    img = np.random.default_rng(3).uniform(0, 255, size=(9, 9))
    np.testing.assert_allclose(denormalize(normalize(img)), img, atol=1e-12)


def test_mean_filter_size_one_and_constant():
    img = np.random.default_rng(4).uniform(0, 255, size=(8, 8))
    np.testing.assert_array_equal(mean_filter(img, 1), img)
    const = np.full((10, 10), 0.1)
    for size in (3, 6, 15):
        np.testing.assert_array_equal(mean_filter(const, size), const)


def test_mean_filter_impulse():
    img = np.zeros((5, 5))
    img[2, 2] = 9.0
    out = mean_filter(img, 3)
    np.testing.assert_array_equal(out, naive_window_mean(img, 3))
    expected = np.zeros((5, 5))
    expected[1:4, 1:4] = 1.0
    np.testing.assert_array_equal(out, expected)


@pytest.mark.parametrize("size", [2, 3, 4, 6, 9])
def test_mean_filter_matches_oracle(size):
    img = np.random.default_rng(size).integers(0, 256, size=(11, 8)).astype(float)
    np.testing.assert_array_equal(mean_filter(img, size), naive_window_mean(img, size))


def test_mean_filter_guard():
    with pytest.raises(FilterTooLarge):
        mean_filter(np.zeros((4, 6)), 9)


@settings(max_examples=100, deadline=None)
@given(images, st.integers(1, 5))
def test_mean_filter_stays_in_range(img, size):
    if size > 2 * min(img.shape):
        return
    out = mean_filter(img, size)
    assert out.shape == img.shape
    assert out.min() >= img.min() and out.max() <= img.max()


def index_with_subjects(ids):
    idx = DatasetIndex(["a", "b"])
    for n, s in enumerate(ids):
        idx.records.append(SampleRecord(f"{n}.pgm", s, n % 2, "ab"[n % 2]))
    return idx


def test_ten_subjects_one_per_fold():
    ids = [f"S{n:02d}" for n in range(10)]
    plan = subject_folds(index_with_subjects(ids[::-1]))
    assert plan.assignment == {s: n for n, s in enumerate(ids)}


def test_twenty_five_subjects():
    plan = subject_folds(index_with_subjects([f"S{n:03d}" for n in range(25)]))
    sizes = [len(plan.subjects_in(f)) for f in range(10)]
    assert sizes == [3] * 5 + [2] * 5


def test_fold_two_of_123_subjects():
    ids = [f"S{n:03d}" for n in range(1, 124)]
    plan = subject_folds(index_with_subjects(ids))
    sorted_ids = sorted(ids)
    assert sorted(plan.subjects_in(2)) == [sorted_ids[p] for p in range(2, 123, 10)]
    assert len(plan.subjects_in(2)) == 13


def test_numeric_ids_sort_numerically():
    ids = [str(n) for n in range(1, 13)]
    plan = subject_folds(index_with_subjects(ids))
    assert plan.assignment["10"] == 9 and plan.assignment["2"] == 1 and plan.assignment["11"] == 0


def test_too_few_subjects():
    with pytest.raises(TooFewSubjects):
        subject_folds(index_with_subjects(["a", "b", "c"]))


@pytest.mark.parametrize("n_subjects", [10, 25, 118, 123])
def test_folds_partition_and_roles_are_subject_disjoint(n_subjects):
    ids = [f"P{n:04d}" for n in range(n_subjects)]
    idx = index_with_subjects(ids * 3)
    plan = subject_folds(idx)
    sizes = [len(plan.subjects_in(f)) for f in range(10)]
    assert max(sizes) - min(sizes) <= 1
    assert sum(sizes) == n_subjects
    for trial in range(10):
        test, val, train = plan.roles(trial)
        assert val == (test + 1) % 10 and len(train) == 8
        groups = [set(plan.subjects_in(test)), set(plan.subjects_in(val))]
        groups.append({s for f in train for s in plan.subjects_in(f)})
        assert not (groups[0] & groups[1] or groups[0] & groups[2] or groups[1] & groups[2])
        masks = [plan.record_mask(idx, [test]), plan.record_mask(idx, [val]), plan.record_mask(idx, train)]
        assert np.all(sum(m.astype(int) for m in masks) == 1)


def test_fold_plan_csv_round_trip(tmp_path):
    plan = subject_folds(index_with_subjects([f"S{n}" for n in range(14)]))
    plan.to_csv(tmp_path / "f.csv")
    assert FoldPlan.from_csv(tmp_path / "f.csv") == plan


def test_reduce_training_folds():
    folds = [2, 3, 4, 5, 6, 7, 8, 9]
    kept = reduce_training_folds(folds, 5)
    assert kept == reduce_training_folds(folds, 5)
    assert len(kept) == 4 and set(kept) <= set(folds)
    assert not {0, 1} & set(kept)
    with pytest.raises(WrongFoldCount):
        reduce_training_folds(folds[:7], 0)


def test_reduce_training_folds_is_unbiased():
    folds = list(range(2, 10))
    kept = np.zeros(10)
    for seed in range(100):
        for f in reduce_training_folds(folds, seed):
            kept[f] += 1
    freq = kept[2:] / 100
    assert np.all(np.abs(freq - 0.5) <= 0.15)


def test_synthetic_counts_and_balance(tmp_path):
    index = generate_synthetic(tmp_path, 4, 20, 5, 24, seed=1)
    assert len(index.records) == 400
    assert np.bincount(index.labels).tolist() == [100] * 4
    assert len((tmp_path / "index.csv").read_text().splitlines()) == 401
    assert len(load_index(tmp_path / "index.csv").records) == 400


def test_synthetic_is_seed_deterministic(tmp_path):
    generate_synthetic(tmp_path / "a", 3, 10, 2, 16, seed=4)
    generate_synthetic(tmp_path / "b", 3, 10, 2, 16, seed=4)
    cmp = filecmp.dircmp(tmp_path / "a" / "images", tmp_path / "b" / "images")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    assert filecmp.cmp(tmp_path / "a" / "index.csv", tmp_path / "b" / "index.csv", shallow=False)
    for name in cmp.common_files:
        assert filecmp.cmp(tmp_path / "a" / "images" / name, tmp_path / "b" / "images" / name, shallow=False)


def test_synthetic_signal_beats_chance(tmp_path):
    index = generate_synthetic(tmp_path, 4, 20, 5, 32, seed=2)
    plan = subject_folds(index)
    test_mask = plan.record_mask(index, [0, 1])
    images, labels = load_dataset(index, (32, 32))
    flat = images.reshape(len(images), -1)
    train_x, train_y = flat[~test_mask], labels[~test_mask]
    centroids = np.array([train_x[train_y == c].mean(axis=0) for c in range(4)])
    dists = ((flat[test_mask][:, None, :] - centroids[None]) ** 2).sum(axis=2)
    acc = np.mean(np.argmin(dists, axis=1) == labels[test_mask])
    assert acc > 0.25 + 0.1


def test_preprocessing_is_deterministic(tmp_path):
    img = np.random.default_rng(5).integers(0, 256, size=(40, 30)).astype(float)
    write_pgm(img, tmp_path / "x.pgm")
    raw = (tmp_path / "x.pgm").read_bytes()
    a = prepare_image(decode_pgm(raw), (32, 32), blur=3)
    b = prepare_image(decode_pgm(raw), (32, 32), blur=3)
    assert a.tobytes() == b.tobytes()
    assert a.shape == (1, 32, 32)
