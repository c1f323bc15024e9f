import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import pipegrader as pg

from conftest import tiny_image_dataset


@pytest.mark.parametrize("preset,counts", [
    ("breast-like", (151, 93, 202)),
    ("brain-like", (16, 210, 107)),
    ("matsc1-like", (441, 132)),
    ("matsc2-like", (393, 48)),
    ("balanced-small", (40, 40, 40)),
])
def test_preset_class_counts(preset, counts):
    ds = pg.generate_texture_dataset(preset, 0)
    assert ds.class_counts() == counts
    assert ds.images.shape[1:] == (32, 32)
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0


def test_generator_is_pure_function_of_preset_and_seed():
    a = pg.generate_texture_dataset("balanced-small", 3)
    b = pg.generate_texture_dataset("balanced-small", 3)
    c = pg.generate_texture_dataset("balanced-small", 4)
    assert a.images.tobytes() == b.images.tobytes()
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()


def test_unknown_preset():
    with pytest.raises(pg.DatasetError, match="unknown preset"):
        pg.generate_texture_dataset("nope", 0)


def test_split_80_20_balanced():
    ds = pg.generate_texture_dataset("balanced-small", 0)
    train, test = pg.split_train_test(ds, 0.8, 0)
    assert len(train) == 96 and len(test) == 24
    assert train.class_counts() == (32, 32, 32)


def test_split_matsc2_minority_is_38_10():
    ds = pg.generate_texture_dataset("matsc2-like", 0)
    train, test = pg.split_train_test(ds, 0.8, 0)
    assert train.class_counts()[1] == 38 and test.class_counts()[1] == 10


def test_split_two_per_class_half():
    ds = tiny_image_dataset((2, 2))
    train, test = pg.split_train_test(ds, 0.5, 0)
    assert train.class_counts() == (1, 1) and test.class_counts() == (1, 1)


def test_split_rejects_singleton_class():
    ds = tiny_image_dataset((5, 1))
    with pytest.raises(pg.DatasetError, match="fewer than 2"):
        pg.split_train_test(ds, 0.8, 0)


def test_split_is_disjoint_and_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(10):
        counts = tuple(int(rng.integers(2, 30)) for _ in range(int(rng.integers(2, 4))))
        ds = tiny_image_dataset(counts, seed=int(rng.integers(100)))
        train, test = pg.split_train_test(ds, 0.8, int(rng.integers(100)))
        assert len(train) + len(test) == len(ds)
        for c, n in enumerate(counts):
            n_train = train.class_counts()[c]
            assert 1 <= n_train <= n - 1
            assert n_train == min(max(int(round(0.8 * n)), 1), n - 1)


def test_folds_balanced_small():
    ds = pg.generate_texture_dataset("balanced-small", 0)
    plan = pg.make_folds(ds, 5, 0)
    for fold in range(5):
        _, valid = plan.split(fold)
        assert len(valid) == 24
        assert tuple(np.bincount(ds.labels[valid], minlength=3)) == (8, 8, 8)


def test_folds_deterministic_under_seed():
    ds = pg.generate_texture_dataset("balanced-small", 1)
    a = pg.make_folds(ds, 5, 9)
    b = pg.make_folds(ds, 5, 9)
    assert np.array_equal(a.fold_assignment, b.fold_assignment)
    assert a.fingerprint() == b.fingerprint()


def test_folds_brain_glioma_sizes():
    ds = pg.generate_texture_dataset("brain-like", 0)
    plan = pg.make_folds(ds, 5, 0)
    glioma = ds.labels == 0  # 16 samples
    sizes = sorted(np.bincount(plan.fold_assignment[glioma], minlength=5), reverse=True)
    assert sizes == [4, 3, 3, 3, 3]


def test_folds_reject_class_smaller_than_k():
    ds = tiny_image_dataset((10, 3))
    with pytest.raises(pg.DatasetError, match="fewer than k"):
        pg.make_folds(ds, 5, 0)


def test_folds_partition_every_sample():
    rng = np.random.default_rng(1)
    for _ in range(10):
        counts = tuple(int(rng.integers(4, 25)) for _ in range(int(rng.integers(2, 5))))
        ds = tiny_image_dataset(counts, seed=int(rng.integers(100)))
        k = int(rng.integers(2, 1 + min(counts)))
        plan = pg.make_folds(ds, k, int(rng.integers(100)))
        assert set(plan.fold_assignment) <= set(range(k))
        union = np.concatenate([plan.split(f)[1] for f in range(k)])
        assert sorted(union) == list(range(len(ds)))
        for c in range(len(counts)):
            sizes = np.bincount(plan.fold_assignment[ds.labels == c], minlength=k)
            assert sizes.max() - sizes.min() <= 1


def test_cross_entropy_uniform_is_ln3():
    probs = np.full((10, 3), 1.0 / 3.0)
    labels = np.arange(10) % 3
    assert pg.cross_entropy(probs, labels) == pytest.approx(math.log(3.0), abs=1e-12)


def test_cross_entropy_one_hot_correct_is_tiny():
    labels = np.array([0, 1, 2])
    probs = np.eye(3)[labels]
    assert 0.0 <= pg.cross_entropy(probs, labels) <= 1e-12


def test_cross_entropy_half_is_ln2():
    assert pg.cross_entropy(np.array([[0.5, 0.5]]), np.array([0])) == pytest.approx(
        math.log(2.0), abs=1e-12)


def test_cross_entropy_validates_inputs():
    with pytest.raises(pg.DatasetError, match="sum to 1"):
        pg.cross_entropy(np.array([[0.9, 0.2]]), np.array([0]))
    with pytest.raises(pg.DatasetError, match="rows"):
        pg.cross_entropy(np.array([[0.5, 0.5]]), np.array([0, 1]))
    with pytest.raises(pg.DatasetError, match="label"):
        pg.cross_entropy(np.array([[0.5, 0.5]]), np.array([2]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.floats(0.001, 1.0), min_size=3, max_size=3),
                min_size=1, max_size=8),
       st.integers(0, 2))
def test_cross_entropy_nonnegative(raw, label):
    probs = np.asarray(raw)
    probs = probs / probs.sum(axis=1, keepdims=True)
    labels = np.full(len(probs), label)
    assert pg.cross_entropy(probs, labels) >= 0.0


def test_png_roundtrip(tmp_path):
    from pipegrader.data import export_dataset, load_dataset

    ds = pg.generate_texture_dataset("balanced-small", 2)
    export_dataset(ds, str(tmp_path))
    back = load_dataset(str(tmp_path))
    assert len(back) == len(ds)
    assert back.class_names == ds.class_names
    assert np.array_equal(back.labels, ds.labels)
    assert np.max(np.abs(back.images - ds.images)) <= 0.5 / 255.0 + 1e-12
