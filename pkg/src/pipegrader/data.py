"""Synthetic texture datasets, stratified splits and folds, cross-entropy loss.

The texture generators stand in for the imbalanced scientific image datasets
this tool is aimed at: each class is oriented band-pass noise with a
class-specific center frequency and orientation plus seeded white noise, so
the class signal lives in texture statistics (co-occurrence structure) rather
than in mean intensity or any low-dimensional spatial pattern.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .util import stable_digest, stable_seed

IMAGE_SIZE = 32


class DatasetError(ValueError):
    """Bad dataset, split, or fold request."""


@dataclass(frozen=True)
class ImageDataset:
    """Labeled grayscale images, all the same shape, values in [0, 1]."""

    images: np.ndarray  # (n, h, w) float64
    labels: np.ndarray  # (n,) int
    class_names: tuple[str, ...]
    seed: int

    def __post_init__(self):
        if self.images.ndim != 3:
            raise DatasetError("images must be a (n, h, w) array")
        if len(self.images) != len(self.labels):
            raise DatasetError("images and labels disagree in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DatasetError("label index out of range")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> tuple[int, ...]:
        return tuple(int((self.labels == c).sum()) for c in range(self.n_classes))

    def subset(self, indices: np.ndarray) -> "ImageDataset":
        return ImageDataset(self.images[indices], self.labels[indices], self.class_names, self.seed)

    def fingerprint(self) -> str:
        return stable_digest(
            ",".join(self.class_names),
            str(self.seed),
            self.labels.astype(np.int64).tobytes(),
            np.ascontiguousarray(self.images, dtype=np.float64).tobytes(),
        )


@dataclass(frozen=True)
class FoldPlan:
    """Stratified k-fold assignment over one dataset."""

    k: int
    fold_assignment: np.ndarray  # (n,) int in [0, k)
    seed: int

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        valid = np.flatnonzero(self.fold_assignment == fold)
        train = np.flatnonzero(self.fold_assignment != fold)
        return train, valid

    def fingerprint(self) -> str:
        return stable_digest(str(self.k), str(self.seed),
                             self.fold_assignment.astype(np.int64).tobytes())


# class counts mirror the imbalance profiles of the four reference datasets;
# (center frequency in cycles per image, orientation in degrees) per class
_PRESETS: dict[str, tuple[tuple[int, ...], tuple[tuple[float, float], ...]]] = {
    "breast-like": ((151, 93, 202), ((9.0, 0.0), (11.5, 60.0), (14.0, 120.0))),
    "brain-like": ((16, 210, 107), ((9.0, 0.0), (11.5, 60.0), (14.0, 120.0))),
    "matsc1-like": ((441, 132), ((9.0, 0.0), (13.0, 90.0))),
    "matsc2-like": ((393, 48), ((9.0, 0.0), (13.0, 90.0))),
    "balanced-small": ((40, 40, 40), ((9.0, 0.0), (11.5, 60.0), (14.0, 120.0))),
}

PRESET_NAMES = tuple(_PRESETS)
_NOISE_SIGMA = 0.10
_TEXTURE_AMPLITUDE = 0.22
_FREQ_BANDWIDTH = 1.3
_ANGLE_BANDWIDTH_DEG = 14.0


def _oriented_noise(rng: np.random.Generator, freq: float, angle_deg: float) -> np.ndarray:
    """Unit-variance band-pass noise concentrated at (freq, +-angle)."""
    fy = np.fft.fftfreq(IMAGE_SIZE)[:, None] * IMAGE_SIZE
    fx = np.fft.fftfreq(IMAGE_SIZE)[None, :] * IMAGE_SIZE
    radius = np.hypot(fx, fy)
    angles = np.arctan2(fy, fx)
    theta = math.radians(angle_deg)
    d1 = np.angle(np.exp(1j * (angles - theta)))
    d2 = np.angle(np.exp(1j * (angles - theta - math.pi)))
    angular = np.minimum(np.abs(d1), np.abs(d2))
    mask = (np.exp(-((radius - freq) ** 2) / (2.0 * _FREQ_BANDWIDTH ** 2))
            * np.exp(-(angular ** 2) / (2.0 * math.radians(_ANGLE_BANDWIDTH_DEG) ** 2)))
    field = np.fft.ifft2(np.fft.fft2(rng.standard_normal((IMAGE_SIZE, IMAGE_SIZE))) * mask).real
    sd = field.std()
    return field / sd if sd > 0 else field


def generate_texture_dataset(preset: str, seed: int) -> ImageDataset:
    """Deterministic class-texture dataset for a named preset.

    Output is a pure function of (preset, seed): identical bytes for identical
    inputs.
    """
    if preset not in _PRESETS:
        raise DatasetError(f"unknown preset {preset!r} (choose from {', '.join(_PRESETS)})")
    counts, klass_params = _PRESETS[preset]
    rng = np.random.default_rng(np.random.SeedSequence([stable_seed("texture", preset), seed]))
    images = []
    labels = []
    for label, (count, (freq, angle_deg)) in enumerate(zip(counts, klass_params)):
        for _ in range(count):
            img = 0.5 + _TEXTURE_AMPLITUDE * _oriented_noise(rng, freq, angle_deg)
            img += rng.normal(0.0, _NOISE_SIGMA, size=img.shape)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(label)
    class_names = tuple(f"texture{i}" for i in range(len(counts)))
    return ImageDataset(np.stack(images), np.asarray(labels, dtype=np.int64), class_names, seed)


def split_train_test(ds: ImageDataset, fraction: float = 0.8, seed: int = 0) -> tuple[ImageDataset, ImageDataset]:
    """Stratified train/test split; both sides keep >= 1 sample per class."""
    if not 0.0 < fraction < 1.0:
        raise DatasetError("fraction must be in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([stable_seed("split"), seed]))
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if len(members) < 2:
            raise DatasetError(f"class {ds.class_names[c]!r} has fewer than 2 samples")
        members = members[rng.permutation(len(members))]
        n_train = int(round(fraction * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        train_idx.extend(members[:n_train])
        test_idx.extend(members[n_train:])
    train_idx = np.sort(np.asarray(train_idx))
    test_idx = np.sort(np.asarray(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


def make_folds(ds: ImageDataset, k: int, seed: int) -> FoldPlan:
    """Stratified k folds; per-class fold sizes differ by at most one."""
    if k < 2:
        raise DatasetError("k must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([stable_seed("folds"), seed]))
    assignment = np.full(len(ds), -1, dtype=np.int64)
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if len(members) < k:
            raise DatasetError(
                f"class {ds.class_names[c]!r} has {len(members)} samples, fewer than k={k}")
        members = members[rng.permutation(len(members))]
        assignment[members] = np.arange(len(members)) % k
    return FoldPlan(k=k, fold_assignment=assignment, seed=seed)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-probability of the true class.

    Rows must already be near-normalized (within 1e-6); each probability is
    clipped to [1e-15, 1 - 1e-15] and the row renormalized before the log, so
    the result is always finite.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2:
        raise DatasetError("probs must be a (samples, classes) matrix")
    if len(probs) != len(labels):
        raise DatasetError(f"probs has {len(probs)} rows for {len(labels)} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise DatasetError("label index out of range for probs")
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise DatasetError("probability rows must sum to 1 within 1e-6")
    clipped = np.clip(probs, 1e-15, 1.0 - 1e-15)
    clipped = clipped / clipped.sum(axis=1, keepdims=True)
    picked = clipped[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(picked)))


def export_dataset(ds: ImageDataset, directory: str) -> None:
    """Write 8-bit grayscale PNGs plus a ``filename,label`` CSV manifest."""
    from PIL import Image

    os.makedirs(directory, exist_ok=True)
    rows = []
    for i, (img, label) in enumerate(zip(ds.images, ds.labels)):
        name = f"{i:05d}.png"
        data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data, mode="L").save(os.path.join(directory, name))
        rows.append((name, ds.class_names[label]))
    with open(os.path.join(directory, "manifest.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "label"])
        writer.writerows(rows)


def load_dataset(directory: str) -> ImageDataset:
    """Read a PNG directory written by :func:`export_dataset`.

    Class indices follow the sorted order of the distinct label names.
    """
    from PIL import Image

    manifest = os.path.join(directory, "manifest.csv")
    if not os.path.exists(manifest):
        raise DatasetError(f"no manifest.csv in {directory!r}")
    with open(manifest, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["filename", "label"]:
            raise DatasetError("manifest.csv must start with 'filename,label'")
        rows = [(r[0], r[1]) for r in reader if r]
    if not rows:
        raise DatasetError("manifest.csv lists no images")
    class_names = tuple(sorted({label for _, label in rows}))
    index = {name: i for i, name in enumerate(class_names)}
    images = []
    labels = []
    for name, label in rows:
        with Image.open(os.path.join(directory, name)) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
        images.append(arr)
        labels.append(index[label])
    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise DatasetError(f"images disagree in shape: {sorted(shapes)}")
    return ImageDataset(np.stack(images), np.asarray(labels, dtype=np.int64), class_names, seed=0)
