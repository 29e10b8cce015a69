"""Readers for MNIST (IDX) and CIFAR-10 (binary batches), with two-class filtering and normalization.

Nothing is downloaded: files are read from the paths given.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 3 * 32 * 32

MNIST_FILES = {
    "train": (("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
              ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte")),
    "test": (("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
             ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte")),
}
CIFAR_FILES = {
    "train": tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    "test": ("test_batch.bin",),
}


@dataclass
class RawDataset:
    images: np.ndarray  # (N, H, W, C) uint8
    labels: np.ndarray  # (N,) uint8

    def __len__(self):
        return len(self.labels)


@dataclass
class Sample:
    pixels: np.ndarray
    label: int
    source_class: int


@dataclass
class DatasetSplit:
    """Two-class split with labels relabelled to {0, 1}, kept as parallel arrays."""

    images: np.ndarray
    labels: np.ndarray
    source_classes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> Sample:
        return Sample(self.images[i], int(self.labels[i]), int(self.source_classes[i]))

    def label_counts(self):
        return {0: int(np.sum(self.labels == 0)), 1: int(np.sum(self.labels == 1))}

    def subset(self, index) -> "DatasetSplit":
        index = np.asarray(index)
        out = DatasetSplit(self.images[index], self.labels[index], self.source_classes[index], dict(self.meta))
        out.meta["label_counts"] = out.label_counts()
        return out


def _read_header(raw: bytes, n_ints: int, path) -> tuple:
    need = 4 * n_ints
    if len(raw) < need:
        raise FormatError(f"truncated IDX header: {len(raw)} bytes", path, len(raw))
    return struct.unpack(f">{n_ints}I", raw[:need])


def read_idx_images(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, = _read_header(raw, 1, path)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}", path, 0)
    _, count, rows, cols = _read_header(raw, 4, path)
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise FormatError(f"image file has {len(raw)} bytes, header implies {expected}", path, min(len(raw), expected))
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, rows, cols, 1)


def read_idx_labels(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, = _read_header(raw, 1, path)
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(f"bad label magic 0x{magic:08x}", path, 0)
    _, count = _read_header(raw, 2, path)
    if len(raw) != 8 + count:
        raise FormatError(f"label file has {len(raw)} bytes, header implies {8 + count}", path, min(len(raw), 8 + count))
    return np.frombuffer(raw, dtype=np.uint8, offset=8).copy()


def load_mnist(images_path, labels_path) -> RawDataset:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels", labels_path)
    return RawDataset(images, labels)


def load_cifar10(batch_paths) -> RawDataset:
    """Read CIFAR-10 binary batches: label byte, then 1024 bytes each of R, G, B."""
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    images, labels = [], []
    for path in batch_paths:
        raw = Path(path).read_bytes()
        if len(raw) == 0 or len(raw) % CIFAR_RECORD:
            raise FormatError(f"size {len(raw)} is not a multiple of {CIFAR_RECORD}", path,
                              len(raw) - len(raw) % CIFAR_RECORD)
        rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        if rec[:, 0].max() > 9:
            bad = int(np.argmax(rec[:, 0] > 9))
            raise FormatError(f"label {rec[bad, 0]} out of range", path, bad * CIFAR_RECORD)
        labels.append(rec[:, 0].copy())
        images.append(rec[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1))
    return RawDataset(np.concatenate(images), np.concatenate(labels))


def _find(data_dir: Path, names):
    for sub in ("", "mnist", "MNIST", "MNIST/raw", "cifar-10-batches-bin", "cifar10"):
        for name in names:
            path = data_dir / sub / name
            if path.exists():
                return path
    raise ConfigurationError(f"none of {list(names)} found under {data_dir}")


def dataset_paths(name: str, data_dir, split: str):
    data_dir = Path(data_dir)
    if name == "mnist":
        img_names, lbl_names = MNIST_FILES[split]
        return _find(data_dir, img_names), _find(data_dir, lbl_names)
    if name == "cifar10":
        return [_find(data_dir, (f,)) for f in CIFAR_FILES[split]]
    raise ConfigurationError(f"unknown dataset {name!r}")


def load_raw(name: str, data_dir, split: str) -> RawDataset:
    paths = dataset_paths(name, data_dir, split)
    return load_mnist(*paths) if name == "mnist" else load_cifar10(paths)


def filter_and_relabel(raw: RawDataset, class_a: int, class_b: int, dataset="", role="train") -> DatasetSplit:
    """Keep two classes in source order; ``class_a`` becomes 0 and ``class_b`` 1."""
    if class_a == class_b:
        raise ConfigurationError("the two classes must differ")
    keep = (raw.labels == class_a) | (raw.labels == class_b)
    if not keep.any():
        raise ConfigurationError(f"no samples of classes {class_a}, {class_b}")
    src = raw.labels[keep].astype(np.int64)
    split = DatasetSplit(raw.images[keep], (src == class_b).astype(np.int64), src,
                         {"dataset": dataset, "classes": (class_a, class_b), "role": role})
    split.meta["label_counts"] = split.label_counts()
    return split


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray  # per channel, in [0, 1] units
    std: np.ndarray
    provenance: str = "train"


def fit_normalization(split: DatasetSplit) -> NormStats:
    """Global (per-channel) mean and std of a training split after scaling to [0, 1]."""
    if split.meta.get("role") != "train":
        raise ConfigurationError("normalization statistics may only come from a training split")
    x = split.images.astype(np.float64) / 255.0
    axes = tuple(range(x.ndim - 1))
    mean, std = x.mean(axis=axes), x.std(axis=axes)
    if np.any(std < 1e-12):
        raise DomainError("zero pixel standard deviation")
    return NormStats(mean, std, "train")


def normalize(split: DatasetSplit, stats: NormStats) -> DatasetSplit:
    """Scale bytes to [0, 1], then standardize with training statistics."""
    if stats.provenance != "train":
        raise ConfigurationError("normalization statistics must come from the training split")
    if np.any(stats.std < 1e-12):
        raise DomainError("zero pixel standard deviation")
    images = (split.images.astype(np.float64) / 255.0 - stats.mean) / stats.std
    meta = dict(split.meta, norm={"mean": stats.mean.tolist(), "std": stats.std.tolist()})
    return replace(split, images=images, meta=meta)


def shuffle(split: DatasetSplit, seed: int) -> DatasetSplit:
    perm = np.random.default_rng(seed).permutation(len(split))
    return split.subset(perm)


def take(split: DatasetSplit, limit) -> DatasetSplit:
    if limit is None or limit >= len(split):
        return split
    return split.subset(np.arange(limit))
