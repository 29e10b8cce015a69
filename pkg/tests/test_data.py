import struct

import numpy as np
import pytest

from conftest import MNIST_DIR, needs_mnist, write_cifar, write_idx
from qnlnet.data import (CIFAR_RECORD, NormStats, RawDataset, filter_and_relabel, fit_normalization, load_cifar10,
                         load_mnist, load_raw, normalize, shuffle, take)
from qnlnet.errors import ConfigurationError, DomainError, FormatError


def test_idx_round_trip(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(7, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=7).astype(np.uint8)
    write_idx(tmp_path, "train", imgs, labels)
    raw = load_mnist(tmp_path / "train-images-idx3-ubyte", tmp_path / "train-labels-idx1-ubyte")
    assert raw.images.shape == (7, 28, 28, 1)
    assert np.array_equal(raw.images[..., 0], imgs)
    assert np.array_equal(raw.labels, labels)


def test_idx_bad_magic_reports_offset(tmp_path):
    path = tmp_path / "x-images"
    path.write_bytes(struct.pack(">IIII", 0x801, 1, 2, 2) + bytes(4))
    with pytest.raises(FormatError) as info:
        load_mnist(path, path)
    assert info.value.offset == 0
    assert str(path) in str(info.value)


def test_idx_truncated(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(3, 28, 28), dtype=np.uint8)
    write_idx(tmp_path, "train", imgs, np.zeros(3, np.uint8))
    path = tmp_path / "train-images-idx3-ubyte"
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(FormatError) as info:
        load_mnist(path, tmp_path / "train-labels-idx1-ubyte")
    assert info.value.offset == 16 + 3 * 784 - 10


def test_idx_truncated_header(tmp_path):
    path = tmp_path / "h"
    path.write_bytes(struct.pack(">I", 0x803) + bytes(3))
    with pytest.raises(FormatError):
        load_mnist(path, path)


def test_idx_count_mismatch(tmp_path, rng):
    write_idx(tmp_path, "a", rng.integers(0, 256, size=(4, 28, 28), dtype=np.uint8), np.zeros(4, np.uint8))
    write_idx(tmp_path, "b", rng.integers(0, 256, size=(5, 28, 28), dtype=np.uint8), np.zeros(5, np.uint8))
    with pytest.raises(FormatError):
        load_mnist(tmp_path / "a-images-idx3-ubyte", tmp_path / "b-labels-idx1-ubyte")


def test_cifar_record_layout(tmp_path, rng):
    assert CIFAR_RECORD == 3073
    rec = write_cifar(tmp_path / "b.bin", np.array([3, 9], np.uint8), rng)
    raw = load_cifar10(tmp_path / "b.bin")
    assert raw.images.shape == (2, 32, 32, 3)
    assert list(raw.labels) == [3, 9]
    # channel c, row i, column j sits at byte 1 + 1024c + 32i + j
    for c, i, j in [(0, 0, 0), (1, 5, 7), (2, 31, 31)]:
        assert raw.images[1, i, j, c] == rec[1, 1 + 1024 * c + 32 * i + j]


def test_cifar_bad_size(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(bytes(3073 * 2 + 5))
    with pytest.raises(FormatError) as info:
        load_cifar10(path)
    assert info.value.offset == 3073 * 2


def test_cifar_five_batches(fake_cifar):
    raw = load_raw("cifar10", fake_cifar, "train")
    assert len(raw) == 5 * 40
    assert len(load_raw("cifar10", fake_cifar, "test")) == 40


def test_filter_relabel_order_and_mapping():
    labels = np.array([5, 3, 1, 6, 3, 6, 0], np.uint8)
    raw = RawDataset(np.arange(7, dtype=np.uint8).reshape(7, 1, 1, 1), labels)
    split = filter_and_relabel(raw, 6, 3)
    assert list(split.images[:, 0, 0, 0]) == [1, 3, 4, 5]
    assert list(split.labels) == [1, 0, 1, 0]
    assert list(split.source_classes) == [3, 6, 3, 6]
    assert split.label_counts() == {0: 2, 1: 2}


def test_filter_errors():
    raw = RawDataset(np.zeros((2, 1, 1, 1), np.uint8), np.array([1, 2], np.uint8))
    with pytest.raises(ConfigurationError):
        filter_and_relabel(raw, 4, 5)
    with pytest.raises(ConfigurationError):
        filter_and_relabel(raw, 1, 1)


def test_normalization_constant_image(fake_mnist):
    train = filter_and_relabel(load_raw("mnist", fake_mnist, "train"), 0, 1)
    stats = fit_normalization(train)
    const = train.subset([0])
    const.images = np.full_like(const.images, 255)
    out = normalize(const, stats)
    assert np.allclose(out.images, (1 - stats.mean) / stats.std)


def test_normalized_train_is_standard(fake_mnist):
    train = filter_and_relabel(load_raw("mnist", fake_mnist, "train"), 0, 1)
    out = normalize(train, fit_normalization(train))
    assert abs(out.images.mean()) < 1e-6
    assert abs(out.images.std() - 1) < 1e-6


def test_normalization_leakage_guard(fake_mnist):
    test = filter_and_relabel(load_raw("mnist", fake_mnist, "test"), 0, 1, role="test")
    with pytest.raises(ConfigurationError):
        fit_normalization(test)
    with pytest.raises(ConfigurationError):
        normalize(test, NormStats(np.array([0.1]), np.array([0.3]), provenance="test"))


def test_zero_std():
    split = filter_and_relabel(RawDataset(np.full((3, 2, 2, 1), 9, np.uint8), np.zeros(3, np.uint8)), 0, 1)
    with pytest.raises(DomainError):
        fit_normalization(split)


def test_shuffle_determinism():
    n = 1000
    raw = RawDataset(np.arange(n, dtype=np.uint16).reshape(n, 1, 1, 1), np.arange(n) % 2)
    split = filter_and_relabel(raw, 0, 1)
    a, b = shuffle(split, 5), shuffle(split, 5)
    assert np.array_equal(a.images, b.images)
    assert not np.array_equal(a.images, shuffle(split, 6).images)
    assert sorted(a.images.ravel()) == list(range(n))
    assert len(take(a, 10)) == 10 and take(a, None) is a


def test_pipeline_bit_identical(fake_mnist):
    def run():
        train = shuffle(filter_and_relabel(load_raw("mnist", fake_mnist, "train"), 0, 1), 3)
        return normalize(train, fit_normalization(train)).images
    assert run().tobytes() == run().tobytes()


@needs_mnist
def test_official_mnist():
    train = load_raw("mnist", MNIST_DIR, "train")
    test = load_raw("mnist", MNIST_DIR, "test")
    assert len(train) == 60000 and len(test) == 10000
    assert train.labels[0] == 5
    assert len(filter_and_relabel(train, 0, 1)) == 12665
    assert len(filter_and_relabel(test, 0, 1, role="test")) == 2115
    x = train.images.astype(np.float64) / 255
    assert x.mean() == pytest.approx(0.1307, abs=5e-5)
    assert x.std() == pytest.approx(0.3081, abs=5e-5)
