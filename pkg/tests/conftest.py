import os
import struct
from pathlib import Path

import numpy as np
import pytest


def mnist_dir():
    names = ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte")
    for cand in (os.environ.get("QNLNET_DATA_DIR"), "/root/data/mnist", "data/mnist"):
        if cand and any((Path(cand) / n).exists() for n in names):
            return Path(cand)
    return None


MNIST_DIR = mnist_dir()
needs_mnist = pytest.mark.skipif(MNIST_DIR is None, reason="MNIST IDX files not found (set QNLNET_DATA_DIR)")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_idx(directory, prefix, images, labels):
    directory = Path(directory)
    n, r, c = images.shape
    (directory / f"{prefix}-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, n, r, c) + images.tobytes())
    (directory / f"{prefix}-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + labels.tobytes())


def synthetic_digits(n, rng, classes=(0, 1)):
    """28x28 byte images: class 0 a ring, class 1 a vertical bar, with noise."""
    yy, xx = np.mgrid[:28, :28]
    ring = (np.abs(np.hypot(yy - 14, xx - 14) - 8) < 2.5).astype(float)
    bar = (np.abs(xx - 14) < 2.5) & (yy > 4) & (yy < 24)
    labels = rng.choice(np.array(classes, dtype=np.uint8), size=n)
    imgs = np.empty((n, 28, 28), dtype=np.uint8)
    for i, lbl in enumerate(labels):
        base = ring if lbl == classes[0] else bar.astype(float)
        shift = rng.integers(-2, 3, size=2)
        img = np.roll(base, tuple(shift), axis=(0, 1)) * 220 + rng.uniform(0, 35, (28, 28))
        imgs[i] = np.clip(img, 0, 255).astype(np.uint8)
    return imgs, labels


@pytest.fixture
def fake_mnist(tmp_path):
    gen = np.random.default_rng(7)
    imgs, labels = synthetic_digits(300, gen, classes=(0, 1))
    extra, extra_l = synthetic_digits(60, gen, classes=(3, 6))
    write_idx(tmp_path, "train", np.concatenate([imgs[:240], extra]), np.concatenate([labels[:240], extra_l]))
    write_idx(tmp_path, "t10k", imgs[240:], labels[240:])
    return tmp_path


def write_cifar(path, labels, rng):
    rec = np.empty((len(labels), 3073), dtype=np.uint8)
    rec[:, 0] = labels
    rec[:, 1:] = rng.integers(0, 256, size=(len(labels), 3072), dtype=np.uint8)
    Path(path).write_bytes(rec.tobytes())
    return rec


@pytest.fixture
def fake_cifar(tmp_path):
    gen = np.random.default_rng(11)
    for i in range(1, 6):
        write_cifar(tmp_path / f"data_batch_{i}.bin", gen.integers(0, 10, size=40).astype(np.uint8), gen)
    write_cifar(tmp_path / "test_batch.bin", gen.integers(0, 10, size=40).astype(np.uint8), gen)
    return tmp_path


ACCEPTANCE_REPORTS = []
OUTCOME_WORD = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.skipped and report.when == "setup"):
        ACCEPTANCE_REPORTS.append(report)


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL/SKIP line per acceptance criterion, in run order."""
    if not ACCEPTANCE_REPORTS:
        return
    terminalreporter.section("acceptance criteria")
    for rep in ACCEPTANCE_REPORTS:
        props = dict(rep.user_properties)
        name = props.pop("criterion", rep.nodeid.split("::")[-1])
        extra = " ".join(f"{k}={v}" for k, v in props.items())
        if rep.skipped:
            extra = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else "skipped"
        terminalreporter.write_line(f"{OUTCOME_WORD[rep.outcome]} {name}" + (f"  [{extra}]" if extra else ""))
