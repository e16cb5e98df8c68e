"""Dataset access at desk scale, degrading gracefully when files are absent.

The data root comes from the XBARSIM_DATA environment variable (default
./data).  Loaders return (images uint8 (n, d), labels int64 (n,)) pairs.
When a corpus is missing the callers fall back to the deterministic
synthetic glyph generator, so every study can run on a blank machine.
"""

import os
import struct
from pathlib import Path

import numpy as np

# Desk-scale subset sizes: enough signal for tolerance checks, minutes not hours.
MNIST_TRAIN, MNIST_TEST = 10000, 2000
CIFAR_TRAIN, CIFAR_TEST = 5000, 1000
OCR_SIZE = 50  # images resampled to 50x50 grayscale

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def data_root():
    return Path(os.environ.get("XBARSIM_DATA", "data"))


def _read_idx_images(path):
    with open(path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII", fh.read(16))
        if magic != _IDX_IMAGES_MAGIC:
            raise ValueError(f"{path}: bad IDX image magic {magic:#x}")
        data = np.frombuffer(fh.read(n * rows * cols), dtype=np.uint8)
    return data.reshape(n, rows * cols).copy()


def _read_idx_labels(path):
    with open(path, "rb") as fh:
        magic, n = struct.unpack(">II", fh.read(8))
        if magic != _IDX_LABELS_MAGIC:
            raise ValueError(f"{path}: bad IDX label magic {magic:#x}")
        data = np.frombuffer(fh.read(n), dtype=np.uint8)
    return data.astype(np.int64).copy()


def load_mnist(root=None):
    """Desk-scale MNIST subset from the standard IDX files, or None."""
    root = Path(root) if root else data_root() / "mnist"
    names = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
    if not all((root / n).exists() for n in names):
        return None
    tx = _read_idx_images(root / names[0])[:MNIST_TRAIN]
    ty = _read_idx_labels(root / names[1])[:MNIST_TRAIN]
    vx = _read_idx_images(root / names[2])[:MNIST_TEST]
    vy = _read_idx_labels(root / names[3])[:MNIST_TEST]
    return (tx, ty), (vx, vy)


def load_cifar10(root=None):
    """Desk-scale CIFAR-10 subset from the binary batches, or None.

    Records are 1 label byte + 3072 pixel bytes; images stay flat 3072-wide.
    """
    root = Path(root) if root else data_root() / "cifar-10-batches-bin"
    train_files = [root / f"data_batch_{i}.bin" for i in range(1, 6)]
    test_file = root / "test_batch.bin"
    if not (train_files[0].exists() and test_file.exists()):
        return None

    def read_batch(path):
        raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
        rec = raw.reshape(-1, 3073)
        return rec[:, 1:].copy(), rec[:, 0].astype(np.int64).copy()

    xs, ys = [], []
    for f in train_files:
        if not f.exists():
            break
        x, y = read_batch(f)
        xs.append(x)
        ys.append(y)
        if sum(len(a) for a in xs) >= CIFAR_TRAIN:
            break
    tx = np.concatenate(xs)[:CIFAR_TRAIN]
    ty = np.concatenate(ys)[:CIFAR_TRAIN]
    vx, vy = read_batch(test_file)
    return (tx, ty), (vx[:CIFAR_TEST], vy[:CIFAR_TEST])


def load_glyph_dir(root=None, per_class=100, size=OCR_SIZE):
    """Character images from one subdirectory per class, or None.

    Files are decoded with Pillow, converted to grayscale and resampled to
    size x size.  Class order is the sorted subdirectory order.
    """
    root = Path(root) if root else data_root() / "glyphs"
    if not root.is_dir():
        return None
    from PIL import Image
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        return None
    images, labels = [], []
    for ci, cdir in enumerate(class_dirs):
        files = sorted(cdir.iterdir())[:per_class]
        for f in files:
            with Image.open(f) as im:
                g = im.convert("L").resize((size, size))
            images.append(np.asarray(g, dtype=np.uint8).reshape(-1))
            labels.append(ci)
    if not images:
        return None
    return np.stack(images), np.asarray(labels, dtype=np.int64)


def synthetic_glyphs(n_classes=26, per_class=80, size=OCR_SIZE, seed=7,
                     noise=24.0):
    """Deterministic procedural glyph corpus used when no data is present.

    Each class is a random coarse block pattern; samples add seeded pixel
    noise.  Linearly separable enough for the desk-scale studies.
    """
    rng = np.random.default_rng(seed)
    blocks = 5
    cell = size // blocks
    protos = rng.integers(0, 2, size=(n_classes, blocks, blocks))
    canvas = np.kron(protos, np.ones((cell, cell), dtype=np.int64)) * 200 + 28
    pad = size - cell * blocks
    if pad:
        canvas = np.pad(canvas, ((0, 0), (0, pad), (0, pad)), constant_values=28)
    images, labels = [], []
    for ci in range(n_classes):
        base = canvas[ci].astype(np.float64)
        jitter = rng.normal(0.0, noise, size=(per_class, size, size))
        batch = np.clip(base + jitter, 0, 255).astype(np.uint8)
        images.append(batch.reshape(per_class, -1))
        labels.append(np.full(per_class, ci, dtype=np.int64))
    x = np.concatenate(images)
    y = np.concatenate(labels)
    order = rng.permutation(len(y))
    return x[order], y[order]


def split_train_test(x, y, test_frac=0.25, seed=13):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(y))
    n_test = max(1, int(len(y) * test_frac))
    te, tr = order[:n_test], order[n_test:]
    return (x[tr], y[tr]), (x[te], y[te])
