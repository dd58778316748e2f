"""IDX (MNIST) reading/writing and synthetic class-blob datasets."""

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ConsistencyError, DataIOError, FormatError

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.labels.shape[0] != self.features.shape[0]:
            raise ConsistencyError("feature and label counts differ")

    def __len__(self):
        return self.labels.shape[0]

    def subsample_per_class(self, cap, rng=None):
        """Keep at most ``cap`` samples of every class (first ones without rng)."""
        keep = []
        for c in range(self.n_classes):
            idx = np.flatnonzero(self.labels == c)
            if idx.shape[0] > cap:
                idx = np.sort(rng.choice(idx, cap, replace=False)) if rng is not None else idx[:cap]
            keep.append(idx)
        keep = np.sort(np.concatenate(keep))
        return LabeledDataset(self.features[keep], self.labels[keep], self.n_classes)


def _open(path):
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expected_magic, n_dims):
    try:
        with _open(path) as fh:
            raw = fh.read()
    except FileNotFoundError as exc:
        raise DataIOError(f"{path}: not found") from exc
    except OSError as exc:
        raise DataIOError(f"{path}: {exc}") from exc
    header = 4 + 4 * n_dims
    if len(raw) < 4:
        raise DataIOError(f"{path}: truncated header")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic != expected_magic:
        raise FormatError(f"{path}: magic {magic}, expected {expected_magic}")
    if len(raw) < header:
        raise DataIOError(f"{path}: truncated header")
    dims = struct.unpack(">" + "i" * n_dims, raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise DataIOError(f"{path}: truncated payload ({len(raw) - header} of {count} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, n_classes=None):
    """Parse an IDX image/label pair; pixels are scaled into [0, 1]."""
    images = _read_idx(images_path, IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(float) / 255.0
    labels = labels.astype(np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    return LabeledDataset(features, labels, n_classes)


def write_idx(path, array):
    """Write a uint8 array as IDX (magic 2051 for 3-D images, 2049 for labels)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = {3: IMAGES_MAGIC, 1: LABELS_MAGIC}.get(array.ndim)
    if magic is None:
        raise FormatError("IDX writer supports 1-D labels or 3-D images only")
    header = struct.pack(">i", magic) + struct.pack(">" + "i" * array.ndim, *array.shape)
    opener = gzip.open if os.fspath(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(header)
        fh.write(array.tobytes())


def to_idx_images(features, side=None):
    """Quantize [0, 1] features to uint8 square images for IDX output."""
    n, f = features.shape
    side = side or int(round(np.sqrt(f)))
    if side * side != f:
        raise FormatError(f"{f} features are not a square image")
    return np.clip(np.rint(features * 255.0), 0, 255).astype(np.uint8).reshape(n, side, side)


def synthesize(n_classes, per_class, feature_dim, separation, rng, spread=None):
    """Gaussian blobs in [0, 1]^feature_dim, class means ``separation`` apart.

    Means sit at ``c0 + a * e_k`` on distinct random coordinates ``k`` with
    ``a = separation / sqrt(2)``; ``spread`` (default ``separation / 10``) is
    the per-coordinate noise standard deviation before clamping.
    """
    if min(n_classes, per_class, feature_dim) < 1:
        raise ConfigurationError("counts must be >= 1")
    if feature_dim < n_classes:
        raise ConfigurationError("feature_dim must be >= n_classes")
    a = separation / np.sqrt(2.0)
    if a > 1.0:
        raise ConfigurationError("separation must be <= sqrt(2) to fit in [0, 1]")
    spread = separation / 10.0 if spread is None else spread
    axes = rng.choice(feature_dim, size=n_classes, replace=False)
    means = np.full((n_classes, feature_dim), 0.5 - a / 2.0)
    means[np.arange(n_classes), axes] += a
    labels = np.repeat(np.arange(n_classes), per_class)
    features = means[labels] + spread * rng.standard_normal((labels.shape[0], feature_dim))
    return LabeledDataset(np.clip(features, 0.0, 1.0), labels, n_classes)


def load_mnist_subset():
    """The 5000-sample MNIST subset bundled with ``mlxtend`` (optional extra)."""
    try:
        import mlxtend
    except ImportError as exc:
        raise DataIOError(
            "the MNIST subset needs the optional 'mlxtend' package") from exc
    path = os.path.join(os.path.dirname(mlxtend.__file__), "data", "data", "mnist_5k.csv.gz")
    table = np.loadtxt(path, delimiter=",", dtype=np.int64)
    return LabeledDataset(table[:, :-1].astype(float) / 255.0, table[:, -1], 10)


def split_per_class(dataset, train_per_class):
    """First ``train_per_class`` samples of each class train, the rest test."""
    train, test = [], []
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.labels == c)
        train.append(idx[:train_per_class])
        test.append(idx[train_per_class:])
    train = np.sort(np.concatenate(train))
    test = np.sort(np.concatenate(test))
    return (LabeledDataset(dataset.features[train], dataset.labels[train], dataset.n_classes),
            LabeledDataset(dataset.features[test], dataset.labels[test], dataset.n_classes))
