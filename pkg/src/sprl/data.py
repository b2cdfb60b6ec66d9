"""Datasets: synthetic Gaussian blobs, IDX (MNIST) files and numeric CSV."""
from __future__ import annotations

import csv
import io
import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .numeric import make_rng

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    pass


@dataclass
class Dataset:
    train_features: np.ndarray
    train_true_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    c: int
    name: str = "dataset"
    train_noisy_labels: np.ndarray | None = None

    def __post_init__(self):
        self.train_true_labels = np.asarray(self.train_true_labels, dtype=np.int64)
        self.test_labels = np.asarray(self.test_labels, dtype=np.int64)
        if self.train_noisy_labels is None:
            self.train_noisy_labels = self.train_true_labels.copy()
        self.train_noisy_labels = np.asarray(self.train_noisy_labels, dtype=np.int64)
        for name in ("train_true_labels", "train_noisy_labels", "test_labels"):
            y = getattr(self, name)
            if y.size and (y.min() < 0 or y.max() >= self.c):
                raise ValueError(f"{name} outside 0..{self.c - 1}")
        if len(self.train_features) != len(self.train_true_labels) or \
                len(self.train_noisy_labels) != len(self.train_true_labels):
            raise ValueError("train features and labels differ in length")
        if len(self.test_features) != len(self.test_labels):
            raise ValueError("test features and labels differ in length")

    @property
    def n(self) -> int:
        return len(self.train_true_labels)

    @property
    def d(self) -> int:
        return self.train_features.shape[1]

    def noise_rate(self) -> float:
        return float(np.mean(self.train_noisy_labels != self.train_true_labels))

    def with_noisy_labels(self, noisy) -> "Dataset":
        return replace(self, train_noisy_labels=np.asarray(noisy, dtype=np.int64))

    def split_validation(self, fraction: float, seed: int) -> tuple["Dataset", np.ndarray, np.ndarray]:
        """Carve a noisy validation split off the training set.

        Returns ``(reduced dataset, val_features, val_noisy_labels)``.
        """
        perm = make_rng(seed, "split").permutation(self.n)
        n_val = int(round(fraction * self.n))
        val, keep = np.sort(perm[:n_val]), np.sort(perm[n_val:])
        reduced = replace(self, train_features=self.train_features[keep],
                          train_true_labels=self.train_true_labels[keep],
                          train_noisy_labels=self.train_noisy_labels[keep])
        return reduced, self.train_features[val], self.train_noisy_labels[val]


def _split(x, y, c, name, seed, test_fraction=0.2):
    perm = make_rng(seed, "split").permutation(len(y))
    n_test = int(round(test_fraction * len(y)))
    te, tr = perm[:n_test], perm[n_test:]
    return Dataset(x[tr], y[tr], x[te], y[te], c, name)


def make_blobs(n: int = 2000, c: int = 4, d: int = 20, class_separation: float = 2.0,
               seed: int = 0, test_fraction: float = 0.2) -> Dataset:
    """Balanced isotropic Gaussian clusters with unit variance.

    Centres are random directions scaled to norm ``class_separation``; the
    split is a seeded 80/20 permutation.
    """
    if class_separation <= 0:
        raise ValueError("class_separation must be positive")
    rng = make_rng(seed, "init")
    centers = rng.standard_normal((c, d))
    centers *= class_separation / np.linalg.norm(centers, axis=1, keepdims=True)
    y = np.arange(n) % c
    x = centers[y] + rng.standard_normal((n, d))
    return _split(x, y, c, "blobs", seed, test_fraction)


def _read_header(buf: bytes, path, expected_magic: int, ndim: int):
    if len(buf) < 4 + 4 * ndim:
        raise DataFormatError(f"{path}: truncated header ({len(buf)} bytes)")
    magic = struct.unpack_from(">I", buf, 0)[0]
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad magic number 0x{magic:08x} at offset 0, expected 0x{expected_magic:08x}")
    return struct.unpack_from(f">{ndim}I", buf, 4)


def load_idx(images_path, labels_path, limit: int | None = None, seed: int = 0,
             test_fraction: float = 0.2) -> Dataset:
    """Read an IDX image/label pair (MNIST layout) as flat features in [0, 1]."""
    img = Path(images_path).read_bytes()
    lab = Path(labels_path).read_bytes()
    count, rows, cols = _read_header(img, images_path, IDX_IMAGES_MAGIC, 3)
    (lcount,) = _read_header(lab, labels_path, IDX_LABELS_MAGIC, 1)
    if count != lcount:
        raise DataFormatError(f"image count {count} does not match label count {lcount}")
    if limit is None:
        limit = count
    elif limit > count:
        log.warning("limit %d exceeds %d samples in %s; clamping", limit, count, images_path)
        limit = count
    need = 16 + limit * rows * cols
    if len(img) < need:
        raise DataFormatError(f"{images_path}: truncated pixel data ({len(img)} < {need} bytes)")
    if len(lab) < 8 + limit:
        raise DataFormatError(f"{labels_path}: truncated label data")
    x = np.frombuffer(img, dtype=np.uint8, count=limit * rows * cols, offset=16)
    x = x.reshape(limit, rows * cols).astype(np.float64) / 255.0
    y = np.frombuffer(lab, dtype=np.uint8, count=limit, offset=8).astype(np.int64)
    if y.size and y.max() > 9:
        raise DataFormatError(f"{labels_path}: label {y.max()} outside 0..9")
    return _split(x, y, 10, "idx", seed, test_fraction)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images ``(count, rows, cols)`` and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, len(labels)) + labels.tobytes())


def read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    """Header plus a float64 matrix; rejects ragged rows and non-numeric cells."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return header, data


def format_float(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    """UTF-8, LF line endings; floats at round-trip (17 significant digit) precision."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def load_csv(features_path, labels_path=None, label_column: str = "label", seed: int = 0,
             test_fraction: float = 0.2) -> Dataset:
    """Numeric CSV features with labels from a second file or a named column."""
    header, data = read_numeric_csv(features_path)
    if data.shape[0] == 0:
        raise DataFormatError(f"{features_path}: no data rows")
    if labels_path is not None:
        _, lab = read_numeric_csv(labels_path)
        if lab.shape[0] != data.shape[0]:
            raise DataFormatError("feature and label files differ in row count")
        y = lab[:, 0]
        x = data
    else:
        if label_column not in header:
            raise DataFormatError(f"{features_path}: no column named {label_column!r}")
        col = header.index(label_column)
        y = data[:, col]
        x = np.delete(data, col, axis=1)
    if np.any(y != np.round(y)) or np.any(y < 0):
        raise DataFormatError("labels must be non-negative integers")
    y = y.astype(np.int64)
    ds = _split(x, y, int(y.max()) + 1, Path(features_path).stem, seed, test_fraction)
    unseen = set(np.unique(ds.test_labels)) - set(np.unique(ds.train_true_labels))
    if unseen:
        raise DataFormatError(f"test split contains labels never seen in training: {sorted(unseen)}")
    return ds


def save_labels_csv(path, labels, header: str = "noisy_label") -> None:
    write_csv(path, [header], ([int(v)] for v in labels))
