"""Datasets: MNIST IDX files and deterministic synthetic clusters."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, CountMismatch, LabelOutOfRange, TruncatedFile

IDX_IMAGES_MAGIC = 0x00000803  # 2051
IDX_LABELS_MAGIC = 0x00000801  # 2049


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    labels: np.ndarray
    c: int

    def __post_init__(self):
        if self.X.shape[0] != self.labels.shape[0]:
            raise CountMismatch(f"{self.X.shape[0]} samples but {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return self.X.shape[0]

    def slice(self, start: int, stop: int) -> Dataset:
        return Dataset(self.X[start:stop], self.labels[start:stop], self.c)

    @property
    def Y(self) -> np.ndarray:
        return one_hot(self.labels, self.c)


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(raw: bytes, magic: int, ndims: int, what: str) -> np.ndarray:
    header = 4 + 4 * ndims
    if len(raw) < 4:
        raise TruncatedFile(f"{what}: file too short for a magic number")
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise BadMagic(f"{what}: magic {got:#010x}, expected {magic:#010x}")
    if len(raw) < header:
        raise TruncatedFile(f"{what}: header needs {header} bytes, file has {len(raw)}")
    dims = struct.unpack(f">{ndims}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise TruncatedFile(f"{what}: expected {size} payload bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    """Read an IDX image/label pair; pixels are scaled to [0, 1]."""
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, 3, "images")
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, 1, "labels")
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    c = int(labels.max()) + 1 if labels.size else 0
    return Dataset(X, labels, c)


def synth_classification(
    seed: int, samples: int, d: int, c: int, separation: float = 5.0
) -> Dataset:
    """Balanced Gaussian clusters squashed elementwise into (0, 1).

    Class centres are drawn with standard deviation ``separation`` around
    the origin; points have unit noise. Same arguments give identical bytes.
    """
    if c < 2 or samples < c:
        raise ValueError("need samples >= c >= 2")
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, separation, size=(c, d))
    labels = rng.permutation(np.arange(samples) % c)
    raw = centres[labels] + rng.normal(size=(samples, d))
    X = 0.5 * (1.0 + np.tanh(raw / (2.0 * separation)))
    return Dataset(X, labels.astype(np.int64), c)


def one_hot(labels, c: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise LabelOutOfRange(f"labels must lie in [0, {c})")
    Y = np.zeros((labels.size, c))
    Y[np.arange(labels.size), labels] = 1.0
    return Y
