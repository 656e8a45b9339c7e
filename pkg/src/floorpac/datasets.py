"""Datasets, prior/complement index splits and mini-batch sampling."""

from __future__ import annotations

import csv
import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "BatchMode",
    "BatchSpec",
    "Dataset",
    "IdxFormatError",
    "IndexSplit",
    "blob_centers",
    "corrupt_labels",
    "load_idx",
    "sample_batch",
    "sample_prior_indices",
    "synth_blobs",
    "synth_idx_images",
    "write_idx",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"features {X.shape} and labels {y.shape} do not line up")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def to_csv(self, path) -> None:
        """Write ``index,label,f0,f1,...`` rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "label"] + [f"f{j}" for j in range(self.input_dim)])
            for i in range(self.n):
                w.writerow([i, int(self.labels[i])] + [repr(float(v)) for v in self.features[i]])

    @classmethod
    def from_csv(cls, path, num_classes: int | None = None) -> "Dataset":
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        labels = raw[:, 1].astype(np.int64)
        k = num_classes if num_classes is not None else int(labels.max()) + 1
        return cls(raw[:, 2:], labels, k)


class IdxFormatError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    buf = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise IdxFormatError(f"{path}: truncated header", len(buf))
    got = struct.unpack(">I", buf[:4])[0]
    if got != magic:
        raise IdxFormatError(f"{path}: magic {got:#010x}, expected {magic:#010x}", 0)
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    size = math.prod(dims)
    if len(buf) - header < size:
        raise IdxFormatError(f"{path}: expected {size} data bytes, found {len(buf) - header}", len(buf))
    return np.frombuffer(buf, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(image_path, label_path, num_classes: int = 10) -> Dataset:
    """Read an IDX image/label pair (MNIST layout); pixels are scaled to [0, 1]."""
    images = _read_idx(image_path, IDX_IMAGE_MAGIC, 3)
    labels = _read_idx(label_path, IDX_LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels", 4)
    X = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(X, labels.astype(np.int64), num_classes)


def write_idx(image_path, label_path, images: np.ndarray, labels: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError("images must have shape (count, rows, cols)")
    with open(image_path, "wb") as fh:
        fh.write(struct.pack(">4I", IDX_IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(label_path, "wb") as fh:
        fh.write(struct.pack(">2I", IDX_LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def synth_idx_images(n: int, rows: int = 28, cols: int = 28, num_classes: int = 10, seed=0):
    """Stand-in for an IDX image set: class ``c`` lights a horizontal band, plus noise.

    Returns ``(images uint8 (n, rows, cols), labels uint8 (n,))``.
    """
    if num_classes > rows:
        raise ValueError("need at least one image row per class")
    rng = _rng(seed)
    labels = rng.integers(0, num_classes, size=n)
    band = rows // num_classes
    images = rng.integers(0, 60, size=(n, rows, cols))
    for c in range(num_classes):
        sel = labels == c
        images[sel, c * band:(c + 1) * band, :] += 150
    return np.clip(images, 0, 255).astype(np.uint8), labels.astype(np.uint8)


def blob_centers(input_dim: int, num_classes: int, separation: float) -> np.ndarray:
    """Class centres with neighbouring centres ``separation`` apart.

    Centres sit on a circle in the first two coordinates (on a line when
    ``input_dim == 1``).
    """
    centers = np.zeros((num_classes, input_dim))
    if input_dim == 1 or num_classes == 2:
        centers[:, 0] = separation * (np.arange(num_classes) - (num_classes - 1) / 2)
    else:
        radius = separation / (2 * math.sin(math.pi / num_classes))
        angle = 2 * math.pi * np.arange(num_classes) / num_classes
        centers[:, 0] = radius * np.cos(angle)
        centers[:, 1] = radius * np.sin(angle)
    return centers


def synth_blobs(n: int, input_dim: int, num_classes: int, separation: float, seed) -> Dataset:
    """i.i.d. sample: uniform class, then an isotropic unit Gaussian around its centre."""
    if n < num_classes or num_classes < 2 or input_dim < 1:
        raise ValueError(f"degenerate blob parameters n={n}, dim={input_dim}, classes={num_classes}")
    if not (math.isfinite(separation) and separation >= 0):
        raise ValueError(f"separation must be finite and >= 0, got {separation}")
    rng = _rng(seed)
    labels = rng.integers(0, num_classes, size=n)
    X = blob_centers(input_dim, num_classes, separation)[labels] + rng.standard_normal((n, input_dim))
    return Dataset(X, labels, num_classes)


def corrupt_labels(ds: Dataset, portion: float, seed, return_mask: bool = False):
    """Resample the labels of ``round(n * portion)`` rows uniformly at random.

    Rows are chosen without replacement; a resampled label may coincide with
    the original one.
    """
    if not 0.0 <= portion <= 1.0:
        raise ValueError(f"portion must lie in [0, 1], got {portion}")
    rng = _rng(seed)
    count = int(math.floor(ds.n * portion + 0.5))
    rows = rng.choice(ds.n, size=count, replace=False)
    labels = ds.labels.copy()
    labels[rows] = rng.integers(0, ds.num_classes, size=count)
    out = Dataset(ds.features, labels, ds.num_classes)
    if return_mask:
        mask = np.zeros(ds.n, dtype=bool)
        mask[rows] = True
        return out, mask
    return out


@dataclass(frozen=True, eq=False)
class IndexSplit:
    """Prior index sequence ``J`` and the sorted complement ``I``.

    ``J`` keeps its sampling order; wherever set semantics are needed
    (complement, intersection with a batch) the element set is used.
    """

    J: np.ndarray
    I: np.ndarray
    n: int

    def __post_init__(self):
        J = np.asarray(self.J, dtype=np.int64)
        I = np.asarray(self.I, dtype=np.int64)
        if J.size and (J.min() < 0 or J.max() >= self.n):
            raise ValueError("prior indices out of range")
        if np.unique(J).size != J.size:
            raise ValueError("prior indices must be distinct")
        expected = np.setdiff1d(np.arange(self.n), J)
        if not np.array_equal(I, expected):
            raise ValueError("I must be the sorted complement of J")
        J.setflags(write=False)
        I.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "I", I)

    @classmethod
    def from_prior(cls, J, n: int) -> "IndexSplit":
        J = np.asarray(J, dtype=np.int64)
        return cls(J, np.setdiff1d(np.arange(n), J), n)

    @property
    def m(self) -> int:
        return self.J.size

    def in_prior(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.J] = True
        return mask


def sample_prior_indices(n: int, m: int, seed) -> IndexSplit:
    """``m`` indices drawn uniformly from ``[0, n)`` without replacement."""
    if not 0 <= m < n:
        raise ValueError(f"need 0 <= m < n, got m={m}, n={n}")
    rng = _rng(seed)
    J = rng.permutation(n)[:m]
    return IndexSplit.from_prior(J, n)


class BatchMode(str, enum.Enum):
    WITHOUT_REPLACEMENT = "without_replacement"
    WITH_REPLACEMENT = "with_replacement"
    STRATIFIED_IJ = "stratified_ij"


@dataclass(frozen=True)
class BatchSpec:
    size: int
    mode: BatchMode = BatchMode.WITHOUT_REPLACEMENT
    from_I: int | None = None
    from_J: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", BatchMode(self.mode))
        if self.size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.size}")
        if self.mode is BatchMode.STRATIFIED_IJ:
            if self.from_I is None or self.from_J is None or self.from_I + self.from_J != self.size:
                raise ValueError("stratified batches need from_I + from_J == size")

    @classmethod
    def stratified(cls, from_I: int, from_J: int) -> "BatchSpec":
        return cls(from_I + from_J, BatchMode.STRATIFIED_IJ, from_I, from_J)


def sample_batch(split: IndexSplit, spec: BatchSpec, rng: np.random.Generator) -> np.ndarray:
    n = split.n
    if spec.mode is BatchMode.WITH_REPLACEMENT:
        return rng.integers(0, n, size=spec.size)
    if spec.mode is BatchMode.WITHOUT_REPLACEMENT:
        if spec.size > n:
            raise ValueError(f"batch of {spec.size} exceeds n={n}")
        return rng.choice(n, size=spec.size, replace=False)
    if spec.from_I > split.I.size or spec.from_J > split.J.size:
        raise ValueError(
            f"stratified counts ({spec.from_I}, {spec.from_J}) exceed side sizes ({split.I.size}, {split.J.size})"
        )
    from_I = rng.choice(split.I, size=spec.from_I, replace=False)
    from_J = rng.choice(split.J, size=spec.from_J, replace=False)
    return np.concatenate([from_I, from_J])
