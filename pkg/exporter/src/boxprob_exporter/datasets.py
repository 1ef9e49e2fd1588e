"""Dataset loading, resizing, normalization, and seeded splitting.

Two image sources are supported for the digit-classification exports:

- ``mnist``: the 28x28 MNIST corpus read from IDX files in a local
  cache directory (downloaded on first use when the network allows).
- ``digits``: scikit-learn's bundled 8x8 handwritten-digits set, which
  needs no network access.

Either source is normalized to [0, 1], resized to the requested grid
by area-weighted averaging, and flattened row-major (C order), so a
pixel at (row, col) becomes feature ``row * width + col``.
"""

from __future__ import annotations

import gzip
import struct
import urllib.error
import urllib.request
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetError",
    "area_resize",
    "load_digits_images",
    "load_iris_table",
    "load_mnist_images",
    "overlap_matrix",
    "seeded_split",
]

_MNIST_FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)
_MNIST_URL_BASE = "https://ossci-datasets.s3.amazonaws.com/mnist/"
DEFAULT_MNIST_CACHE = Path.home() / ".cache" / "boxprob-exporter" / "mnist"


class DatasetError(RuntimeError):
    """A dataset could not be loaded or downloaded."""


def load_iris_table() -> tuple[np.ndarray, np.ndarray, list[str]]:
    """The iris table: (150, 4) float features, labels 0..2, feature names."""
    from sklearn.datasets import load_iris

    data = load_iris()
    return (np.asarray(data.data, dtype=np.float64),
            np.asarray(data.target, dtype=np.int64),
            [str(n) for n in data.feature_names])


def load_digits_images() -> tuple[np.ndarray, np.ndarray]:
    """scikit-learn's bundled digits: (1797, 8, 8) in [0, 1], labels 0..9."""
    from sklearn.datasets import load_digits

    data = load_digits()
    images = np.asarray(data.images, dtype=np.float64) / 16.0
    return images, np.asarray(data.target, dtype=np.int64)


def read_idx(path: Path) -> np.ndarray:
    """Read one IDX file (gzipped or raw): unsigned-byte tensors only."""
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        header = fh.read(4)
        if len(header) != 4 or header[0] != 0 or header[1] != 0:
            raise DatasetError(f"{path}: not an IDX file")
        dtype_code, ndim = header[2], header[3]
        if dtype_code != 0x08:
            raise DatasetError(f"{path}: unsupported IDX element type 0x{dtype_code:02x}")
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        data = fh.read()
    expected = int(np.prod(dims))
    if len(data) != expected:
        raise DatasetError(f"{path}: expected {expected} bytes of data, got {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(dims)


def _download(url: str, dest: Path) -> None:
    try:
        with urllib.request.urlopen(url, timeout=20) as resp:
            payload = resp.read()
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise DatasetError(
            f"could not download {url}: {exc}. Place the MNIST IDX files "
            f"({', '.join(_MNIST_FILES)}) in {dest.parent} and rerun, or use "
            f"--source digits for the bundled offline dataset.") from exc
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(payload)


def load_mnist_images(cache_dir: str | Path | None = None) -> tuple[np.ndarray, np.ndarray]:
    """MNIST train+test concatenated: (70000, 28, 28) in [0, 1], labels 0..9.

    Files are read from ``cache_dir`` (default ~/.cache/boxprob-exporter/
    mnist) and downloaded there first when missing.
    """
    cache = Path(cache_dir) if cache_dir is not None else DEFAULT_MNIST_CACHE
    paths = [cache / name for name in _MNIST_FILES]
    for path in paths:
        if not path.exists():
            _download(_MNIST_URL_BASE + path.name, path)
    train_images, train_labels, test_images, test_labels = (read_idx(p) for p in paths)
    for arr, nd, name in ((train_images, 3, "train images"),
                          (train_labels, 1, "train labels"),
                          (test_images, 3, "test images"),
                          (test_labels, 1, "test labels")):
        if arr.ndim != nd:
            raise DatasetError(f"{name}: expected {nd} dimensions, got {arr.ndim}")
    images = np.concatenate([train_images, test_images]).astype(np.float64) / 255.0
    labels = np.concatenate([train_labels, test_labels]).astype(np.int64)
    if images.shape[1:] != (28, 28):
        raise DatasetError(f"MNIST images must be 28x28, got {images.shape[1:]}")
    return images, labels


def overlap_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) weights for 1-D area-weighted resizing.

    Output cell i covers [i, i+1) * (n_in / n_out) in input units; its
    weight on input cell k is their overlap length normalized by the
    output cell width.
    """
    scale = n_in / n_out
    weights = np.zeros((n_out, n_in))
    for i in range(n_out):
        start, end = i * scale, (i + 1) * scale
        k_first, k_last = int(np.floor(start)), int(np.ceil(end))
        for k in range(k_first, min(k_last, n_in)):
            weights[i, k] = max(0.0, min(end, k + 1) - max(start, k))
    return weights / scale


def area_resize(images: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize (n, H, W) images to (n, out_h, out_w) by area-weighted means."""
    if images.ndim != 3:
        raise ValueError(f"expected (n, H, W) images, got shape {images.shape}")
    rows = overlap_matrix(images.shape[1], out_h)
    cols = overlap_matrix(images.shape[2], out_w)
    return np.einsum("ij,njk,lk->nil", rows, images, cols)


def seeded_split(n: int, seed: int, train_fraction: float = 0.9) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffle split: first 90% train, rest test."""
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(n * train_fraction)
    return order[:n_train], order[n_train:]
