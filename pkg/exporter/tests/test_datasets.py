"""Dataset loading, IDX parsing, resizing, and the seeded split."""

import gzip
import struct

import numpy as np
import pytest
import urllib.error

from boxprob_exporter.datasets import (
    DatasetError,
    area_resize,
    load_digits_images,
    load_iris_table,
    load_mnist_images,
    overlap_matrix,
    read_idx,
    seeded_split,
)


def write_idx(path, array: np.ndarray) -> None:
    header = struct.pack(">BBBB", 0, 0, 0x08, array.ndim)
    dims = struct.pack(f">{array.ndim}I", *array.shape)
    payload = header + dims + array.astype(np.uint8).tobytes()
    if path.suffix == ".gz":
        path.write_bytes(gzip.compress(payload))
    else:
        path.write_bytes(payload)


@pytest.fixture
def fake_mnist_cache(tmp_path):
    """A cache directory holding tiny, structurally valid IDX files."""
    rng = np.random.default_rng(0)
    train = rng.integers(0, 256, size=(100, 28, 28), dtype=np.uint8)
    test = rng.integers(0, 256, size=(20, 28, 28), dtype=np.uint8)
    write_idx(tmp_path / "train-images-idx3-ubyte.gz", train)
    write_idx(tmp_path / "train-labels-idx1-ubyte.gz",
              rng.integers(0, 10, size=100, dtype=np.uint8))
    write_idx(tmp_path / "t10k-images-idx3-ubyte.gz", test)
    write_idx(tmp_path / "t10k-labels-idx1-ubyte.gz",
              rng.integers(0, 10, size=20, dtype=np.uint8))
    return tmp_path


class TestIdx:
    def test_round_trip(self, tmp_path):
        arr = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
        write_idx(tmp_path / "a.gz", arr)
        np.testing.assert_array_equal(read_idx(tmp_path / "a.gz"), arr)

    def test_uncompressed_round_trip(self, tmp_path):
        arr = np.arange(7, dtype=np.uint8)
        write_idx(tmp_path / "plain", arr)
        np.testing.assert_array_equal(read_idx(tmp_path / "plain"), arr)

    def test_bad_magic_rejected(self, tmp_path):
        (tmp_path / "bad.gz").write_bytes(gzip.compress(b"nope"))
        with pytest.raises(DatasetError, match="IDX"):
            read_idx(tmp_path / "bad.gz")

    def test_truncated_rejected(self, tmp_path):
        payload = struct.pack(">BBBB", 0, 0, 0x08, 1) + struct.pack(">I", 10) + b"abc"
        (tmp_path / "short.gz").write_bytes(gzip.compress(payload))
        with pytest.raises(DatasetError, match="bytes"):
            read_idx(tmp_path / "short.gz")


class TestMnistLoading:
    def test_loads_from_cache(self, fake_mnist_cache):
        images, labels = load_mnist_images(fake_mnist_cache)
        assert images.shape == (120, 28, 28)
        assert labels.shape == (120,)
        assert images.min() >= 0.0 and images.max() <= 1.0

    def test_download_failure_names_cache_dir(self, tmp_path, monkeypatch):
        def refuse(url, timeout=0):
            raise urllib.error.URLError("no route to host")

        monkeypatch.setattr("urllib.request.urlopen", refuse)
        with pytest.raises(DatasetError) as err:
            load_mnist_images(tmp_path / "cache")
        message = str(err.value)
        assert str(tmp_path / "cache") in message
        assert "--source digits" in message


class TestBundledDatasets:
    def test_digits_shape_and_range(self):
        images, labels = load_digits_images()
        assert images.shape == (1797, 8, 8)
        assert images.min() == 0.0 and images.max() == 1.0
        assert sorted(np.unique(labels)) == list(range(10))

    def test_iris_table(self):
        X, y, names = load_iris_table()
        assert X.shape == (150, 4)
        assert sorted(np.unique(y)) == [0, 1, 2]
        assert len(names) == 4


class TestResize:
    def test_overlap_rows_sum_to_one(self):
        for n_in, n_out in [(8, 3), (8, 5), (28, 10), (4, 4)]:
            w = overlap_matrix(n_in, n_out)
            np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)

    def test_constant_image_stays_constant(self):
        images = np.full((2, 8, 8), 0.7)
        out = area_resize(images, 5, 3)
        np.testing.assert_allclose(out, 0.7, atol=1e-12)

    def test_global_mean_preserved(self):
        rng = np.random.default_rng(1)
        images = rng.uniform(size=(4, 28, 28))
        out = area_resize(images, 5, 5)
        np.testing.assert_allclose(out.mean(axis=(1, 2)), images.mean(axis=(1, 2)),
                                   atol=1e-12)

    def test_identity_when_sizes_match(self):
        rng = np.random.default_rng(2)
        images = rng.uniform(size=(3, 8, 8))
        np.testing.assert_allclose(area_resize(images, 8, 8), images, atol=1e-12)

    def test_row_major_flatten_addresses_pixels(self):
        image = np.zeros((1, 8, 8))
        image[0, 2, 5] = 1.0  # bright pixel at row 2, col 5
        out = area_resize(image, 4, 4).reshape(1, 16)
        # (row 2, col 5) of an 8x8 maps to (row 1, col 2) of a 4x4
        assert out[0].argmax() == 1 * 4 + 2

    def test_range_preserved(self):
        rng = np.random.default_rng(3)
        images = rng.uniform(size=(5, 8, 8))
        out = area_resize(images, 3, 7)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestSplit:
    def test_sizes_and_coverage(self):
        train, test = seeded_split(150, seed=0)
        assert len(train) == 135 and len(test) == 15
        assert sorted(np.concatenate([train, test])) == list(range(150))

    def test_deterministic_per_seed(self):
        a1, b1 = seeded_split(1797, seed=5)
        a2, b2 = seeded_split(1797, seed=5)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(b1, b2)
        a3, _ = seeded_split(1797, seed=6)
        assert not np.array_equal(a1, a3)
