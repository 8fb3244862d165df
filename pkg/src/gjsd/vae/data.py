"""Dataset plumbing: binary container IO, IDX conversion, desk datasets.

Container format (little-endian): magic "GJSD", u32 row count, u32 row dim,
then count*dim float32 values in [0,1], row-major. Small on purpose: the desk
experiments need nothing beyond "a matrix of pixels in [0,1]".

Two generators need no downloads: a 2-D noisy ring, and an 8x8 digits set
built from scikit-learn's bundled images, augmented with one-pixel shifts and
split so every variant of a source image stays on one side of the
train/test boundary.
"""

import os
import pathlib
import struct

import numpy as np

from ..errors import InputError

_MAGIC = b"GJSD"
_TRAIN_NAME = "train.gjsd"
_TEST_NAME = "test.gjsd"


def data_dir():
    """Dataset directory: $GJS_DATA_DIR, else ~/.cache/gjsd."""
    env = os.environ.get("GJS_DATA_DIR")
    if env:
        return pathlib.Path(env)
    return pathlib.Path.home() / ".cache" / "gjsd"


def _check_rows(rows):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.size == 0:
        raise InputError(f"expected a nonempty 2-D matrix, got shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise InputError("rows contain non-finite values")
    if rows.min() < 0.0 or rows.max() > 1.0:
        raise InputError(
            f"rows must lie in [0,1], got range [{rows.min():.6g}, {rows.max():.6g}]"
        )
    return rows


def write_container(path, rows):
    """Write a row matrix to the binary container format.

    Args:
        path: output file path.
        rows: (count, dim) matrix with values in [0,1]; stored as float32.
    """
    rows = _check_rows(rows)
    count, dim = rows.shape
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", count, dim))
        fh.write(rows.astype("<f4").tobytes())


def read_container(path):
    """Read a container file back to a float64 (count, dim) matrix.

    Validates the magic, the declared sizes against the payload length, and
    the [0,1] value range.
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise InputError(f"dataset file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise InputError(f"{path} is not a GJSD container (bad magic)")
    count, dim = struct.unpack("<II", blob[4:12])
    expected = 12 + 4 * count * dim
    if len(blob) != expected:
        raise InputError(
            f"{path} declares {count}x{dim} rows but holds {len(blob) - 12} "
            f"payload bytes (expected {expected - 12})"
        )
    if count == 0 or dim == 0:
        raise InputError(f"{path} declares an empty matrix ({count}x{dim})")
    rows = np.frombuffer(blob, dtype="<f4", offset=12).astype(np.float64)
    rows = rows.reshape(count, dim)
    if not np.all(np.isfinite(rows)) or rows.min() < 0.0 or rows.max() > 1.0:
        raise InputError(f"{path} holds values outside [0,1]")
    return rows


def convert_idx(idx_path, out_path):
    """Convert an IDX unsigned-byte image file to the container format.

    Accepts 3-D IDX (count, height, width) or 2-D (count, dim); pixel bytes
    are scaled by 1/255.

    Returns:
        (count, dim) of the written container.
    """
    idx_path = pathlib.Path(idx_path)
    if not idx_path.is_file():
        raise InputError(f"IDX file not found: {idx_path}")
    blob = idx_path.read_bytes()
    if len(blob) < 4 or blob[0] != 0 or blob[1] != 0:
        raise InputError(f"{idx_path} is not an IDX file (bad magic)")
    dtype_code, ndim = blob[2], blob[3]
    if dtype_code != 0x08:
        raise InputError(f"only unsigned-byte IDX supported, got type 0x{dtype_code:02x}")
    if ndim not in (2, 3):
        raise InputError(f"expected 2-D or 3-D IDX data, got {ndim}-D")
    header_end = 4 + 4 * ndim
    if len(blob) < header_end:
        raise InputError(f"{idx_path} truncated inside the dimension header")
    dims = struct.unpack(f">{ndim}I", blob[4:header_end])
    n_values = int(np.prod(dims))
    if len(blob) != header_end + n_values:
        raise InputError(
            f"{idx_path} declares {dims} but holds {len(blob) - header_end} data bytes"
        )
    raw = np.frombuffer(blob, dtype=np.uint8, offset=header_end)
    rows = raw.reshape(dims[0], -1).astype(np.float64) / 255.0
    write_container(out_path, rows)
    return rows.shape


def make_ring(n, seed, noise=0.05):
    """Noisy 2-D ring in [0,1]^2: radius 1 + noise * N(0,1), uniform angle.

    Args:
        n: number of points.
        seed: RNG seed.
        noise: radial noise scale.

    Returns:
        (n, 2) matrix.
    """
    if int(n) <= 0:
        raise InputError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=int(n))
    r = 1.0 + noise * rng.standard_normal(int(n))
    pts = 0.5 + 0.3 * r[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    return np.clip(pts, 0.0, 1.0)


def _shift_variants(images):
    """Original plus one-pixel shifts in the four directions, zero-filled.

    Args:
        images: (n, h, w) stack.

    Returns:
        (n, 5, h*w) stack; variant axis order: original, up, down, left, right.
    """
    n, h, w = images.shape
    out = np.zeros((n, 5, h, w))
    out[:, 0] = images
    out[:, 1, : h - 1, :] = images[:, 1:, :]
    out[:, 2, 1:, :] = images[:, : h - 1, :]
    out[:, 3, :, : w - 1] = images[:, :, 1:]
    out[:, 4, :, 1:] = images[:, :, : w - 1]
    return out.reshape(n, 5, h * w)


def build_digits_desk(out_dir=None, seed=0, n_train=4096, n_test=1024):
    """Build the desk 8x8 digits dataset: train.gjsd and test.gjsd.

    Sources are scikit-learn's bundled digits (1797 images, values 0..16).
    Each source yields 5 variants (original + 4 one-pixel shifts); the split
    is by source image, so no variant of a training digit leaks into test.

    Args:
        out_dir: target directory (default data_dir()).
        seed: shuffle seed for the source split.
        n_train: training rows (truncated from whole sources).
        n_test: test rows.

    Returns:
        (train_path, test_path) as pathlib.Path.
    """
    from sklearn.datasets import load_digits

    out_dir = pathlib.Path(out_dir) if out_dir is not None else data_dir()
    images = load_digits().images / 16.0
    variants = _shift_variants(images)
    n_sources = variants.shape[0]
    per = variants.shape[1]
    need_train = -(-int(n_train) // per)
    need_test = -(-int(n_test) // per)
    if need_train + need_test > n_sources:
        raise InputError(
            f"requested {n_train}+{n_test} rows need {need_train + need_test} "
            f"sources, only {n_sources} available"
        )
    order = np.random.default_rng(seed).permutation(n_sources)
    train_rows = variants[order[:need_train]].reshape(-1, variants.shape[2])[: int(n_train)]
    test_rows = variants[order[need_train : need_train + need_test]]
    test_rows = test_rows.reshape(-1, variants.shape[2])[: int(n_test)]
    train_path = out_dir / _TRAIN_NAME
    test_path = out_dir / _TEST_NAME
    write_container(train_path, train_rows)
    write_container(test_path, test_rows)
    return train_path, test_path


def load_split(dataset_dir):
    """Load (train, test) matrices from a directory of container files."""
    dataset_dir = pathlib.Path(dataset_dir)
    return read_container(dataset_dir / _TRAIN_NAME), read_container(dataset_dir / _TEST_NAME)
