"""Reader/writer for IDX image/label file pairs (the MNIST wire format)."""
import gzip
import struct
from dataclasses import dataclass

import numpy as np

from boltzlens.errors import FormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class SourceImage:
    pixels: np.ndarray  # (H, W) uint8 grayscale
    label: int
    id: str


def _read(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse(data, magic, ndim, path):
    header = 4 + 4 * ndim
    if len(data) < 4:
        raise FormatError(f"{path}: truncated header")
    (got,) = struct.unpack(">I", data[:4])
    if got != magic:
        raise FormatError(f"{path}: bad magic 0x{got:08X}, expected 0x{magic:08X}")
    if len(data) < header:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, data[4:header])
    size = int(np.prod(dims))
    if len(data) - header < size:
        raise FormatError(f"{path}: truncated payload, need {size} bytes, have {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header).reshape(dims)


def read_idx_images(path):
    return _parse(_read(path), IMAGE_MAGIC, 3, path)


def read_idx_labels(path):
    return _parse(_read(path), LABEL_MAGIC, 1, path)


def load_idx(images_path, labels_path):
    """Pair an IDX image file with its label file."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"count mismatch: {images.shape[0]} images but {labels.shape[0]} labels"
        )
    stem = str(images_path).rsplit("/", 1)[-1]
    return [SourceImage(images[i].copy(), int(labels[i]), f"{stem}:{i}")
            for i in range(images.shape[0])]


def write_idx(images, labels, images_path, labels_path):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ValueError("images must be (N, H, W) with N matching labels")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())
