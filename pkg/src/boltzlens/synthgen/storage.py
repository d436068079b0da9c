"""``BLDS`` dataset files and their plain-text manifest sidecar.

File layout: ``b"BLDS"``, u16 version, u32 count, then per sample a u8 label,
u64 seed and 1024 little-endian f32 pixels. Train samples precede test
samples; the manifest records where the split falls.
"""
import hashlib
import struct

import numpy as np

from boltzlens.errors import DatasetError, FormatError
from boltzlens.synthgen.generator import GRID, N_CLASSES, N_PIXELS, SyntheticDataset

MAGIC = b"BLDS"
VERSION = 1
_RECORD = np.dtype([("label", "u1"), ("seed", "<u8"), ("pixels", "<f4", (N_PIXELS,))])


def manifest_path(path):
    return f"{path}.manifest"


def file_checksum(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dumps(ds):
    order = np.concatenate([np.flatnonzero(ds.splits == "train"),
                            np.flatnonzero(ds.splits == "test")])
    rec = np.empty(order.size, dtype=_RECORD)
    rec["label"] = ds.labels[order]
    rec["seed"] = ds.seeds[order]
    rec["pixels"] = ds.images[order].reshape(-1, N_PIXELS)
    return MAGIC + struct.pack("<HI", VERSION, order.size) + rec.tobytes()


def loads(data, n_train=None):
    if data[:4] != MAGIC:
        raise FormatError(f"bad dataset magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 10:
        raise FormatError("truncated dataset header")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    if len(data) != 10 + count * _RECORD.itemsize:
        raise FormatError(f"payload size {len(data) - 10} does not match {count} samples")
    rec = np.frombuffer(data, dtype=_RECORD, count=count, offset=10)
    n_train = count if n_train is None else n_train
    splits = np.where(np.arange(count) < n_train, "train", "test")
    return SyntheticDataset(
        rec["pixels"].reshape(count, GRID, GRID).astype(np.float64),
        rec["label"].astype(np.int64), rec["seed"].copy(), splits,
    )


def _manifest_text(ds, sources=()):
    lines = [
        "format = BLDS",
        f"version = {VERSION}",
        f"master_seed = {ds.master_seed}",
        f"count = {len(ds)}",
        f"train_count = {int((ds.splits == 'train').sum())}",
        f"test_count = {int((ds.splits == 'test').sum())}",
    ]
    for split in ("train", "test"):
        counts = ds.class_counts(split)
        lines.append(f"{split}_class_counts = " + ",".join(f"{c}:{counts[c]}" for c in range(N_CLASSES)))
    for key in sorted(ds.meta):
        lines.append(f"{key} = {ds.meta[key]}")
    for src in sources:
        lines.append(f"source_sha256 = {file_checksum(src)} {src}")
    return "\n".join(lines) + "\n"


def save_dataset(ds, path, sources=()):
    """Write the dataset file and its manifest; ``sources`` are checksummed into it."""
    with open(path, "wb") as fh:
        fh.write(dumps(ds))
    with open(manifest_path(path), "w") as fh:
        fh.write(_manifest_text(ds, sources))


def read_manifest(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out.setdefault(k.strip(), v.strip())
    return out


def load_dataset(path):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        manifest = read_manifest(manifest_path(path))
    except FileNotFoundError:
        raise DatasetError(f"missing manifest {manifest_path(path)}") from None
    ds = loads(data, int(manifest["train_count"]))
    ds.master_seed = int(manifest.get("master_seed", 0))
    ds.meta = {k: v for k, v in manifest.items()
               if k in ("per_class_train", "per_class_test", "labels", "label_seed")}
    return ds
