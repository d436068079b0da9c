"""``BLNZ`` checkpoint files.

Layout: ``b"BLNZ"``, u16 version, u32 spec length, UTF-8 JSON spec, then every
parameter array (weights, bias per layer, in layer order) as little-endian f64.
"""
import json
import struct

import numpy as np

from boltzlens.errors import FormatError
from boltzlens.nn.network import NetworkSpec, init_params

MAGIC = b"BLNZ"
VERSION = 1


def dumps(net):
    spec = json.dumps(net.spec.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(spec)), spec]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in net.arrays()]
    return b"".join(parts)


def loads(data, dtype=np.float64):
    if data[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < 10:
        raise FormatError("truncated checkpoint header")
    version, spec_len = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    off = 10
    try:
        spec = NetworkSpec.from_dict(json.loads(data[off:off + spec_len].decode()))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"unreadable network spec: {exc}") from exc
    off += spec_len
    net = init_params(spec, 0, dtype)
    for arr in net.arrays():
        nbytes = arr.size * 8
        if off + nbytes > len(data):
            raise FormatError("truncated checkpoint payload")
        arr[...] = np.frombuffer(data, dtype="<f8", count=arr.size, offset=off).reshape(arr.shape)
        off += nbytes
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after parameters")
    return net


def save(net, path):
    with open(path, "wb") as fh:
        fh.write(dumps(net))


def load(path, dtype=np.float64):
    with open(path, "rb") as fh:
        return loads(fh.read(), dtype)
