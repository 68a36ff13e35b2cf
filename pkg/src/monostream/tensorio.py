"""TNSR tensor files: ``b"TNSR"``, u32 rank, u32 dims[rank], f32 payload.

All integers and floats are little-endian, payload is row-major.
"""
import struct

import numpy as np

from monostream.errors import TensorFormatError

MAGIC = b"TNSR"


def write_tensor(path, array):
    arr = np.asarray(array, dtype="<f4", order="C")
    header = MAGIC + struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_tensor(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise TensorFormatError(f"{path}: truncated header")
    (rank,) = struct.unpack_from("<I", data, 4)
    offset = 8 + 4 * rank
    if len(data) < offset:
        raise TensorFormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    if len(data) - offset != 4 * count:
        raise TensorFormatError(
            f"{path}: payload has {len(data) - offset} bytes, expected {4 * count}"
        )
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
    return arr.reshape(dims).astype(np.float32)
