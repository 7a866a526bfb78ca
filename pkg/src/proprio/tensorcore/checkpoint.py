"""Binary parameter checkpoints.

Layout: magic ``PRB1``, u32 format version, u32 record count, then one
record per parameter tensor: u8 kind, u32 rank, u32 dims..., payload as
little-endian float64. Round trips are bit-exact for float64 parameters.
"""

import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"PRB1"
VERSION = 1


def save_params(params):
    """Serialize a parameter list to bytes."""
    buf = bytearray(MAGIC)
    buf += struct.pack("<II", VERSION, len(params))
    for p in params:
        v = np.ascontiguousarray(p.value, dtype="<f8")
        buf += struct.pack("<BI", p.kind, v.ndim)
        if v.ndim:
            buf += struct.pack(f"<{v.ndim}I", *v.shape)
        buf += v.tobytes()
    return bytes(buf)


def load_params(params, data):
    """Load serialized values into ``params`` in place.

    All records are parsed and validated against the receiving parameters
    before any value is assigned, so a mismatch never leaves the model
    partially mutated.
    """
    params = list(params)
    if len(data) < 12:
        raise CheckpointError("checkpoint truncated: header incomplete")
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if count != len(params):
        raise CheckpointError(f"checkpoint has {count} records, model has {len(params)} parameters")

    offset = 12
    staged = []
    for p in params:
        if offset + 5 > len(data):
            raise CheckpointError(f"checkpoint truncated in record header for {p.name}")
        kind, rank = struct.unpack_from("<BI", data, offset)
        offset += 5
        if kind != p.kind:
            raise CheckpointError(f"record kind {kind} does not match parameter {p.name} (kind {p.kind})")
        if offset + 4 * rank > len(data):
            raise CheckpointError(f"checkpoint truncated in shape of {p.name}")
        shape = struct.unpack_from(f"<{rank}I", data, offset) if rank else ()
        offset += 4 * rank
        if tuple(shape) != p.value.shape:
            raise CheckpointError(
                f"shape mismatch for {p.name}: checkpoint {tuple(shape)} vs model {p.value.shape}"
            )
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if rank else 8
        if offset + nbytes > len(data):
            raise CheckpointError(f"checkpoint truncated in payload of {p.name}")
        values = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=offset).reshape(shape)
        offset += nbytes
        staged.append(values)
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after last record")

    for p, values in zip(params, staged):
        p.value[...] = values.astype(p.value.dtype)
