"""Binary field snapshots.

Layout (little endian): magic "HSTO", format version u32, then N1 N2 Nz and
the field count as u32, then per field a 16-byte ASCII name (NUL padded) and
the float64 payload written row-major with the vertical index slowest.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HSTO"
VERSION = 1
NAME_BYTES = 16


def write_snapshot(path, grid, fields: dict):
    """Write named 3D fields; names must be ASCII and at most 16 bytes."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIII", VERSION, grid.n1, grid.n2, grid.nz,
                             len(fields)))
        for name, arr in fields.items():
            raw = name.encode("ascii")
            if len(raw) > NAME_BYTES:
                raise ValueError(f"field name {name!r} exceeds 16 bytes")
            if arr.shape != grid.shape:
                raise ValueError(f"field {name!r} shape {arr.shape} does not "
                                 f"match grid {grid.shape}")
            fh.write(raw.ljust(NAME_BYTES, b"\x00"))
            data = np.ascontiguousarray(arr.transpose(2, 1, 0),
                                        dtype="<f8")
            fh.write(data.tobytes())


def read_snapshot(path):
    """Return (n1, n2, nz, {name: array(i, j, k)})."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not a snapshot file (bad magic)")
        version, n1, n2, nz, count = struct.unpack("<IIIII", fh.read(20))
        if version != VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        fields = {}
        n_vals = n1 * n2 * nz
        for _ in range(count):
            name = fh.read(NAME_BYTES).rstrip(b"\x00").decode("ascii")
            raw = fh.read(8 * n_vals)
            arr = np.frombuffer(raw, dtype="<f8").reshape(nz, n2, n1)
            fields[name] = np.ascontiguousarray(arr.transpose(2, 1, 0))
    return n1, n2, nz, fields
