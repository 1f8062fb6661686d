"""BFLD1 field containers and 8-bit image dumps.

Layout: magic ``b"BFLD1\\n"``, little-endian u32 ``N``, f64 ``L``, u8 flag
(0 = real data stored as complex, 1 = complex), then ``N*N`` complex
samples as interleaved little-endian f64 pairs in row-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import Field, TorusGrid

__all__ = ["MAGIC", "write_bfld", "read_bfld", "encode_bfld", "decode_bfld", "write_pgm", "write_png"]

MAGIC = b"BFLD1\n"
_HEADER = struct.Struct("<IdB")


def encode_bfld(f: Field) -> bytes:
    vals = np.ascontiguousarray(f.samples, dtype="<c16")
    flag = 0 if not np.any(vals.imag) else 1
    return MAGIC + _HEADER.pack(f.grid.N, f.grid.L, flag) + vals.tobytes()


def decode_bfld(data: bytes) -> Field:
    if not data.startswith(MAGIC):
        raise ValueError("not a BFLD1 container")
    off = len(MAGIC)
    if len(data) < off + _HEADER.size:
        raise ValueError("truncated BFLD1 header")
    N, L, flag = _HEADER.unpack_from(data, off)
    if flag not in (0, 1):
        raise ValueError(f"bad BFLD1 flag {flag}")
    off += _HEADER.size
    need = 16 * N * N
    if len(data) - off != need:
        raise ValueError(f"BFLD1 payload is {len(data) - off} bytes, expected {need}")
    vals = np.frombuffer(data, dtype="<c16", count=N * N, offset=off).reshape(N, N)
    return Field(TorusGrid(N, L), vals)


def write_bfld(path, f: Field) -> None:
    Path(path).write_bytes(encode_bfld(f))


def read_bfld(path) -> Field:
    return decode_bfld(Path(path).read_bytes())


def _gray(f: Field, vmin=None, vmax=None):
    mag = np.abs(f.samples)
    lo = float(mag.min()) if vmin is None else float(vmin)
    hi = float(mag.max()) if vmax is None else float(vmax)
    span = hi - lo if hi > lo else 1.0
    img = np.clip(np.round(255.0 * (mag - lo) / span), 0, 255).astype(np.uint8)
    # axis 1 (x2) runs upward in the picture
    return img.T[::-1], {"min": lo, "max": hi, "quantity": "abs", "levels": 256}


def _sidecar(path, meta):
    Path(str(path) + ".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def write_pgm(path, f: Field, vmin=None, vmax=None) -> dict:
    """Binary PGM of ``|f|`` plus a ``.json`` sidecar holding the gray mapping."""
    img, meta = _gray(f, vmin, vmax)
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())
    _sidecar(path, meta)
    return meta


def write_png(path, f: Field, vmin=None, vmax=None) -> dict:
    try:
        from PIL import Image
    except ImportError as exc:  # optional dependency
        raise RuntimeError("PNG output needs Pillow (pip install qcreg[png])") from exc
    img, meta = _gray(f, vmin, vmax)
    Image.fromarray(img, mode="L").save(path, format="PNG")
    _sidecar(path, meta)
    return meta
