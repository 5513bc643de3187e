"""Versioned little-endian binary container for named arrays.

Layout::

    magic    8 bytes  (per file kind)
    version  uint32 LE
    hlen     uint32 LE
    header   hlen bytes of UTF-8 JSON: {"meta": {...}, "manifest": [...]}
    payload  arrays in manifest order, little-endian IEEE-754, row-major
    crc32    uint32 LE over everything above

Each manifest entry is ``{"name", "shape", "dtype", ...extra}``; extra keys
(e.g. ``frozen``) are passed through untouched.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import ContainerError

VERSION = 1
_LE = {"f8": "<f8", "f4": "<f4", "c16": "<c16", "i8": "<i8", "u1": "|u1"}


def _tag(dtype: np.dtype) -> str:
    dtype = np.dtype(dtype)
    for tag, code in _LE.items():
        if np.dtype(code) == dtype.newbyteorder("<") or np.dtype(code) == dtype:
            return tag
    raise ContainerError(f"unsupported dtype {dtype}")


def write_container(path, magic: bytes, meta: dict, entries: list[tuple[dict, np.ndarray]]) -> None:
    if len(magic) != 8:
        raise ValueError("magic must be 8 bytes")
    manifest = []
    payload = []
    for info, arr in entries:
        arr = np.asarray(arr)
        tag = _tag(arr.dtype)
        manifest.append({**info, "shape": list(arr.shape), "dtype": tag})
        payload.append(np.ascontiguousarray(arr, dtype=_LE[tag]).tobytes())
    header = json.dumps({"meta": meta, "manifest": manifest}, sort_keys=True).encode("utf-8")
    blob = magic + struct.pack("<II", VERSION, len(header)) + header + b"".join(payload)
    Path(path).write_bytes(blob + struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF))


def read_container(path, magic: bytes) -> tuple[dict, list[tuple[dict, np.ndarray]]]:
    blob = Path(path).read_bytes()
    if len(blob) < 20:
        raise ContainerError(f"{path}: truncated file")
    if blob[:8] != magic:
        raise ContainerError(f"{path}: bad magic {blob[:8]!r}")
    (crc,) = struct.unpack("<I", blob[-4:])
    version, hlen = struct.unpack("<II", blob[8:16])
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    if 16 + hlen > len(blob) - 4:
        raise ContainerError(f"{path}: truncated header")
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != crc:
        raise ContainerError(f"{path}: checksum mismatch")
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    pos = 16 + hlen
    entries = []
    for info in header["manifest"]:
        dt = np.dtype(_LE[info["dtype"]])
        count = int(np.prod(info["shape"], dtype=np.int64))
        nbytes = count * dt.itemsize
        if pos + nbytes > len(blob) - 4:
            raise ContainerError(f"{path}: truncated payload at {info['name']}")
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=pos).reshape(info["shape"])
        entries.append((info, arr.astype(dt.newbyteorder("="))))
        pos += nbytes
    if pos != len(blob) - 4:
        raise ContainerError(f"{path}: {len(blob) - 4 - pos} trailing bytes")
    return header["meta"], entries
