"""Flat named-tensor container: JSON header + little-endian payloads.

Layout: 4-byte magic, uint32 little-endian header length, UTF-8 JSON header,
then the raw tensor payloads back to back. The header carries a mandatory
``version`` field, optional ``meta`` dict, and per-tensor name/dtype/shape/
offset entries. Used for model checkpoints, raw-tensor datasets, and stored
prediction matrices.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"PTC1"
VERSION = 1


class ContainerError(ValueError):
    """Malformed container file."""


def save_tensors(path, tensors: dict, meta: dict | None = None) -> None:
    entries = []
    payloads = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        payload = arr.astype(dtype, copy=False).tobytes()
        entries.append(
            {
                "name": str(name),
                "dtype": dtype.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(payload),
            }
        )
        payloads.append(payload)
        offset += len(payload)
    header = {"version": VERSION, "meta": meta or {}, "tensors": entries}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for payload in payloads:
            fh.write(payload)


def load_tensors(path):
    """Load a container; returns ``(tensors, meta)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise ContainerError(f"{path}: not a tensor container (bad magic)")
    (header_len,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + header_len:
        raise ContainerError(f"{path}: truncated header at byte {len(raw)}")
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ContainerError(f"{path}: unreadable header: {err}") from None
    if header.get("version") != VERSION:
        raise ContainerError(f"{path}: unsupported container version {header.get('version')!r}")
    base = 8 + header_len
    tensors = {}
    for entry in header["tensors"]:
        start = base + entry["offset"]
        stop = start + entry["nbytes"]
        if stop > len(raw):
            raise ContainerError(f"{path}: truncated payload for {entry['name']!r} at byte {len(raw)}")
        arr = np.frombuffer(raw[start:stop], dtype=np.dtype(entry["dtype"]))
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return tensors, header.get("meta", {})
