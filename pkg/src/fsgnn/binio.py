"""Self-describing binary container for float64 matrices.

Layout, all integers little-endian:

    bytes 0..7    magic (8 ASCII bytes, identifies the container kind)
    bytes 8..15   header length ``H`` as uint64
    next H bytes  UTF-8 JSON header; its ``arrays`` key lists the shape of
                  every payload matrix in order
    payload       matrices as raw little-endian float64, C row-major order
    last 32 bytes SHA-256 checksum of everything before it

Round-trips are bit-exact and the format is language-neutral.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC_LEN = 8
_CHECKSUM_LEN = 32


class ContainerError(RuntimeError):
    """Unreadable or corrupt container file."""


def write_container(path, magic: bytes, header: dict, arrays) -> None:
    if len(magic) != MAGIC_LEN:
        raise ValueError(f"magic must be {MAGIC_LEN} bytes, got {magic!r}")
    header = dict(header)
    header["arrays"] = [{"shape": list(a.shape)} for a in arrays]
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    digest = hashlib.sha256()
    chunks = [magic, struct.pack("<Q", len(header_bytes)), header_bytes]
    chunks += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays]
    for chunk in chunks:
        digest.update(chunk)
    chunks.append(digest.digest())
    Path(path).write_bytes(b"".join(chunks))


def read_container(path, magic: bytes) -> tuple[dict, list[np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < MAGIC_LEN + 8 + _CHECKSUM_LEN:
        raise ContainerError(f"{path}: truncated file")
    if raw[:MAGIC_LEN] != magic:
        raise ContainerError(
            f"{path}: bad magic {raw[:MAGIC_LEN]!r}, expected {magic!r}"
        )
    body, checksum = raw[:-_CHECKSUM_LEN], raw[-_CHECKSUM_LEN:]
    if hashlib.sha256(body).digest() != checksum:
        raise ContainerError(f"{path}: checksum mismatch (corrupt file)")
    (header_len,) = struct.unpack("<Q", raw[MAGIC_LEN : MAGIC_LEN + 8])
    header_start = MAGIC_LEN + 8
    header_end = header_start + header_len
    if header_end > len(body):
        raise ContainerError(f"{path}: header overruns file")
    try:
        header = json.loads(body[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: unreadable header ({exc})") from exc
    arrays = []
    offset = header_end
    for spec in header.get("arrays", []):
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape)) * 8
        if offset + nbytes > len(body):
            raise ContainerError(f"{path}: payload shorter than header promises")
        arr = np.frombuffer(body, dtype="<f8", count=int(np.prod(shape)), offset=offset)
        arrays.append(arr.reshape(shape))
        offset += nbytes
    if offset != len(body):
        raise ContainerError(f"{path}: {len(body) - offset} trailing payload bytes")
    return header, arrays
