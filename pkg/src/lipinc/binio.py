"""Shared binary container: magic, u32 version, u32 header length, JSON
header with an array directory, then a little-endian float32 payload."""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .errors import CorruptError, IOFailure, VersionError

_PREFIX = struct.Struct("<4sII")


def write_container(path, magic: bytes, version: int, header: dict, arrays) -> None:
    """Write ``arrays`` (ordered (name, ndarray) pairs) after a JSON header.

    Arrays are stored as little-endian float32; their directory (name, shape,
    byte offset) is embedded in the header under "arrays".
    """
    directory = []
    blobs = []
    offset = 0
    for name, arr in arrays:
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    doc = dict(header)
    doc["arrays"] = directory
    header_bytes = json.dumps(doc, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(_PREFIX.pack(magic, version, len(header_bytes)))
            fh.write(header_bytes)
            for blob in blobs:
                fh.write(blob)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def read_container(path, magic: bytes, version: int):
    """Read a container written by write_container; returns (header, arrays).

    Arrays come back as float32 in directory order. Raises VersionError for a
    version mismatch, CorruptError for structural damage, IOFailure for OS
    errors.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < _PREFIX.size:
        raise CorruptError(f"{path}: shorter than the fixed prefix")
    got_magic, got_version, header_len = _PREFIX.unpack_from(raw)
    if got_magic != magic:
        raise CorruptError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if got_version != version:
        raise VersionError(f"{path}: format version {got_version}, expected {version}")
    header_end = _PREFIX.size + header_len
    if len(raw) < header_end:
        raise CorruptError(f"{path}: truncated header")
    try:
        header = json.loads(raw[_PREFIX.size:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptError(f"{path}: undecodable header: {exc}") from exc
    directory = header.get("arrays")
    if not isinstance(directory, list):
        raise CorruptError(f"{path}: header lacks the array directory")

    payload = raw[header_end:]
    arrays = {}
    for entry in directory:
        try:
            name, shape, offset = entry["name"], entry["shape"], entry["offset"]
        except (TypeError, KeyError) as exc:
            raise CorruptError(f"{path}: malformed array directory entry") from exc
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(payload):
            raise CorruptError(f"{path}: array {name!r} extends past end of file")
        arrays[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).copy()
    return header, arrays
