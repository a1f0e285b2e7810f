"""Versioned flat container for parameters and fitted scorer state.

One format serves the classifier, the Mahalanobis model, and the gram-bound
tables. Layout (all integers little-endian):

    bytes 0..7    magic b"SSCPACK1"
    bytes 8..11   uint32 header length H
    bytes 12..    UTF-8 JSON header of H bytes:
                    {"format_version": 1,
                     "kind": "<payload kind>",
                     "meta": {...},
                     "arrays": [{"name": ..., "shape": [...], "dtype": ...}]}
    then          raw C-order array payloads, concatenated in header order

The header JSON is canonical (sorted keys, no whitespace), so writing the
same content twice produces byte-identical files.
"""

import json

import numpy as np

MAGIC = b"SSCPACK1"
FORMAT_VERSION = 1

_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class ContainerError(ValueError):
    """Raised for unreadable or malformed container files."""


def write_container(path, kind, meta, arrays):
    """Write `arrays` (name -> ndarray, float64 or int64) with metadata."""
    specs = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.float64:
            dt = "<f8"
        elif arr.dtype == np.int64:
            dt = "<i8"
        else:
            raise ContainerError(f"unsupported dtype {arr.dtype} for {name!r}")
        specs.append({"name": name, "shape": list(arr.shape), "dtype": dt})
        blobs.append(arr.astype(_DTYPES[dt], copy=False).tobytes(order="C"))
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "kind": kind, "meta": meta,
         "arrays": specs},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(len(header)).tobytes())
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path):
    """Read a container; returns (kind, meta, arrays dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ContainerError(f"{path}: not a shiftscope container (bad magic)")
    hlen = int(np.frombuffer(raw[8:12], dtype="<u4")[0])
    try:
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{path}: corrupt header ({exc})") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ContainerError(
            f"{path}: unsupported format_version {header.get('format_version')}")
    arrays = {}
    offset = 12 + hlen
    for spec in header["arrays"]:
        dt = _DTYPES.get(spec["dtype"])
        if dt is None:
            raise ContainerError(f"{path}: unknown dtype {spec['dtype']!r}")
        count = int(np.prod(spec["shape"], dtype=np.int64)) if spec["shape"] else 1
        nbytes = count * dt.itemsize
        chunk = raw[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise ContainerError(f"{path}: truncated payload for {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(chunk, dtype=dt).reshape(
            spec["shape"]).copy()
        offset += nbytes
    return header["kind"], header["meta"], arrays
