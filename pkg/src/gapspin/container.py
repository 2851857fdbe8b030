"""Versioned array container used for ``basis.bin`` and ``sys.bin``.

Layout::

    gapspin-container v1\\n
    {JSON header}\\n
    payload

The header lists the arrays (name, dtype, shape) in payload order, free-form
metadata, the payload encoding and the SHA-256 of the payload bytes.

* ``binary``: arrays back to back as little-endian raw bytes.
* ``ascii``: one value per line, floats written with ``repr`` (shortest
  string that round-trips exactly), integers in decimal.

Both encodings reproduce every array bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import IntegrityError

MAGIC = b"gapspin-container v1\n"
ENCODINGS = ("binary", "ascii")
_DTYPES = {"float64": "<f8", "int64": "<i8"}


def _normalise(arr):
    arr = np.asarray(arr)
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        return np.ascontiguousarray(arr, dtype="<i8"), "int64"
    return np.ascontiguousarray(arr, dtype="<f8"), "float64"


def _encode_ascii(arr, kind):
    if kind == "int64":
        return "".join(f"{int(v)}\n" for v in arr.ravel()).encode()
    return "".join(f"{float(v)!r}\n" for v in arr.ravel()).encode()


def dumps(arrays: dict, meta: dict | None = None, kind="", encoding="binary") -> bytes:
    if encoding not in ENCODINGS:
        raise ValueError(f"encoding must be one of {ENCODINGS}")
    entries, chunks = [], []
    for name, value in arrays.items():
        arr, dtype = _normalise(value)
        entries.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        chunks.append(arr.tobytes() if encoding == "binary" else _encode_ascii(arr, dtype))
    payload = b"".join(chunks)
    header = {"kind": kind, "encoding": encoding, "arrays": entries, "meta": meta or {},
              "sha256": hashlib.sha256(payload).hexdigest()}
    return MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + payload


def loads(data: bytes, kind=None):
    """Return ``(arrays, meta)``; raises IntegrityError on any inconsistency."""
    if not data.startswith(MAGIC):
        raise IntegrityError("not a gapspin container (bad magic line)")
    rest = data[len(MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise IntegrityError("truncated container header")
    try:
        header = json.loads(rest[:nl])
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"corrupt container header: {exc}") from None
    payload = rest[nl + 1:]
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise IntegrityError("checksum mismatch: container payload was modified or truncated")
    if kind is not None and header.get("kind") != kind:
        raise IntegrityError(f"expected a {kind!r} container, found {header.get('kind')!r}")
    arrays = {}
    if header["encoding"] == "binary":
        offset = 0
        for e in header["arrays"]:
            dt = np.dtype(_DTYPES[e["dtype"]])
            count = int(np.prod(e["shape"], dtype=np.int64))
            arr = np.frombuffer(payload, dtype=dt, count=count, offset=offset)
            arrays[e["name"]] = arr.reshape(e["shape"]).copy()
            offset += count * dt.itemsize
        if offset != len(payload):
            raise IntegrityError("payload size does not match the declared arrays")
    else:
        lines = payload.decode().splitlines()
        pos = 0
        for e in header["arrays"]:
            count = int(np.prod(e["shape"], dtype=np.int64))
            chunk = lines[pos: pos + count]
            if len(chunk) != count:
                raise IntegrityError("payload size does not match the declared arrays")
            conv = int if e["dtype"] == "int64" else float
            arrays[e["name"]] = np.array([conv(v) for v in chunk],
                                         dtype=_DTYPES[e["dtype"]]).reshape(e["shape"])
            pos += count
        if pos != len(lines):
            raise IntegrityError("payload size does not match the declared arrays")
    return arrays, header["meta"]


def save(path, arrays, meta=None, kind="", encoding="binary"):
    Path(path).write_bytes(dumps(arrays, meta, kind, encoding))


def load(path, kind=None):
    return loads(Path(path).read_bytes(), kind)
