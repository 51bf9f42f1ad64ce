"""Binary snapshots and tabular outputs.

Snapshot layout (all integers little-endian)::

    magic      8 bytes   b"FNLSSNAP"
    version    uint16
    hdr_len    uint32
    hdr_crc    uint32    CRC32 of the header bytes
    header     hdr_len bytes of UTF-8 JSON
    data_crc   uint32    CRC32 of the payload
    payload    complex128 values, little-endian, C order

The whole file is validated before any object is constructed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
import zlib
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .basis import FourierGrid1D, SingleParticleBasis
from .dynamics import NLSField
from .errors import SnapshotError
from .state import ManyBodyState

MAGIC = b"FNLSSNAP"
VERSION = 1
_PREFIX = struct.Struct("<8sHII")
_CRC = struct.Struct("<I")
GAPS_COLUMNS = ("t", "N", "omega", "beta", "quantity", "value")


def _encode(kind: str, array: np.ndarray, meta: dict) -> bytes:
    data = np.ascontiguousarray(array, dtype="<c16")
    header = {
        "kind": kind,
        "shape": list(data.shape),
        "dtype": "<c16",
        "code_version": __version__,
        **meta,
    }
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = data.tobytes()
    return b"".join(
        (
            _PREFIX.pack(MAGIC, VERSION, len(hdr), zlib.crc32(hdr)),
            hdr,
            _CRC.pack(zlib.crc32(payload)),
            payload,
        )
    )


def _decode(blob: bytes):
    if len(blob) < _PREFIX.size:
        raise SnapshotError("file too short for a snapshot header")
    magic, version, hlen, hcrc = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}: not a snapshot file")
    if version != VERSION:
        raise SnapshotError(
            f"incompatible snapshot version {version}; this build reads version {VERSION}"
        )
    start = _PREFIX.size
    hdr = blob[start : start + hlen]
    if len(hdr) != hlen or zlib.crc32(hdr) != hcrc:
        raise SnapshotError("header checksum mismatch (corrupted or truncated header)")
    try:
        header = json.loads(hdr.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"unreadable header: {exc}") from None
    pos = start + hlen
    if len(blob) < pos + _CRC.size:
        raise SnapshotError("missing payload checksum")
    (dcrc,) = _CRC.unpack_from(blob, pos)
    payload = blob[pos + _CRC.size :]
    shape = tuple(int(s) for s in header.get("shape", ()))
    expected = 16 * int(np.prod(shape, dtype=np.int64))
    if header.get("dtype") != "<c16" or len(payload) != expected:
        raise SnapshotError(f"payload has {len(payload)} bytes, header implies {expected}")
    if zlib.crc32(payload) != dcrc:
        raise SnapshotError("payload checksum mismatch")
    arr = np.frombuffer(payload, dtype="<c16").reshape(shape).astype(complex)
    return header, arr


def _write_atomic(path: Path, blob: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def save_state(psi: ManyBodyState, path, meta: dict | None = None) -> Path:
    blob = _encode("ManyBodyState", psi.coeffs, {"basis": psi.basis.descriptor(), "meta": meta or {}})
    _write_atomic(Path(path), blob)
    return Path(path)


def save_field(field: NLSField, path, meta: dict | None = None) -> Path:
    blob = _encode(
        "NLSField",
        field.values,
        {
            "grid": {"box_length": field.grid.box_length, "points": field.grid.points},
            "c": field.c,
            "t": field.t,
            "meta": meta or {},
        },
    )
    _write_atomic(Path(path), blob)
    return Path(path)


def save_array(array: np.ndarray, path, meta: dict | None = None) -> Path:
    _write_atomic(Path(path), _encode("array", np.asarray(array), {"meta": meta or {}}))
    return Path(path)


def load_snapshot(path):
    """Load any snapshot; returns the reconstructed object and its header."""
    blob = Path(path).read_bytes()
    header, arr = _decode(blob)
    kind = header.get("kind")
    if kind == "ManyBodyState":
        try:
            basis = SingleParticleBasis.from_descriptor(header["basis"])
        except Exception as exc:  # descriptor validation errors vary by field
            raise SnapshotError(f"invalid basis descriptor: {exc}") from None
        return ManyBodyState(basis, arr), header
    if kind == "NLSField":
        g = header["grid"]
        grid = FourierGrid1D(float(g["box_length"]), int(g["points"]))
        return NLSField(grid, arr, float(header["c"]), float(header["t"])), header
    if kind == "array":
        return arr, header
    raise SnapshotError(f"unknown snapshot kind {kind!r}")


def load_state(path) -> ManyBodyState:
    obj, header = load_snapshot(path)
    if not isinstance(obj, ManyBodyState):
        raise SnapshotError(f"{path} holds a {header.get('kind')}, not a ManyBodyState")
    return obj


# --------------------------------------------------------------------------
# tabular outputs


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def write_jsonl(path, records: Iterable[dict], append: bool = False) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(_jsonable(r), sort_keys=True) + "\n")
            n += 1
    return n


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_gaps_csv(path, rows: Iterable[dict]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=GAPS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _jsonable(r[k]) for k in GAPS_COLUMNS})
            n += 1
    return n


def read_gaps_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for r in csv.DictReader(fh):
            out.append(
                {
                    "t": float(r["t"]),
                    "N": int(r["N"]),
                    "omega": float(r["omega"]),
                    "beta": float(r["beta"]),
                    "quantity": r["quantity"],
                    "value": float(r["value"]),
                }
            )
        return out


def provenance_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON of a config mapping plus the code version."""
    blob = json.dumps({"config": _jsonable(config), "code_version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
