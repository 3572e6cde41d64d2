"""QFV1 feature-file writer and reader.

Layout, little-endian throughout:

    magic "QFV1" | u32 version=1 | u8 kind (0=user, 1=service)
    u32 count | u32 dim
    count records: u32 entity id | dim float32 values, ascending id order

Provenance (model name, pooling, template hash) goes in a JSON sidecar at
``<path>.manifest.json`` so the binary body stays fixed-width.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"QFV1"
VERSION = 1
KIND_CODES = {"user": 0, "service": 1}
CODE_KINDS = {v: k for k, v in KIND_CODES.items()}
_HEADER = struct.Struct("<4sIBII")
_ID = struct.Struct("<I")


def write_feature_file(
    entity_kind: str,
    vectors: dict[int, np.ndarray],
    path: str | Path,
    provenance: dict | None = None,
) -> None:
    """Write one kind's vectors; all rows must share one dimension."""
    if entity_kind not in KIND_CODES:
        raise FormatError(f"unknown entity kind {entity_kind!r}")
    if not vectors:
        raise FormatError("refusing to write an empty feature file")
    dims = {v.shape for v in vectors.values()}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise FormatError(f"vectors must share one 1-d shape, got {sorted(dims)}")
    dim = next(iter(dims))[0]
    path = Path(path)
    parts = [_HEADER.pack(MAGIC, VERSION, KIND_CODES[entity_kind], len(vectors), dim)]
    for entity_id in sorted(vectors):
        if entity_id < 0:
            raise FormatError(f"negative entity id {entity_id}")
        parts.append(_ID.pack(entity_id))
        parts.append(np.asarray(vectors[entity_id], dtype="<f4").tobytes())
    path.write_bytes(b"".join(parts))
    if provenance is not None:
        sidecar = dict(provenance)
        sidecar.update(entity_kind=entity_kind, entity_count=len(vectors), dim=int(dim))
        Path(str(path) + ".manifest.json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def read_feature_file(path: str | Path) -> tuple[str, dict[int, np.ndarray]]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, kind_code, count, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if kind_code not in CODE_KINDS:
        raise FormatError(f"{path}: unknown kind code {kind_code}")
    record = _ID.size + 4 * dim
    if len(blob) != _HEADER.size + count * record:
        raise FormatError(f"{path}: size mismatch for {count} records of dim {dim}")
    vectors: dict[int, np.ndarray] = {}
    last_id = -1
    for i in range(count):
        off = _HEADER.size + i * record
        (entity_id,) = _ID.unpack_from(blob, off)
        if entity_id <= last_id:
            raise FormatError(f"{path}: ids not strictly ascending at record {i}")
        last_id = entity_id
        vectors[entity_id] = np.frombuffer(
            blob, dtype="<f4", count=dim, offset=off + _ID.size
        ).copy()
    return CODE_KINDS[kind_code], vectors
