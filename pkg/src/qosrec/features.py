"""Per-entity feature vectors: QFV1 files, the embedding endpoint, random stores.

QFV1 layout (little-endian throughout):

    magic "QFV1" | u32 version=1 | u8 kind (0=user, 1=service)
    | u32 entity_count | u32 dim
    | entity_count x (u32 id, dim x f32)

Records are written in ascending id order. Provenance (model name, pooling,
template hash) lives in a ``<path>.manifest.json`` sidecar.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .errors import EndpointError, FeatureFormatError
from .prompts import PromptText
from .rngs import SPLITMIX64_GAMMA, splitmix64_mix, splitmix64_stream, unit_uniform

MAGIC = b"QFV1"
VERSION = 1
_HEADER = struct.Struct("<4sIBII")

KIND_CODES = {"user": 0, "service": 1}
POOLING_MODES = ("first_token", "last_token", "random")


@dataclass(frozen=True)
class Provenance:
    model_name: str
    pooling: str
    template_hash: str


@dataclass
class FeatureStore:
    """Fixed-dimension float32 vectors keyed by entity id."""

    entity_kind: str
    dim: int
    vectors: dict[int, np.ndarray]
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        if self.entity_kind not in KIND_CODES:
            raise ValueError(f"unknown entity kind: {self.entity_kind!r}")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        normalized: dict[int, np.ndarray] = {}
        for entity_id, vec in self.vectors.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise FeatureFormatError(
                    f"vector for id {entity_id} has shape {arr.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise FeatureFormatError(f"non-finite entries in vector for id {entity_id}")
            normalized[int(entity_id)] = arr
        self.vectors = normalized

    def ids(self) -> list[int]:
        return sorted(self.vectors)

    def __len__(self) -> int:
        return len(self.vectors)

    def dense(self, n_entities: int) -> np.ndarray:
        """Vectors as a float64 (n_entities, dim) matrix indexed by id."""
        out = np.zeros((n_entities, self.dim), dtype=np.float64)
        for entity_id, vec in self.vectors.items():
            if entity_id >= n_entities:
                raise FeatureFormatError(
                    f"entity id {entity_id} out of range for {n_entities} entities"
                )
            out[entity_id] = vec.astype(np.float64)
        return out

    def covers(self, ids: Sequence[int] | np.ndarray) -> bool:
        return set(int(i) for i in np.unique(np.asarray(ids))) <= set(self.vectors)


def write_feature_file(store: FeatureStore, path: str | Path) -> None:
    path = Path(path)
    parts = [
        _HEADER.pack(MAGIC, VERSION, KIND_CODES[store.entity_kind], len(store), store.dim)
    ]
    for entity_id in store.ids():
        parts.append(struct.pack("<I", entity_id))
        parts.append(store.vectors[entity_id].astype("<f4").tobytes())
    path.write_bytes(b"".join(parts))
    if store.provenance is not None:
        sidecar = {
            "model_name": store.provenance.model_name,
            "pooling": store.provenance.pooling,
            "template_hash": store.provenance.template_hash,
            "entity_kind": store.entity_kind,
            "entity_count": len(store),
            "dim": store.dim,
        }
        Path(str(path) + ".manifest.json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def read_feature_file(path: str | Path) -> FeatureStore:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FeatureFormatError(f"{path}: truncated header")
    magic, version, kind_code, count, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFormatError(f"{path}: unsupported version {version}")
    kinds = {code: kind for kind, code in KIND_CODES.items()}
    if kind_code not in kinds:
        raise FeatureFormatError(f"{path}: unknown entity kind code {kind_code}")
    if dim <= 0:
        raise FeatureFormatError(f"{path}: non-positive dim {dim}")
    record_size = 4 + 4 * dim
    body = blob[_HEADER.size:]
    if len(body) != count * record_size:
        raise FeatureFormatError(
            f"{path}: body is {len(body)} bytes, expected {count * record_size}"
        )
    record_dtype = np.dtype([("id", "<u4"), ("vec", "<f4", (dim,))])
    records = np.frombuffer(body, dtype=record_dtype, count=count)
    ids = records["id"].astype(np.int64)
    if len(np.unique(ids)) != count:
        raise FeatureFormatError(f"{path}: duplicate entity ids")
    vectors = {int(i): records["vec"][pos].copy() for pos, i in enumerate(ids)}
    provenance = None
    sidecar_path = Path(str(path) + ".manifest.json")
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        provenance = Provenance(
            model_name=sidecar["model_name"],
            pooling=sidecar["pooling"],
            template_hash=sidecar["template_hash"],
        )
    return FeatureStore(
        entity_kind=kinds[kind_code], dim=dim, vectors=vectors, provenance=provenance
    )


_WIRE_POOLING = {"first_token": "first", "last_token": "last"}


def fetch_embeddings(
    endpoint: str,
    prompts: Sequence[PromptText],
    model_name: str,
    pooling: str,
    *,
    template_hash: str = "",
    batch_size: int = 64,
    timeout: float = 120.0,
    session: requests.Session | None = None,
) -> FeatureStore:
    """Embed prompts through ``POST {endpoint}/v1/embed``, one vector per prompt.

    All prompts must share one entity kind (a store holds a single kind).
    Batches are issued sequentially and reassembled in input order; a
    transport failure is retried once (the service is stateless).
    """
    if not prompts:
        raise ValueError("no prompts to embed")
    if pooling not in _WIRE_POOLING:
        raise ValueError(f"pooling must be first_token or last_token, got {pooling!r}")
    kinds = {p.entity_kind for p in prompts}
    if len(kinds) != 1:
        raise ValueError(f"prompts span multiple entity kinds: {sorted(kinds)}")
    own = session is None
    sess = session or requests.Session()
    url = endpoint.rstrip("/") + "/v1/embed"
    dim = -1
    vectors: dict[int, np.ndarray] = {}
    try:
        for start in range(0, len(prompts), batch_size):
            batch = prompts[start : start + batch_size]
            payload = {
                "model": model_name,
                "pooling": _WIRE_POOLING[pooling],
                "texts": [p.text for p in batch],
            }
            body = _post_with_retry(sess, url, payload, timeout)
            batch_dim = int(body.get("dim", -1))
            rows = body.get("vectors")
            if not isinstance(rows, list) or len(rows) != len(batch):
                raise EndpointError(
                    f"{url}: expected {len(batch)} vectors, got "
                    f"{len(rows) if isinstance(rows, list) else type(rows).__name__}"
                )
            if dim < 0:
                dim = batch_dim
            elif batch_dim != dim:
                raise EndpointError(f"{url}: dimension changed across batches ({dim} -> {batch_dim})")
            for prompt, row in zip(batch, rows):
                vec = np.asarray(row, dtype=np.float32)
                if vec.shape != (dim,):
                    raise EndpointError(
                        f"{url}: vector for {prompt.entity_kind} {prompt.entity_id} "
                        f"has length {vec.shape}, expected {dim}"
                    )
                if not np.all(np.isfinite(vec)):
                    raise EndpointError(
                        f"{url}: non-finite vector for {prompt.entity_kind} {prompt.entity_id}"
                    )
                vectors[prompt.entity_id] = vec
    finally:
        if own:
            sess.close()
    return FeatureStore(
        entity_kind=prompts[0].entity_kind,
        dim=dim,
        vectors=vectors,
        provenance=Provenance(
            model_name=model_name, pooling=pooling, template_hash=template_hash
        ),
    )


def _post_with_retry(
    sess: requests.Session, url: str, payload: dict, timeout: float
) -> dict:
    last_exc: Exception | None = None
    for _ in range(2):
        try:
            resp = sess.post(url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if resp.status_code != 200:
            raise EndpointError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise EndpointError(f"{url}: non-JSON response") from exc
    raise EndpointError(f"{url}: transport failure: {last_exc}") from last_exc


def random_features(
    entity_kind: str, ids: Sequence[int], dim: int, seed: int
) -> FeatureStore:
    """Deterministic pseudo-random vectors, i.i.d. uniform on [-0.5, 0.5).

    The vector for id i depends only on (seed, entity_kind, i, dim): its
    splitmix64 stream starts at ``mix(mix(seed + (kind_code + 1) * gamma) ^ i)``,
    so stores are independent of request order and recomputable per id.
    """
    if dim <= 0:
        raise ValueError("dim must be positive")
    kind_code = KIND_CODES[entity_kind]
    vectors: dict[int, np.ndarray] = {}
    for entity_id in ids:
        state = splitmix64_mix(seed + (kind_code + 1) * SPLITMIX64_GAMMA)
        state = splitmix64_mix(state ^ int(entity_id))
        entries = unit_uniform(splitmix64_stream(state, dim)) - 0.5
        vectors[int(entity_id)] = entries.astype(np.float32)
    return FeatureStore(
        entity_kind=entity_kind,
        dim=dim,
        vectors=vectors,
        provenance=Provenance(model_name=f"random-{seed}", pooling="random", template_hash=""),
    )


def check_finite_store(store: FeatureStore) -> None:
    for entity_id, vec in store.vectors.items():
        if not np.all(np.isfinite(vec)) or not math.isfinite(float(vec.sum())):
            raise FeatureFormatError(f"non-finite vector for id {entity_id}")
