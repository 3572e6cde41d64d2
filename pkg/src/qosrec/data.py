"""WSDream entity tables, QoS matrices, and density-based train/test splits.

File formats handled here:

* entity tables -- tab-separated, one header line, 7 columns (users) or
  9 columns (services), IDs in column 1;
* QoS matrices -- whitespace-separated dense rows, one row per user,
  sentinel -1 (any negative value) marking unobserved cells;
* split files -- ``train.tsv``/``test.tsv`` with ``user<TAB>service<TAB>value``
  lines plus a ``split.json`` sidecar (density, seed, observed count,
  sha256 checksum of the two TSV payloads).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import IntegrityError, ParseError
from .rngs import permutation

MISSING_SENTINEL = -1.0

MATRIX_KINDS = ("throughput", "response_time")

USER_COLUMNS = 7
SERVICE_COLUMNS = 9


@dataclass(frozen=True)
class UserRecord:
    user_id: int
    ip_address: str
    country: str
    ip_number: str
    autonomous_system: str
    latitude: float
    longitude: float


@dataclass(frozen=True)
class ServiceRecord:
    service_id: int
    wsdl_address: str
    provider: str
    ip_address: str
    country: str
    ip_number: str
    autonomous_system: str
    latitude: float
    longitude: float


@dataclass(frozen=True)
class QosMatrix:
    """Dense user x service matrix; cells < 0 are unobserved."""

    values: np.ndarray
    kind: str
    missing_sentinel: float = MISSING_SENTINEL

    def __post_init__(self) -> None:
        if self.kind not in MATRIX_KINDS:
            raise ValueError(f"unknown matrix kind: {self.kind!r}")
        if self.values.ndim != 2:
            raise ValueError("matrix values must be 2-dimensional")

    @property
    def n_users(self) -> int:
        return self.values.shape[0]

    @property
    def n_services(self) -> int:
        return self.values.shape[1]

    def observed_mask(self) -> np.ndarray:
        return self.values >= 0.0

    def observed_count(self) -> int:
        return int(self.observed_mask().sum())

    def observed_triples(self) -> "TripleSet":
        """All observed cells as triples, in row-major (user, service) order."""
        users, services = np.nonzero(self.observed_mask())
        return TripleSet(
            users=users.astype(np.int32),
            services=services.astype(np.int32),
            values=self.values[users, services].astype(np.float64),
        )


@dataclass(frozen=True)
class TripleSet:
    """Parallel (user_id, service_id, value) arrays; iterates as tuples."""

    users: np.ndarray
    services: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.users) == len(self.services) == len(self.values)):
            raise ValueError("triple arrays must have equal length")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[tuple[int, int, float]]:
        for u, s, v in zip(self.users, self.services, self.values):
            yield int(u), int(s), float(v)


@dataclass(frozen=True)
class InteractionSplit:
    density: float
    seed: int
    train: TripleSet
    test: TripleSet


def _data_lines(path: Path) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, line) for data rows, skipping the header."""
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if lineno == 1:
                continue
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            yield lineno, line


def _parse_id(token: str, path: Path, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: non-integer ID {token!r}") from None


def _parse_degrees(token: str) -> float:
    # Released tables carry placeholder text ("null") in some coordinate cells.
    try:
        return float(token)
    except ValueError:
        return math.nan


def ingest_users(path: str | Path) -> list[UserRecord]:
    """Parse a user table: tab-separated, one header line, 7 columns."""
    path = Path(path)
    records: list[UserRecord] = []
    seen: set[int] = set()
    for lineno, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) != USER_COLUMNS:
            raise ParseError(
                f"{path}:{lineno}: expected {USER_COLUMNS} columns, got {len(fields)}"
            )
        user_id = _parse_id(fields[0], path, lineno)
        if user_id in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate user ID {user_id}")
        seen.add(user_id)
        records.append(
            UserRecord(
                user_id=user_id,
                ip_address=fields[1],
                country=fields[2],
                ip_number=fields[3],
                autonomous_system=fields[4],
                latitude=_parse_degrees(fields[5]),
                longitude=_parse_degrees(fields[6]),
            )
        )
    return records


def ingest_services(path: str | Path) -> list[ServiceRecord]:
    """Parse a service table: tab-separated, one header line, 9 columns."""
    path = Path(path)
    records: list[ServiceRecord] = []
    seen: set[int] = set()
    for lineno, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) != SERVICE_COLUMNS:
            raise ParseError(
                f"{path}:{lineno}: expected {SERVICE_COLUMNS} columns, got {len(fields)}"
            )
        service_id = _parse_id(fields[0], path, lineno)
        if service_id in seen:
            raise IntegrityError(f"{path}:{lineno}: duplicate service ID {service_id}")
        seen.add(service_id)
        records.append(
            ServiceRecord(
                service_id=service_id,
                wsdl_address=fields[1],
                provider=fields[2],
                ip_address=fields[3],
                country=fields[4],
                ip_number=fields[5],
                autonomous_system=fields[6],
                latitude=_parse_degrees(fields[7]),
                longitude=_parse_degrees(fields[8]),
            )
        )
    return records


def ingest_matrix(path: str | Path, kind: str) -> QosMatrix:
    """Parse a dense whitespace-separated QoS matrix."""
    path = Path(path)
    rows: list[np.ndarray] = []
    n_cols = -1
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                row = np.asarray(tokens, dtype=np.float64)
            except ValueError:
                bad = next(t for t in tokens if not _is_number(t))
                raise ParseError(f"{path}:{lineno}: non-numeric token {bad!r}") from None
            if n_cols < 0:
                n_cols = len(row)
            elif len(row) != n_cols:
                raise ParseError(
                    f"{path}:{lineno}: expected {n_cols} columns, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty matrix file")
    return QosMatrix(values=np.vstack(rows), kind=kind)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def write_matrix(matrix: QosMatrix, path: str | Path) -> None:
    """Serialize a matrix in the ingestible whitespace format (exact floats)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for row in matrix.values:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def split_by_density(matrix: QosMatrix, density: float, seed: int) -> InteractionSplit:
    """Seeded uniform split of the observed cells into train and test.

    ``|train| = floor(density * observed)`` (64-bit float product); the
    shuffle is Fisher-Yates over row-major observed-cell indices driven by
    PCG32, so a (matrix, density, seed) triple fully determines the split.
    """
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    observed = matrix.observed_triples()
    n = len(observed)
    k = math.floor(density * n)
    perm = permutation(n, seed)
    train_idx = perm[:k]
    test_idx = perm[k:]
    return InteractionSplit(
        density=density,
        seed=seed,
        train=_take(observed, train_idx),
        test=_take(observed, test_idx),
    )


def _take(triples: TripleSet, idx: np.ndarray) -> TripleSet:
    return TripleSet(
        users=triples.users[idx],
        services=triples.services[idx],
        values=triples.values[idx],
    )


def _triples_payload(triples: TripleSet) -> bytes:
    lines = [
        f"{int(u)}\t{int(s)}\t{repr(float(v))}\n"
        for u, s, v in zip(triples.users, triples.services, triples.values)
    ]
    return "".join(lines).encode("utf-8")


def write_split(split: InteractionSplit, out_dir: str | Path) -> dict:
    """Write train.tsv/test.tsv plus the split.json sidecar; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_payload = _triples_payload(split.train)
    test_payload = _triples_payload(split.test)
    (out_dir / "train.tsv").write_bytes(train_payload)
    (out_dir / "test.tsv").write_bytes(test_payload)
    checksum = hashlib.sha256(train_payload + test_payload).hexdigest()
    manifest = {
        "density": split.density,
        "seed": split.seed,
        "observed_count": len(split.train) + len(split.test),
        "n_train": len(split.train),
        "n_test": len(split.test),
        "checksum": f"sha256:{checksum}",
    }
    (out_dir / "split.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return manifest


def _read_triples_file(path: Path) -> TripleSet:
    users: list[int] = []
    services: list[int] = []
    values: list[float] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 columns")
            users.append(_parse_id(fields[0], path, lineno))
            services.append(_parse_id(fields[1], path, lineno))
            try:
                values.append(float(fields[2]))
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: non-numeric value {fields[2]!r}"
                ) from None
    return TripleSet(
        users=np.asarray(users, dtype=np.int32),
        services=np.asarray(services, dtype=np.int32),
        values=np.asarray(values, dtype=np.float64),
    )


def read_split(split_dir: str | Path) -> InteractionSplit:
    """Load a split written by :func:`write_split`, verifying its checksum."""
    split_dir = Path(split_dir)
    manifest = json.loads((split_dir / "split.json").read_text(encoding="utf-8"))
    train_payload = (split_dir / "train.tsv").read_bytes()
    test_payload = (split_dir / "test.tsv").read_bytes()
    checksum = "sha256:" + hashlib.sha256(train_payload + test_payload).hexdigest()
    if checksum != manifest["checksum"]:
        raise IntegrityError(f"{split_dir}: split checksum mismatch")
    split = InteractionSplit(
        density=float(manifest["density"]),
        seed=int(manifest["seed"]),
        train=_read_triples_file(split_dir / "train.tsv"),
        test=_read_triples_file(split_dir / "test.tsv"),
    )
    if len(split.train) != manifest["n_train"] or len(split.test) != manifest["n_test"]:
        raise IntegrityError(f"{split_dir}: triple counts disagree with manifest")
    return split
