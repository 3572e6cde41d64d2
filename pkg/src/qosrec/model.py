"""The fused QoS network: ID embeddings, shared feature projection, MLP, head.

Forward for a (user, service) pair:

    x      = [e_u ; f_u ; e_s ; f_s]      (f_* omitted when llm_dim == 0)
    f_*    = W_proj^T feat_* + b_proj      (one projection shared by both sides)
    h_i    = relu(W_i^T h_{i-1} + b_i)     for each MLP layer
    y_hat  = W_head^T h_L + b_head         (no output activation)

Everything is float64; the backward pass is analytic (ReLU subgradient at 0
taken as 0) and embedding gradients are kept sparse over the rows a batch
touches.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError

EMBED_INIT_BOUND = 0.05


@dataclass(frozen=True)
class ModelConfig:
    n_users: int
    n_services: int
    embed_dim: int = 16
    llm_dim: int = 0
    proj_dim: int = 16
    mlp_dims: tuple[int, ...] = (32, 16, 8)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mlp_dims", tuple(int(d) for d in self.mlp_dims))
        if self.n_users <= 0 or self.n_services <= 0:
            raise ValueError("entity counts must be positive")
        if self.embed_dim <= 0 or self.proj_dim <= 0:
            raise ValueError("embed_dim and proj_dim must be positive")
        if self.llm_dim < 0:
            raise ValueError("llm_dim must be >= 0")
        if not self.mlp_dims or any(d <= 0 for d in self.mlp_dims):
            raise ValueError("mlp_dims must be a non-empty tuple of positive ints")

    @property
    def id_only(self) -> bool:
        return self.llm_dim == 0

    @property
    def mlp_input_dim(self) -> int:
        width = 2 * self.embed_dim
        if not self.id_only:
            width += 2 * self.proj_dim
        return width

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "n_services": self.n_services,
            "embed_dim": self.embed_dim,
            "llm_dim": self.llm_dim,
            "proj_dim": self.proj_dim,
            "mlp_dims": list(self.mlp_dims),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            n_users=int(d["n_users"]),
            n_services=int(d["n_services"]),
            embed_dim=int(d["embed_dim"]),
            llm_dim=int(d["llm_dim"]),
            proj_dim=int(d["proj_dim"]),
            mlp_dims=tuple(int(x) for x in d["mlp_dims"]),
            seed=int(d["seed"]),
        )


@dataclass
class ModelParams:
    """Named float64 tensors in a fixed order (embeddings, projection, MLP, head)."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            tensors={name: arr.copy() for name, arr in self.tensors.items()},
        )

    def names(self) -> list[str]:
        return list(self.tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


@dataclass
class Gradients:
    """Dense gradients plus sparse embedding rows for one backward pass."""

    dense: dict[str, np.ndarray]
    user_rows: np.ndarray
    user_grad: np.ndarray
    service_rows: np.ndarray
    service_grad: np.ndarray


@dataclass
class Trace:
    """Per-layer activations retained by forward for the backward pass."""

    user_ids: np.ndarray
    service_ids: np.ndarray
    user_features: np.ndarray | None
    service_features: np.ndarray | None
    activations: list[np.ndarray] = field(default_factory=list)
    preactivations: list[np.ndarray] = field(default_factory=list)


def mlp_layer_names(config: ModelConfig) -> list[str]:
    return [f"mlp{i}" for i in range(len(config.mlp_dims))]


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_model(config: ModelConfig) -> ModelParams:
    """Seeded init: embeddings uniform(-0.05, 0.05), Glorot-uniform weights, zero biases.

    Draw order is fixed (user embedding, service embedding, projection, MLP
    layers, head) so a seed pins every tensor bitwise.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    tensors: dict[str, np.ndarray] = {}
    tensors["user_embedding"] = rng.uniform(
        -EMBED_INIT_BOUND, EMBED_INIT_BOUND, size=(config.n_users, config.embed_dim)
    )
    tensors["service_embedding"] = rng.uniform(
        -EMBED_INIT_BOUND, EMBED_INIT_BOUND, size=(config.n_services, config.embed_dim)
    )
    if not config.id_only:
        bound = glorot_bound(config.llm_dim, config.proj_dim)
        tensors["proj_w"] = rng.uniform(-bound, bound, size=(config.llm_dim, config.proj_dim))
        tensors["proj_b"] = np.zeros(config.proj_dim)
    fan_in = config.mlp_input_dim
    for name, fan_out in zip(mlp_layer_names(config), config.mlp_dims):
        bound = glorot_bound(fan_in, fan_out)
        tensors[f"{name}_w"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        tensors[f"{name}_b"] = np.zeros(fan_out)
        fan_in = fan_out
    bound = glorot_bound(fan_in, 1)
    tensors["head_w"] = rng.uniform(-bound, bound, size=(fan_in, 1))
    tensors["head_b"] = np.zeros(1)
    return ModelParams(config=config, tensors=tensors)


def _check_batch(
    params: ModelParams,
    user_ids: np.ndarray,
    service_ids: np.ndarray,
    user_features: np.ndarray | None,
    service_features: np.ndarray | None,
) -> None:
    config = params.config
    if user_ids.min(initial=0) < 0 or user_ids.max(initial=-1) >= config.n_users:
        raise ValueError("user id out of range")
    if service_ids.min(initial=0) < 0 or service_ids.max(initial=-1) >= config.n_services:
        raise ValueError("service id out of range")
    if config.id_only:
        if user_features is not None or service_features is not None:
            raise ValueError("features supplied to an ID-only model")
        return
    if user_features is None or service_features is None:
        raise ValueError("model expects feature vectors for both entities")
    expected = (len(user_ids), config.llm_dim)
    if user_features.shape != expected or service_features.shape != (
        len(service_ids),
        config.llm_dim,
    ):
        raise ValueError(
            f"feature shape mismatch: got {user_features.shape}/{service_features.shape}, "
            f"expected {expected}"
        )


def forward_batch(
    params: ModelParams,
    user_ids: np.ndarray,
    service_ids: np.ndarray,
    user_features: np.ndarray | None = None,
    service_features: np.ndarray | None = None,
) -> tuple[np.ndarray, Trace]:
    """Predictions plus the activation trace for a batch of pairs."""
    user_ids = np.asarray(user_ids, dtype=np.int64)
    service_ids = np.asarray(service_ids, dtype=np.int64)
    _check_batch(params, user_ids, service_ids, user_features, service_features)
    config = params.config
    t = params.tensors
    e_u = t["user_embedding"][user_ids]
    e_s = t["service_embedding"][service_ids]
    if config.id_only:
        x = np.concatenate([e_u, e_s], axis=1)
    else:
        f_u = user_features @ t["proj_w"] + t["proj_b"]
        f_s = service_features @ t["proj_w"] + t["proj_b"]
        x = np.concatenate([e_u, f_u, e_s, f_s], axis=1)
    trace = Trace(
        user_ids=user_ids,
        service_ids=service_ids,
        user_features=user_features,
        service_features=service_features,
    )
    trace.activations.append(x)
    a = x
    for name in mlp_layer_names(config):
        z = a @ t[f"{name}_w"] + t[f"{name}_b"]
        trace.preactivations.append(z)
        a = np.maximum(z, 0.0)
        trace.activations.append(a)
    yhat = (a @ t["head_w"]).ravel() + t["head_b"][0]
    return yhat, trace


def forward(
    params: ModelParams,
    user_id: int,
    service_id: int,
    user_feature: np.ndarray | None = None,
    service_feature: np.ndarray | None = None,
) -> tuple[float, Trace]:
    """Single-pair forward; returns (prediction, trace)."""
    uf = None if user_feature is None else np.asarray(user_feature, dtype=np.float64)[None, :]
    sf = None if service_feature is None else np.asarray(service_feature, dtype=np.float64)[None, :]
    yhat, trace = forward_batch(
        params, np.asarray([user_id]), np.asarray([service_id]), uf, sf
    )
    return float(yhat[0]), trace


def backward_batch(
    params: ModelParams, trace: Trace, dloss_dpred: np.ndarray
) -> Gradients:
    """Exact gradients of sum_i dloss_dpred[i] * yhat_i w.r.t. every tensor.

    The shared projection receives the sum of the user- and service-side
    contributions; embedding gradients cover only the touched rows, with
    duplicate ids within the batch accumulated.
    """
    config = params.config
    t = params.tensors
    g = np.asarray(dloss_dpred, dtype=np.float64).reshape(-1, 1)
    dense: dict[str, np.ndarray] = {}

    a_last = trace.activations[-1]
    dense["head_w"] = a_last.T @ g
    dense["head_b"] = g.sum(axis=0)
    delta = g @ t["head_w"].T

    layer_names = mlp_layer_names(config)
    for i in range(len(layer_names) - 1, -1, -1):
        name = layer_names[i]
        delta = delta * (trace.preactivations[i] > 0.0)
        dense[f"{name}_w"] = trace.activations[i].T @ delta
        dense[f"{name}_b"] = delta.sum(axis=0)
        delta = delta @ t[f"{name}_w"].T

    d = config.embed_dim
    if config.id_only:
        de_u = delta[:, :d]
        de_s = delta[:, d:]
    else:
        p = config.proj_dim
        de_u = delta[:, :d]
        df_u = delta[:, d : d + p]
        de_s = delta[:, d + p : 2 * d + p]
        df_s = delta[:, 2 * d + p :]
        dense["proj_w"] = trace.user_features.T @ df_u + trace.service_features.T @ df_s
        dense["proj_b"] = df_u.sum(axis=0) + df_s.sum(axis=0)

    user_rows, user_inverse = np.unique(trace.user_ids, return_inverse=True)
    user_grad = np.zeros((len(user_rows), d))
    np.add.at(user_grad, user_inverse, de_u)
    service_rows, service_inverse = np.unique(trace.service_ids, return_inverse=True)
    service_grad = np.zeros((len(service_rows), d))
    np.add.at(service_grad, service_inverse, de_s)

    return Gradients(
        dense=dense,
        user_rows=user_rows,
        user_grad=user_grad,
        service_rows=service_rows,
        service_grad=service_grad,
    )


def backward(params: ModelParams, trace: Trace, dloss_dpred: float) -> Gradients:
    """Single-pair backward matching :func:`forward`."""
    return backward_batch(params, trace, np.asarray([dloss_dpred]))


def predict_batch(
    params: ModelParams,
    user_ids: np.ndarray,
    service_ids: np.ndarray,
    user_features: np.ndarray | None = None,
    service_features: np.ndarray | None = None,
) -> np.ndarray:
    yhat, _ = forward_batch(params, user_ids, service_ids, user_features, service_features)
    return yhat


def project_features(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Apply the shared projection to a whole (n, llm_dim) feature matrix.

    Lets evaluation project each entity once per epoch instead of once per pair.
    """
    t = params.tensors
    return features @ t["proj_w"] + t["proj_b"]


def predict_from_projected(
    params: ModelParams,
    user_ids: np.ndarray,
    service_ids: np.ndarray,
    projected_user: np.ndarray | None = None,
    projected_service: np.ndarray | None = None,
) -> np.ndarray:
    """Predictions when per-entity projections are precomputed (eval fast path)."""
    config = params.config
    t = params.tensors
    e_u = t["user_embedding"][user_ids]
    e_s = t["service_embedding"][service_ids]
    if config.id_only:
        a = np.concatenate([e_u, e_s], axis=1)
    else:
        a = np.concatenate(
            [e_u, projected_user[user_ids], e_s, projected_service[service_ids]], axis=1
        )
    for name in mlp_layer_names(config):
        a = np.maximum(a @ t[f"{name}_w"] + t[f"{name}_b"], 0.0)
    return (a @ t["head_w"]).ravel() + t["head_b"][0]


CHECKPOINT_MAGIC = b"QCK1"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Versioned binary checkpoint: config JSON + f64-LE tensors + sha256 trailer.

    Layout: magic "QCK1", u32 version, u32 config length, config JSON
    (canonical: sorted keys, compact separators), u32 tensor count, then per
    tensor: u16 name length, name, u8 ndim, ndim x u32 dims, row-major f64-LE
    payload. The final 32 bytes are the sha256 of everything before them.
    """
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    config_json = json.dumps(
        params.config.to_dict(), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    parts.append(struct.pack("<I", len(config_json)))
    parts.append(config_json)
    parts.append(struct.pack("<I", len(params.tensors)))
    for name, arr in params.tensors.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    blob = b"".join(parts)
    Path(path).write_bytes(blob + hashlib.sha256(blob).digest())


def load_checkpoint(path: str | Path) -> ModelParams:
    blob = Path(path).read_bytes()
    if len(blob) < 44:
        raise CheckpointError(f"{path}: file too short")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch")
    if body[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    offset = 4
    (version,) = struct.unpack_from("<I", body, offset)
    offset += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (config_len,) = struct.unpack_from("<I", body, offset)
    offset += 4
    config = ModelConfig.from_dict(
        json.loads(body[offset : offset + config_len].decode("utf-8"))
    )
    offset += config_len
    (n_tensors,) = struct.unpack_from("<I", body, offset)
    offset += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", body, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", body, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(body, dtype="<f8", count=size, offset=offset).reshape(shape)
        offset += 8 * size
        tensors[name] = arr.astype(np.float64)
    if offset != len(body):
        raise CheckpointError(f"{path}: trailing bytes after tensors")
    return ModelParams(config=config, tensors=tensors)
