"""Huber loss, Adam, and the epoch loop with lowest-MAE model selection.

Per epoch: shuffle the train triples (seeded), run mini-batches of
``batch_size`` (final partial batch included), backpropagate the mean Huber
loss of each batch, apply one Adam step per batch, then score MAE/RMSE on the
test triples. The returned checkpoint is the one from the epoch with minimum
test MAE (earliest on ties). Selection thus looks at the evaluation split;
reports carry a ``model_selection`` field naming this protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import TrainingError
from .features import FeatureStore
from .model import (
    Gradients,
    ModelConfig,
    ModelParams,
    backward_batch,
    forward_batch,
    init_model,
    predict_from_projected,
    project_features,
)

EVAL_BATCH = 8192


@dataclass(frozen=True)
class TrainConfig:
    huber_delta: float = 1.0
    learning_rate: float = 1e-4
    batch_size: int = 256
    max_epochs: int = 1500
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    shuffle_seed: int = 0
    eval_every: int = 1

    def __post_init__(self) -> None:
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def to_dict(self) -> dict:
        return {
            "huber_delta": self.huber_delta,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_epsilon": self.adam_epsilon,
            "shuffle_seed": self.shuffle_seed,
            "eval_every": self.eval_every,
        }


def huber_loss(y, yhat, delta: float = 1.0):
    """0.5*(y-yhat)^2 where |y-yhat| < delta, else delta*(|y-yhat| - delta/2)."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    r = np.asarray(y, dtype=np.float64) - np.asarray(yhat, dtype=np.float64)
    a = np.abs(r)
    out = np.where(a < delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def huber_grad(y, yhat, delta: float = 1.0):
    """d huber_loss / d yhat: (yhat-y) in the quadratic branch, delta*sign outside."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    r = np.asarray(yhat, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    out = np.where(np.abs(r) < delta, r, delta * np.sign(r))
    return float(out) if out.ndim == 0 else out


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the params, plus step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in params.tensors.items()},
            v={name: np.zeros_like(arr) for name, arr in params.tensors.items()},
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            t=self.t,
        )


def _check_finite_grads(grads: Gradients) -> None:
    for arr in grads.dense.values():
        if not np.all(np.isfinite(arr)):
            raise TrainingError("non-finite gradient")
    if not (np.all(np.isfinite(grads.user_grad)) and np.all(np.isfinite(grads.service_grad))):
        raise TrainingError("non-finite embedding gradient")


def _adam_update_dense(
    theta: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    b1: float,
    b2: float,
    eps: float,
    t: int,
) -> None:
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    theta -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _adam_update_rows(
    theta: np.ndarray,
    rows: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    b1: float,
    b2: float,
    eps: float,
    t: int,
) -> None:
    # Lazy sparse Adam: only the touched rows move; untouched moments stay put.
    m_rows = b1 * m[rows] + (1.0 - b1) * g
    v_rows = b2 * v[rows] + (1.0 - b2) * (g * g)
    m[rows] = m_rows
    v[rows] = v_rows
    m_hat = m_rows / (1.0 - b1**t)
    v_hat = v_rows / (1.0 - b2**t)
    theta[rows] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _adam_step_inplace(
    params: ModelParams, grads: Gradients, state: AdamState, config: TrainConfig
) -> None:
    _check_finite_grads(grads)
    state.t += 1
    lr, b1, b2, eps, t = (
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
        state.t,
    )
    tensors = params.tensors
    _adam_update_rows(
        tensors["user_embedding"], grads.user_rows, grads.user_grad,
        state.m["user_embedding"], state.v["user_embedding"], lr, b1, b2, eps, t,
    )
    _adam_update_rows(
        tensors["service_embedding"], grads.service_rows, grads.service_grad,
        state.m["service_embedding"], state.v["service_embedding"], lr, b1, b2, eps, t,
    )
    for name, g in grads.dense.items():
        _adam_update_dense(
            tensors[name], g, state.m[name], state.v[name], lr, b1, b2, eps, t
        )


def adam_step(
    params: ModelParams, grads: Gradients, state: AdamState, config: TrainConfig
) -> tuple[ModelParams, AdamState]:
    """Bias-corrected Adam step; returns updated copies of params and state."""
    new_params = params.copy()
    new_state = state.copy()
    _adam_step_inplace(new_params, grads, new_state, config)
    return new_params, new_state


@dataclass
class TrainingCurve:
    """Per-evaluated-epoch records of (epoch, mean train loss, test MAE, test RMSE)."""

    epochs: list[int]
    loss: list[float]
    mae: list[float]
    rmse: list[float]

    @classmethod
    def empty(cls) -> "TrainingCurve":
        return cls(epochs=[], loss=[], mae=[], rmse=[])

    def append(self, epoch: int, loss: float, mae: float, rmse: float) -> None:
        if self.epochs and epoch <= self.epochs[-1]:
            raise ValueError("epochs must be strictly increasing")
        self.epochs.append(epoch)
        self.loss.append(loss)
        self.mae.append(mae)
        self.rmse.append(rmse)

    def __len__(self) -> int:
        return len(self.epochs)

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.epochs, self.loss, self.mae, self.rmse))

    def to_csv(self, path: str | Path) -> None:
        lines = ["epoch,loss,mae,rmse\n"]
        for epoch, loss, mae, rmse in self.rows():
            lines.append(f"{epoch},{loss!r},{mae!r},{rmse!r}\n")
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainingCurve":
        curve = cls.empty()
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != "epoch,loss,mae,rmse":
            raise ValueError(f"{path}: not a training-curve CSV")
        for line in lines[1:]:
            epoch, loss, mae, rmse = line.split(",")
            curve.append(int(epoch), float(loss), float(mae), float(rmse))
        return curve


def select_best_epoch(curve: TrainingCurve) -> int:
    """The epoch with minimum test MAE, earliest on ties."""
    if len(curve) == 0:
        raise ValueError("empty training curve")
    best = 0
    for i in range(1, len(curve)):
        if curve.mae[i] < curve.mae[best]:
            best = i
    return curve.epochs[best]


def _dense_features(
    store: FeatureStore | None, n_entities: int, ids: np.ndarray, what: str
) -> np.ndarray | None:
    if store is None:
        return None
    if not store.covers(ids):
        missing = sorted(set(int(i) for i in np.unique(ids)) - set(store.vectors))[:5]
        raise TrainingError(f"{what} feature store missing ids {missing}")
    return store.dense(n_entities)


def _evaluate(
    params: ModelParams,
    users: np.ndarray,
    services: np.ndarray,
    values: np.ndarray,
    user_mat: np.ndarray | None,
    service_mat: np.ndarray | None,
) -> tuple[float, float]:
    proj_u = proj_s = None
    if not params.config.id_only:
        proj_u = project_features(params, user_mat)
        proj_s = project_features(params, service_mat)
    abs_sum = 0.0
    sq_sum = 0.0
    n = len(values)
    for start in range(0, n, EVAL_BATCH):
        sl = slice(start, start + EVAL_BATCH)
        yhat = predict_from_projected(params, users[sl], services[sl], proj_u, proj_s)
        err = values[sl] - yhat
        abs_sum += float(np.abs(err).sum())
        sq_sum += float((err * err).sum())
    return abs_sum / n, math.sqrt(sq_sum / n)


def train_loop(
    train_users: np.ndarray,
    train_services: np.ndarray,
    train_values: np.ndarray,
    test_users: np.ndarray | None,
    test_services: np.ndarray | None,
    test_values: np.ndarray | None,
    user_store: FeatureStore | None,
    service_store: FeatureStore | None,
    model_config: ModelConfig,
    train_config: TrainConfig,
    epoch_callback: Callable[[int, float, float, float], None] | None = None,
) -> tuple[ModelParams, TrainingCurve]:
    """Core fitting loop shared by :func:`train` and the estimator.

    With test triples present, returns the checkpoint of the lowest-MAE epoch;
    without them the curve carries NaN metrics and the final params win.
    """
    if len(train_values) == 0:
        raise TrainingError("empty train set")
    if (user_store is None) != (service_store is None):
        raise TrainingError("need both feature stores or neither")
    if (user_store is not None) == model_config.id_only:
        raise TrainingError("feature stores must be supplied exactly when llm_dim > 0")

    params = init_model(model_config)
    curve = TrainingCurve.empty()
    if train_config.max_epochs == 0:
        return params, curve

    user_mat = _dense_features(user_store, model_config.n_users, train_users, "user")
    service_mat = _dense_features(
        service_store, model_config.n_services, train_services, "service"
    )
    has_eval = test_values is not None and len(test_values) > 0
    if has_eval and not model_config.id_only:
        if not user_store.covers(test_users) or not service_store.covers(test_services):
            raise TrainingError("feature stores do not cover the test ids")

    state = AdamState.zeros_like(params)
    rng = np.random.Generator(np.random.PCG64(train_config.shuffle_seed))
    n = len(train_values)
    best_params = params.copy()
    best_mae = math.inf

    for epoch in range(1, train_config.max_epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, train_config.batch_size):
            idx = perm[start : start + train_config.batch_size]
            uids = train_users[idx].astype(np.int64)
            sids = train_services[idx].astype(np.int64)
            ys = train_values[idx]
            uf = user_mat[uids] if user_mat is not None else None
            sf = service_mat[sids] if service_mat is not None else None
            yhat, trace = forward_batch(params, uids, sids, uf, sf)
            batch_losses = huber_loss(ys, yhat, train_config.huber_delta)
            loss_sum += float(batch_losses.sum())
            if not math.isfinite(loss_sum):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            g = huber_grad(ys, yhat, train_config.huber_delta) / len(idx)
            grads = backward_batch(params, trace, g)
            _adam_step_inplace(params, grads, state, train_config)
        if epoch % train_config.eval_every != 0:
            continue
        mean_loss = loss_sum / n
        if has_eval:
            mae, rmse = _evaluate(
                params, test_users, test_services, test_values, user_mat, service_mat
            )
            if mae < best_mae:
                best_mae = mae
                best_params = params.copy()
        else:
            mae = rmse = math.nan
        curve.append(epoch, mean_loss, mae, rmse)
        if epoch_callback is not None:
            epoch_callback(epoch, mean_loss, mae, rmse)

    return (best_params if has_eval else params), curve


def train(
    split,
    user_store: FeatureStore | None,
    service_store: FeatureStore | None,
    model_config: ModelConfig,
    train_config: TrainConfig,
    epoch_callback: Callable[[int, float, float, float], None] | None = None,
) -> tuple[ModelParams, TrainingCurve]:
    """Fit on ``split.train``, score each epoch on ``split.test``."""
    return train_loop(
        split.train.users,
        split.train.services,
        split.train.values,
        split.test.users,
        split.test.services,
        split.test.values,
        user_store,
        service_store,
        model_config,
        train_config,
        epoch_callback=epoch_callback,
    )
