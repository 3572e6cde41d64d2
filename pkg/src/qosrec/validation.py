"""Input validation helpers for the estimator facade.

These normalize user-facing inputs (interaction arrays, feature stores) into
the internal types and raise early with actionable messages.
"""

from __future__ import annotations

import numpy as np

from .data import TripleSet
from .features import FeatureStore


def check_interactions(X, y=None, n_users: int | None = None, n_services: int | None = None):
    """Validate an (n, 2) integer id array plus optional target vector.

    Returns ``(ids, values)`` where ids is int64 (n, 2) and values is float64
    (n,) or None. Bounds are checked against n_users/n_services when given.
    """
    ids = np.asarray(X)
    if ids.ndim != 2 or ids.shape[1] != 2:
        raise ValueError(f"X must have shape (n_samples, 2), got {ids.shape}")
    if ids.shape[0] == 0:
        raise ValueError("X must contain at least one (user, service) pair")
    if not np.issubdtype(ids.dtype, np.integer):
        as_int = ids.astype(np.int64)
        if not np.array_equal(as_int, ids):
            raise ValueError("X must contain integer user and service ids")
        ids = as_int
    else:
        ids = ids.astype(np.int64)
    if np.any(ids < 0):
        raise ValueError("ids must be non-negative")
    if n_users is not None and np.any(ids[:, 0] >= n_users):
        raise ValueError(f"user id out of range (n_users={n_users})")
    if n_services is not None and np.any(ids[:, 1] >= n_services):
        raise ValueError(f"service id out of range (n_services={n_services})")

    values = None
    if y is not None:
        values = np.asarray(y, dtype=np.float64).reshape(-1)
        if values.shape[0] != ids.shape[0]:
            raise ValueError(f"X has {ids.shape[0]} rows but y has {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("y must be finite")
    return ids, values


def triples_from_arrays(ids: np.ndarray, values: np.ndarray) -> TripleSet:
    return TripleSet(
        users=ids[:, 0].astype(np.int32),
        services=ids[:, 1].astype(np.int32),
        values=values.astype(np.float64),
    )


def check_feature_stores(
    user_store: FeatureStore | None,
    service_store: FeatureStore | None,
):
    """Both stores or neither; kinds and dims must line up."""
    if (user_store is None) != (service_store is None):
        raise ValueError("provide both user and service feature stores, or neither")
    if user_store is None:
        return None, None
    if user_store.entity_kind != "user":
        raise ValueError(f"user store has entity_kind {user_store.entity_kind!r}")
    if service_store.entity_kind != "service":
        raise ValueError(f"service store has entity_kind {service_store.entity_kind!r}")
    if user_store.dim != service_store.dim:
        raise ValueError(
            f"feature dim mismatch: user {user_store.dim} vs service {service_store.dim}"
        )
    return user_store, service_store
