"""Scikit-learn style regressor facade over the training loop.

Example:
    >>> model = QosPredictor(embed_dim=8, max_epochs=50)
    >>> model.fit(X_train, y_train, eval_set=(X_test, y_test))
    >>> yhat = model.predict(X_test)

X is an (n, 2) array of (user_id, service_id); y is the QoS value. Sentence
features are optional and passed as FeatureStore objects at construction.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .data import InteractionSplit, TripleSet
from .features import FeatureStore
from .model import ModelConfig, predict_batch, predict_from_projected, project_features
from .training import TrainConfig, select_best_epoch, train
from .validation import check_feature_stores, check_interactions, triples_from_arrays


class QosPredictor(BaseEstimator, RegressorMixin):
    """QoS regressor combining id embeddings with optional sentence features.

    Parameters mirror the model and optimizer configuration; all are plain
    constructor arguments so ``get_params``/``set_params`` work unchanged.

    Attributes (after fit):
        params_: trained tensors at the selected epoch.
        curve_: per-epoch loss and, with an eval_set, test MAE/RMSE.
        best_epoch_: epoch whose checkpoint ``params_`` holds.
        n_users_, n_services_: id-space bounds inferred or passed to fit.
    """

    def __init__(
        self,
        embed_dim: int = 16,
        proj_dim: int = 16,
        mlp_dims: tuple = (32, 16, 8),
        user_features: FeatureStore | None = None,
        service_features: FeatureStore | None = None,
        huber_delta: float = 1.0,
        learning_rate: float = 1e-4,
        batch_size: int = 256,
        max_epochs: int = 1500,
        seed: int = 0,
    ):
        self.embed_dim = embed_dim
        self.proj_dim = proj_dim
        self.mlp_dims = mlp_dims
        self.user_features = user_features
        self.service_features = service_features
        self.huber_delta = huber_delta
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.seed = seed

    def fit(self, X, y, eval_set=None, n_users: int | None = None, n_services: int | None = None):
        """Train on (user, service) -> value triples.

        Args:
            X: (n, 2) integer array of (user_id, service_id).
            y: (n,) QoS values.
            eval_set: optional (X_test, y_test); enables per-epoch metrics and
                best-epoch selection. Without it the final epoch is kept.
            n_users, n_services: id-space sizes; inferred from the data when
                omitted (max id + 1 across train and eval).
        """
        ids, values = check_interactions(X, y)
        user_store, service_store = check_feature_stores(self.user_features, self.service_features)

        test_triples = None
        if eval_set is not None:
            X_test, y_test = eval_set
            test_ids, test_values = check_interactions(X_test, y_test)
            test_triples = triples_from_arrays(test_ids, test_values)

        if n_users is None:
            n_users = int(ids[:, 0].max()) + 1
            if test_triples is not None:
                n_users = max(n_users, int(test_triples.users.max()) + 1)
        if n_services is None:
            n_services = int(ids[:, 1].max()) + 1
            if test_triples is not None:
                n_services = max(n_services, int(test_triples.services.max()) + 1)
        check_interactions(X, n_users=n_users, n_services=n_services)

        llm_dim = user_store.dim if user_store is not None else 0
        model_config = ModelConfig(
            n_users=n_users,
            n_services=n_services,
            embed_dim=self.embed_dim,
            llm_dim=llm_dim,
            proj_dim=self.proj_dim,
            mlp_dims=tuple(self.mlp_dims),
            seed=self.seed,
        )
        train_config = TrainConfig(
            huber_delta=self.huber_delta,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            shuffle_seed=self.seed,
        )

        train_triples = triples_from_arrays(ids, values)
        if test_triples is None:
            test_triples = TripleSet(
                users=np.empty(0, dtype=np.int32),
                services=np.empty(0, dtype=np.int32),
                values=np.empty(0, dtype=np.float64),
            )
        # density/seed describe how a split was sampled; fit receives the
        # arrays pre-split, so only the triples matter here
        split = InteractionSplit(
            density=1.0, seed=self.seed, train=train_triples, test=test_triples
        )

        self.params_, self.curve_ = train(
            split, user_store, service_store, model_config, train_config
        )
        self.best_epoch_ = (
            select_best_epoch(self.curve_) if len(split.test) > 0 and self.curve_.epochs else 0
        )
        self.n_users_ = n_users
        self.n_services_ = n_services
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise RuntimeError("fit must be called before predict")
        ids, _ = check_interactions(X, n_users=self.n_users_, n_services=self.n_services_)
        user_store, service_store = check_feature_stores(self.user_features, self.service_features)
        if user_store is None:
            return predict_batch(self.params_, ids[:, 0], ids[:, 1])
        return predict_from_projected(
            self.params_,
            ids[:, 0],
            ids[:, 1],
            projected_user=project_features(self.params_, user_store.dense(self.n_users_)),
            projected_service=project_features(self.params_, service_store.dense(self.n_services_)),
        )
