"""QoS prediction for web services from id embeddings plus LLM sentence features.

The public surface mirrors the pipeline stages: data ingestion and splitting,
prompt construction, feature stores, the model and its training loop, the
evaluation harness, and a scikit-learn style estimator facade.
"""

from .data import (
    InteractionSplit,
    QosMatrix,
    ServiceRecord,
    TripleSet,
    UserRecord,
    ingest_matrix,
    ingest_services,
    ingest_users,
    read_split,
    split_by_density,
    write_split,
)
from .errors import (
    CheckpointError,
    ConfigError,
    EndpointError,
    FeatureFormatError,
    IntegrityError,
    ParseError,
    QosrecError,
    TrainingError,
)
from .estimator import QosPredictor
from .evaluation import (
    PUBLISHED_BASELINES,
    EvalReport,
    SweepSpec,
    evaluate_metrics,
    make_run_id,
    run_experiment,
    run_sweep,
)
from .features import (
    FeatureStore,
    Provenance,
    fetch_embeddings,
    random_features,
    read_feature_file,
    write_feature_file,
)
from .model import (
    ModelConfig,
    ModelParams,
    forward,
    init_model,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
)
from .prompts import (
    SERVICE_TEMPLATE,
    TEMPLATE_HASH,
    USER_TEMPLATE,
    PromptText,
    build_prompts,
    build_service_sentence,
    build_user_sentence,
    read_prompt_manifest,
    write_prompt_manifest,
)
from .training import (
    TrainConfig,
    TrainingCurve,
    huber_grad,
    huber_loss,
    select_best_epoch,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "ConfigError",
    "EndpointError",
    "EvalReport",
    "FeatureFormatError",
    "FeatureStore",
    "IntegrityError",
    "InteractionSplit",
    "ModelConfig",
    "ModelParams",
    "PUBLISHED_BASELINES",
    "ParseError",
    "PromptText",
    "Provenance",
    "QosMatrix",
    "QosPredictor",
    "QosrecError",
    "SERVICE_TEMPLATE",
    "ServiceRecord",
    "SweepSpec",
    "TEMPLATE_HASH",
    "TrainConfig",
    "TrainingCurve",
    "TrainingError",
    "TripleSet",
    "USER_TEMPLATE",
    "UserRecord",
    "build_prompts",
    "build_service_sentence",
    "build_user_sentence",
    "evaluate_metrics",
    "fetch_embeddings",
    "forward",
    "huber_grad",
    "huber_loss",
    "ingest_matrix",
    "ingest_services",
    "ingest_users",
    "init_model",
    "load_checkpoint",
    "make_run_id",
    "predict_batch",
    "random_features",
    "read_feature_file",
    "read_prompt_manifest",
    "read_split",
    "run_experiment",
    "run_sweep",
    "save_checkpoint",
    "select_best_epoch",
    "split_by_density",
    "train",
    "write_feature_file",
    "write_prompt_manifest",
    "write_split",
]
