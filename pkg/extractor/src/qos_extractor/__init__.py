from .errors import (
    ExtractorError,
    FormatError,
    InferenceError,
    ManifestError,
    ModelKindError,
    PoolingError,
    PromptTooLongError,
)
from .extract import POOLINGS, ExtractorJob, check_pooling, embed_texts, run_extract
from .manifest import ENTITY_KINDS, Prompt, read_prompt_manifest, select_kind
from .models import (
    MODEL_ALIASES,
    LoadedModel,
    context_limit,
    detect_model_kind,
    load_model,
    resolve_model_id,
)
from .qfv import read_feature_file, write_feature_file
from .server import make_app

__version__ = "0.1.0"

__all__ = [
    "ENTITY_KINDS",
    "ExtractorError",
    "ExtractorJob",
    "FormatError",
    "InferenceError",
    "LoadedModel",
    "MODEL_ALIASES",
    "ManifestError",
    "ModelKindError",
    "POOLINGS",
    "PoolingError",
    "Prompt",
    "PromptTooLongError",
    "check_pooling",
    "context_limit",
    "detect_model_kind",
    "embed_texts",
    "load_model",
    "make_app",
    "read_feature_file",
    "read_prompt_manifest",
    "resolve_model_id",
    "run_extract",
    "select_kind",
    "write_feature_file",
]
