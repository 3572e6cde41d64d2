"""Batch inference: prompts in, one final-layer hidden vector per prompt out.

Pooling picks which position of the final sequence represents the sentence:
"first" for masked models, "last" (last non-pad position) for causal ones.
The pairing is enforced, not defaulted; asking for the other combination is
an error because the resulting vector is meaningless for that architecture.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InferenceError, ManifestError, PoolingError, PromptTooLongError
from .manifest import read_prompt_manifest, select_kind
from .models import LoadedModel, load_model
from .qfv import write_feature_file

POOLINGS = ("first", "last")
# sidecar provenance uses the spelled-out names shared with downstream readers
SIDECAR_POOLING = {"first": "first_token", "last": "last_token"}
_REQUIRED_POOLING = {"masked": "first", "causal": "last"}


def check_pooling(kind: str, pooling: str) -> None:
    if pooling not in POOLINGS:
        raise PoolingError(f"pooling must be one of {POOLINGS}, got {pooling!r}")
    required = _REQUIRED_POOLING[kind]
    if pooling != required:
        raise PoolingError(
            f"{pooling!r} pooling is invalid for a {kind} model; use {required!r}"
        )


def embed_texts(
    loaded: LoadedModel, texts: list[str], pooling: str, batch_size: int = 32
) -> np.ndarray:
    """Embed texts in order, returning a float32 (len(texts), hidden) array."""
    import torch

    check_pooling(loaded.kind, pooling)
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    rows: list[np.ndarray] = []
    for start in range(0, len(texts), batch_size):
        batch = texts[start : start + batch_size]
        encoded = loaded.tokenizer(batch, return_tensors="pt", padding=True)
        mask = encoded["attention_mask"]
        lengths = mask.sum(dim=1)
        if loaded.context is not None:
            for j, n in enumerate(lengths.tolist()):
                if n > loaded.context:
                    raise PromptTooLongError(
                        f"prompt {start + j} is {n} tokens; model context is "
                        f"{loaded.context}"
                    )
        encoded = {k: v.to(loaded.module.device) for k, v in encoded.items()}
        with torch.no_grad():
            hidden = loaded.module(**encoded).last_hidden_state
        if pooling == "first":
            picked = hidden[:, 0, :]
        else:
            idx = lengths.to(hidden.device) - 1
            picked = hidden[torch.arange(hidden.shape[0]), idx, :]
        rows.append(picked.to("cpu").to(torch.float32).numpy())
    out = np.concatenate(rows, axis=0) if rows else np.zeros((0, loaded.hidden_size), np.float32)
    if not np.isfinite(out).all():
        raise InferenceError("model produced non-finite values")
    return out


@dataclass(frozen=True)
class ExtractorJob:
    model: str
    pooling: str
    manifest_path: str
    out_path: str
    entity_kind: str
    batch_size: int = 32
    device: str = "cpu"


def run_extract(job: ExtractorJob, loaded: LoadedModel | None = None) -> Path:
    """Embed one entity kind's prompts from a manifest into a QFV1 file."""
    if loaded is None:
        loaded = load_model(job.model, device=job.device)
    check_pooling(loaded.kind, job.pooling)
    template_hash, prompts = read_prompt_manifest(job.manifest_path)
    selected = select_kind(prompts, job.entity_kind)
    if not selected:
        raise ManifestError(
            f"{job.manifest_path}: no {job.entity_kind!r} prompts in manifest"
        )
    selected = sorted(selected, key=lambda p: p.entity_id)
    matrix = embed_texts(loaded, [p.text for p in selected], job.pooling, job.batch_size)
    vectors = {p.entity_id: matrix[i] for i, p in enumerate(selected)}
    out = Path(job.out_path)
    write_feature_file(
        job.entity_kind,
        vectors,
        out,
        provenance={
            "model_name": job.model,
            "pooling": SIDECAR_POOLING[job.pooling],
            "template_hash": template_hash,
        },
    )
    return out
