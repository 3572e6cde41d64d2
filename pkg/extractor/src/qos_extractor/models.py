"""Model loading and architecture classification.

A model is either "masked" (bidirectional encoder; the first position is the
sentence summary) or "causal" (decoder; only the last position has seen the
whole sentence). Classification goes through the transformers auto-model
registries rather than name heuristics; model types present in both
registries (e.g. roberta) count as masked.
"""

from dataclasses import dataclass, field

from .errors import ModelKindError

MODEL_ALIASES = {
    "roberta": "roberta-base",
    "phi3mini": "microsoft/Phi-3-mini-4k-instruct",
}

# encoder families whose position table reserves two slots ahead of the
# padding offset, shrinking the usable context by 2
_OFFSET_POSITION_TYPES = {"roberta", "xlm-roberta", "camembert"}


def resolve_model_id(name: str) -> str:
    return MODEL_ALIASES.get(name, name)


def detect_model_kind(config) -> str:
    from transformers.models.auto.modeling_auto import (
        MODEL_FOR_CAUSAL_LM_MAPPING_NAMES,
        MODEL_FOR_MASKED_LM_MAPPING_NAMES,
    )

    model_type = config.model_type
    if model_type in MODEL_FOR_MASKED_LM_MAPPING_NAMES:
        return "masked"
    if model_type in MODEL_FOR_CAUSAL_LM_MAPPING_NAMES:
        return "causal"
    raise ModelKindError(
        f"model type {model_type!r} is neither a masked nor a causal language model"
    )


def context_limit(config) -> int | None:
    max_pos = getattr(config, "max_position_embeddings", None)
    if max_pos is None:
        return None
    if config.model_type in _OFFSET_POSITION_TYPES:
        return int(max_pos) - 2
    return int(max_pos)


@dataclass
class LoadedModel:
    """One tokenizer/model pair ready for inference on a fixed device."""

    requested_name: str
    model_id: str
    kind: str
    hidden_size: int
    context: int | None
    tokenizer: object = field(repr=False)
    module: object = field(repr=False)

    def accepts_name(self, name: str) -> bool:
        return resolve_model_id(name) == self.model_id


def load_model(name: str, device: str = "cpu") -> LoadedModel:
    """Load tokenizer + base model (no LM head) in eval mode."""
    import torch
    from transformers import AutoConfig, AutoModel, AutoTokenizer

    model_id = resolve_model_id(name)
    config = AutoConfig.from_pretrained(model_id)
    kind = detect_model_kind(config)
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    if tokenizer.pad_token is None:
        # causal tokenizers often ship without one; any id works since
        # padded positions are masked out of attention and never pooled
        tokenizer.pad_token = tokenizer.eos_token
    module = AutoModel.from_pretrained(model_id, dtype=torch.float32)
    module.to(device)
    module.eval()
    return LoadedModel(
        requested_name=name,
        model_id=model_id,
        kind=kind,
        hidden_size=int(config.hidden_size),
        context=context_limit(config),
        tokenizer=tokenizer,
        module=module,
    )
