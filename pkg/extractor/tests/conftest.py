"""Session fixtures: two tiny randomly initialized models saved to disk.

Both use a shared word-level tokenizer over a small vocabulary. The encoder
is RoBERTa-shaped with hidden size 768; the decoder is Llama-shaped with
hidden size 3072 and grouped-query attention. One transformer layer each,
so forwards stay cheap while the public load/extract/serve paths are real.

Heavy imports live inside the fixtures; the test modules guard themselves
with importorskip, so collection works without torch installed.
"""

import pytest

WORDS = [
    "web", "user", "service", "located", "in", "united", "states", "canada",
    "autonomous", "system", "hosted", "by", "at", "url", "long", ",", ".",
]


def build_tokenizer(appends_eos: bool):
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from tokenizers.processors import TemplateProcessing
    from transformers import PreTrainedTokenizerFast

    vocab = {"<s>": 0, "<pad>": 1, "</s>": 2, "<unk>": 3, "<mask>": 4}
    for word in WORDS:
        vocab[word] = len(vocab)
    tok = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = Whitespace()
    single = "<s> $A </s>" if appends_eos else "<s> $A"
    tok.post_processor = TemplateProcessing(
        single=single, special_tokens=[("<s>", 0), ("</s>", 2)]
    )
    kwargs = dict(bos_token="<s>", eos_token="</s>", unk_token="<unk>")
    if appends_eos:
        # the decoder tokenizer ships without a pad token on purpose, to
        # exercise the pad -> eos fallback in load_model
        kwargs.update(pad_token="<pad>", mask_token="<mask>")
    return PreTrainedTokenizerFast(tokenizer_object=tok, **kwargs)


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    import torch
    from transformers import RobertaConfig, RobertaModel

    path = tmp_path_factory.mktemp("tiny-encoder")
    torch.manual_seed(0)
    config = RobertaConfig(
        vocab_size=22,
        hidden_size=768,
        num_hidden_layers=1,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=40,
        type_vocab_size=1,
        pad_token_id=1,
        bos_token_id=0,
        eos_token_id=2,
    )
    RobertaModel(config).save_pretrained(path)
    build_tokenizer(appends_eos=True).save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def tiny_decoder_dir(tmp_path_factory):
    import torch
    from transformers import LlamaConfig, LlamaModel

    path = tmp_path_factory.mktemp("tiny-decoder")
    torch.manual_seed(1)
    config = LlamaConfig(
        vocab_size=22,
        hidden_size=3072,
        num_hidden_layers=1,
        num_attention_heads=4,
        num_key_value_heads=2,
        intermediate_size=64,
        max_position_embeddings=16,
        bos_token_id=0,
        eos_token_id=2,
    )
    LlamaModel(config).save_pretrained(path)
    build_tokenizer(appends_eos=False).save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def encoder(tiny_encoder_dir):
    from qos_extractor import load_model

    return load_model(str(tiny_encoder_dir))


@pytest.fixture(scope="session")
def decoder(tiny_decoder_dir):
    from qos_extractor import load_model

    return load_model(str(tiny_decoder_dir))


@pytest.fixture()
def manifest_path(tmp_path):
    lines = ["#qpm1\tdeadbeef"]
    for i in range(5):
        lines.append(f"user\t{i}\tweb user, located in united states {'long ' * i}.")
    for j in range(7):
        lines.append(f"service\t{j}\tweb service, hosted by canada {'long ' * (j % 3)}.")
    path = tmp_path / "prompts.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
