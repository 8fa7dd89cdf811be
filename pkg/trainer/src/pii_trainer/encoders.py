"""Encoder and tokenizer resolution.

Two sources: a pretrained checkpoint name resolved through transformers
(AutoTokenizer/AutoModel), or a "fresh:..." spec that builds a word-level
tokenizer from the training texts plus a small randomly initialized
transformer encoder. The fresh path exists for offline environments and
fast sanity runs; both feed the identical fine-tuning loop.
"""

from __future__ import annotations

import re
from typing import Iterable

from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (
    AutoModel,
    AutoTokenizer,
    PreTrainedTokenizerFast,
    RobertaConfig,
    RobertaModel,
)

FRESH_DEFAULTS = {"hidden": 64, "layers": 2, "heads": 2}

_WORD_RE = re.compile(r"\w+|[^\w\s]+")


def _parse_fresh_spec(spec: str) -> dict[str, int]:
    params = dict(FRESH_DEFAULTS)
    body = spec[len("fresh:"):] if ":" in spec else ""
    for part in filter(None, body.split(",")):
        key, _, value = part.partition("=")
        if key not in params:
            raise ValueError(f"unknown fresh-encoder parameter {key!r}")
        params[key] = int(value)
    return params


def build_wordlevel_tokenizer(texts: Iterable[str]) -> PreTrainedTokenizerFast:
    """Word-level tokenizer over the given texts' vocabulary, with offsets."""
    vocab = {"<pad>": 0, "<unk>": 1}
    for text in texts:
        for word in _WORD_RE.findall(text):
            if word not in vocab:
                vocab[word] = len(vocab)
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token="<pad>", unk_token="<unk>"
    )


def resolve_encoder(encoder_spec: str, train_texts: list[str], max_length: int):
    """Returns (tokenizer, encoder_model). ``fresh:hidden=H,layers=L,heads=A``
    builds from scratch; anything else is treated as a checkpoint name."""
    if encoder_spec.startswith("fresh"):
        params = _parse_fresh_spec(encoder_spec)
        tokenizer = build_wordlevel_tokenizer(train_texts)
        config = RobertaConfig(
            vocab_size=tokenizer.vocab_size,
            hidden_size=params["hidden"],
            num_hidden_layers=params["layers"],
            num_attention_heads=params["heads"],
            intermediate_size=4 * params["hidden"],
            max_position_embeddings=max_length + 2,
            pad_token_id=tokenizer.pad_token_id,
        )
        return tokenizer, RobertaModel(config)
    tokenizer = AutoTokenizer.from_pretrained(encoder_spec)
    return tokenizer, AutoModel.from_pretrained(encoder_spec)
