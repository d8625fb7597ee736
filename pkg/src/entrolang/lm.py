"""Language-model interface plus corpus-level cross-entropy and perplexity.

A language model exposes its training language, its own tokenizer, and
next_token_dist(context) -> probability vector over the full token
vocabulary. Evaluation always goes through the model's own tokenizer, so a
model can score foreign text (byte fallback keeps every character encodable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .corpus import Corpus
from .tokenizer import CharTokenizer


@runtime_checkable
class LanguageModel(Protocol):
    lang: str
    tokenizer: CharTokenizer

    def next_token_dist(self, context: Sequence[int]) -> np.ndarray: ...


@dataclass
class NeuralConfig:
    """Training-loop settings for the optional neural backend."""

    embed_dim: int = 64
    n_layers: int = 2
    n_heads: int = 2
    context_len: int = 128
    batch_size: int = 8
    eval_every: int = 100
    save_every: int = 1000
    keep_checkpoints: int = 2
    max_epochs: int = 150
    patience: int = 3
    learning_rate: float = 1e-3
    seed: int = 0


@dataclass
class LMConfig:
    backend: str = "ngram"
    order: int = 4
    alpha: float = 0.01
    lambdas: tuple[float, ...] | None = None
    neural: NeuralConfig = field(default_factory=NeuralConfig)


class UniformLM:
    """Assigns 1/|V| to every token in every context. Handy as a baseline."""

    def __init__(self, tokenizer: CharTokenizer, lang: str = "unk"):
        self.lang = lang
        self.tokenizer = tokenizer

    def next_token_dist(self, context: Sequence[int]) -> np.ndarray:
        v = len(self.tokenizer)
        return np.full(v, 1.0 / v)

    def logprob_ids(self, ids: np.ndarray) -> np.ndarray:
        return np.full(len(ids), -math.log(len(self.tokenizer)))


def _eval_instances(corpus: Corpus | Iterable[str]) -> list[str]:
    if isinstance(corpus, Corpus):
        return list(corpus.instances)
    return list(corpus)


def cross_entropy(model: LanguageModel, corpus: Corpus | Iterable[str]) -> float:
    """Mean negative log-probability per predicted token, in nats.

    Instances are encoded through the model's own tokenizer. Every token is
    predicted; tokens near an instance start are conditioned on the shorter
    available context.

    Raises:
        ValueError: zero-length evaluation set (no instances or no tokens).
    """
    instances = _eval_instances(corpus)
    total = 0.0
    n_tokens = 0
    fast = getattr(model, "logprob_ids", None)
    for inst in instances:
        ids = model.tokenizer.encode(inst, truncate=True, pad=False)
        if not ids:
            continue
        n_tokens += len(ids)
        if fast is not None:
            total += float(np.sum(fast(np.asarray(ids, dtype=np.int64))))
        else:
            for t, tid in enumerate(ids):
                dist = model.next_token_dist(ids[:t])
                total += math.log(float(dist[tid]))
    if n_tokens == 0:
        raise ValueError("zero-length evaluation set: nothing to score")
    return -total / n_tokens


def perplexity(model: LanguageModel, corpus: Corpus | Iterable[str]) -> float:
    """exp of the per-token cross-entropy."""
    return math.exp(cross_entropy(model, corpus))


def fit_language_model(config: LMConfig, train: Corpus | Iterable[str],
                       tokenizer: CharTokenizer, lang: str,
                       val: Corpus | Iterable[str] | None = None):
    """Fit a model of the configured backend on training instances.

    Raises:
        ValueError: unknown backend or empty training corpus.
    """
    instances = _eval_instances(train)
    if not instances:
        raise ValueError("cannot fit a language model on an empty training corpus")
    if config.backend == "ngram":
        from .ngram import NGramLM
        model = NGramLM(tokenizer, lang=lang, order=config.order,
                        alpha=config.alpha, lambdas=config.lambdas)
        model.fit(instances)
        return model
    if config.backend == "neural":
        from .neural import TinyNeuralLM
        model = TinyNeuralLM(tokenizer, lang=lang, config=config.neural)
        model.fit(instances, val_instances=_eval_instances(val) if val is not None else None)
        return model
    raise ValueError(f"unknown language model backend {config.backend!r}")
