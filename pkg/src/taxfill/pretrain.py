"""Corpus indexing and masked-token pretraining of the sequence encoder.

A corpus is one whitespace-tokenized sentence per line.  Indexing finds
exact (lowercased) mentions of taxonomy concept names, keeps only sentences
containing at least one, and records the mention spans.  Pretraining then
repeatedly hides one token inside a mention and trains the bidirectional
encoder to recover it through a projection tied to the token embeddings.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .autodiff import (
    OptimizerConfig,
    cross_entropy,
    linear,
    matmul,
    no_grad,
    sgd_step,
)
from .encoders import uniform_init
from .errors import VocabMismatch
from .model import ModelState
from .taxonomy import Taxonomy, TokenVocabulary, build_vocabulary

PUNCTUATION = ".,;:!?()[]\"'"


@dataclass(frozen=True)
class ConceptSpan:
    """Inclusive token range [start, end] matching one concept's name."""

    start: int
    end: int
    concept_id: str

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span bounds ({self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class CorpusStore:
    """Encoded sentences plus, per sentence, the concept mentions found."""

    sentences: tuple[tuple[int, ...], ...]
    spans: tuple[tuple[ConceptSpan, ...], ...]
    vocab: TokenVocabulary

    def __post_init__(self):
        if len(self.sentences) != len(self.spans):
            raise ValueError("sentences and spans must align")
        for sent, sent_spans in zip(self.sentences, self.spans):
            last_end = -1
            for span in sent_spans:
                if span.start <= last_end:
                    raise ValueError("overlapping or unsorted concept spans")
                if span.end >= len(sent):
                    raise ValueError("concept span leaves the sentence")
                last_end = span.end

    def __len__(self) -> int:
        return len(self.sentences)


def normalize_line(line: str) -> list[str]:
    """Lowercase and split, shedding punctuation stuck to token edges."""
    tokens = []
    for raw in line.lower().split():
        token = raw.strip(PUNCTUATION)
        if token:
            tokens.append(token)
    return tokens


def read_corpus(path: str | Path) -> list[list[str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [found for line in lines if (found := normalize_line(line))]


def count_corpus_tokens(sentences: Sequence[Sequence[str]]) -> dict[str, int]:
    counts: collections.Counter[str] = collections.Counter()
    for sentence in sentences:
        counts.update(sentence)
    return dict(counts)


def find_concept_spans(tokens: Sequence[str], t: Taxonomy) -> list[ConceptSpan]:
    """Non-overlapping mentions; longer matches beat shorter, earlier beat
    later among equals."""
    names: dict[tuple[str, ...], str] = {}
    for cid in sorted(t.concept_ids):
        names.setdefault(t.concept(cid).name, cid)
    lengths = sorted({len(name) for name in names}, reverse=True)
    candidates = []
    for start in range(len(tokens)):
        for length in lengths:
            window = tuple(tokens[start : start + length])
            if len(window) == length and window in names:
                candidates.append(
                    ConceptSpan(start, start + length - 1, names[window])
                )
    candidates.sort(key=lambda s: (-s.length, s.start, s.concept_id))
    taken: list[ConceptSpan] = []
    occupied: set[int] = set()
    for span in candidates:
        positions = range(span.start, span.end + 1)
        if occupied.isdisjoint(positions):
            taken.append(span)
            occupied.update(positions)
    return sorted(taken, key=lambda s: s.start)


def index_corpus(path: str | Path, t: Taxonomy,
                 vocab: TokenVocabulary) -> CorpusStore:
    """Encode the corpus, keeping only sentences that mention a concept."""
    sentences: list[tuple[int, ...]] = []
    spans: list[tuple[ConceptSpan, ...]] = []
    for tokens in read_corpus(path):
        found = find_concept_spans(tokens, t)
        if not found:
            continue
        sentences.append(tuple(vocab.encode(tokens)))
        spans.append(tuple(found))
    return CorpusStore(tuple(sentences), tuple(spans), vocab)


def ingest_corpus(path: str | Path, t: Taxonomy,
                  min_freq: int = 2) -> tuple[CorpusStore, TokenVocabulary]:
    """One-stop corpus preparation: count, build the vocabulary, index."""
    counts = count_corpus_tokens(read_corpus(path))
    vocab = build_vocabulary(t, counts, min_freq=min_freq)
    return index_corpus(path, t, vocab), vocab


# -- masked-token objective ----------------------------------------------------


def ensure_mct_parameters(model: ModelState, seed: int = 0) -> None:
    """Register the recovery head (projection + bias) if absent.

    The output distribution is scored against the shared token embedding
    table, so the head itself stays small.
    """
    if "mct.proj.w" in model.store:
        return
    rng = np.random.default_rng(seed)
    two_h = 2 * model.dims.seq_hidden
    model.store.add("mct.proj.w",
                    uniform_init(rng, (model.dims.d_tok, two_h), two_h))
    model.store.add("mct.bias", np.zeros(len(model.vocab)))


def draw_mask(corpus: CorpusStore,
              rng: np.random.Generator) -> tuple[int, int, int]:
    """Pick (sentence, position, target id): uniform sentence, uniform span
    within it, uniform position within the span."""
    if len(corpus) == 0:
        raise ValueError("corpus store is empty")
    sent_i = int(rng.integers(len(corpus)))
    sent_spans = corpus.spans[sent_i]
    span = sent_spans[int(rng.integers(len(sent_spans)))]
    position = int(rng.integers(span.start, span.end + 1))
    return sent_i, position, corpus.sentences[sent_i][position]


def mct_logits(corpus: CorpusStore, model: ModelState, sent_i: int,
               position: int, training: bool = False, drop_rate: float = 0.0,
               rng: np.random.Generator | None = None):
    """Token scores for the hidden position (full-vocabulary, no blocking)."""
    ensure_mct_parameters(model)
    ids = list(corpus.sentences[sent_i])
    target = ids[position]
    ids[position] = model.vocab.mask_id
    states = model.seq_enc.hidden_states(model.store, model.embeddings, ids,
                                         training, drop_rate, rng)
    projected = matmul(model.store["mct.proj.w"], states[position])
    logits = linear(model.embeddings, projected, model.store["mct.bias"])
    return logits, target


def mct_step(corpus: CorpusStore, model: ModelState,
             rng: np.random.Generator, training: bool = False,
             drop_rate: float = 0.0):
    """Loss for one freshly drawn masked position."""
    sent_i, position, _ = draw_mask(corpus, rng)
    logits, target = mct_logits(corpus, model, sent_i, position, training,
                                drop_rate, rng)
    return cross_entropy(logits, target)


def pretrain_encoder(corpus: CorpusStore, model: ModelState,
                     config: OptimizerConfig, seed: int = 0) -> list[float]:
    """``config.epochs`` single-sentence steps; returns the loss curve."""
    ensure_mct_parameters(model, seed)
    rng = np.random.default_rng(seed)
    losses = []
    for step in range(config.epochs):
        model.store.zero_grad()
        loss = mct_step(corpus, model, rng, training=True,
                        drop_rate=config.dropout_rate)
        loss.backward()
        sgd_step(model.store, config, step)
        losses.append(float(loss.data))
    return losses


def mask_positions(corpus: CorpusStore) -> list[tuple[int, int, int]]:
    """Every maskable (sentence, position, target id), in corpus order."""
    out = []
    for sent_i, sent_spans in enumerate(corpus.spans):
        for span in sent_spans:
            for position in range(span.start, span.end + 1):
                out.append((sent_i, position,
                            corpus.sentences[sent_i][position]))
    return out


def mct_accuracy(corpus: CorpusStore, model: ModelState,
                 positions: Sequence[tuple[int, int, int]]) -> float:
    """Fraction of positions whose top-scoring token is the hidden one."""
    if not positions:
        raise ValueError("no positions to score")
    hits = 0
    with no_grad():
        for sent_i, position, target in positions:
            logits, _ = mct_logits(corpus, model, sent_i, position)
            if int(np.argmax(logits.data)) == target:
                hits += 1
    return hits / len(positions)


def transfer_weights(pretrained: ModelState, fresh: ModelState) -> ModelState:
    """Copy token embeddings and sequence-encoder weights; everything else
    keeps its fresh initialization."""
    if pretrained.vocab != fresh.vocab:
        raise VocabMismatch("pretrained and fresh models index different "
                            "vocabularies")
    shared = {name: arr for name, arr in pretrained.store.arrays().items()
              if name == "tok_emb" or name.startswith("seq.")}
    fresh.store.load_arrays(shared)
    return fresh
