"""Sequence encoders: token ids and raw per-frame features to contextual
representations of a common hidden width."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import MultiHeadCrossAttention
from .autodiff import Tensor
from .nn import BiGRU, Embedding, LayerNorm, Linear, Module

PAD_ID = 0
PAD_TOKEN = "<pad>"


class OutOfVocabularyError(KeyError):
    pass


@dataclass
class Vocabulary:
    """Deterministic token -> id map; id 0 is reserved for padding/unknown."""

    tokens: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, token_lists) -> "Vocabulary":
        seen = sorted({tok for toks in token_lists for tok in toks})
        return cls(tokens=seen)

    def __post_init__(self):
        self._ids = {tok: i + 1 for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens) + 1  # + pad/unknown slot

    def encode(self, tokens, fallback: bool = True) -> list[int]:
        ids = []
        for tok in tokens:
            if tok in self._ids:
                ids.append(self._ids[tok])
            elif fallback:
                ids.append(PAD_ID)
            else:
                raise OutOfVocabularyError(tok)
        return ids

    def save(self, path):
        with open(path, "w") as f:
            for tok in self.tokens:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path) as f:
            return cls(tokens=[line.rstrip("\n") for line in f if line.strip()])


def resample_rows(features: np.ndarray, n_out: int) -> np.ndarray:
    """Uniform nearest-index resampling to ``n_out`` rows.

    Row i of the output is row floor(i * raw_len / n_out) of the input;
    shorter inputs repeat indices, equal lengths pass through unchanged.
    """
    raw = features.shape[0]
    if raw == n_out:
        return features
    idx = (np.arange(n_out) * raw) // n_out
    return features[idx]


@dataclass
class QueryRep:
    h: Tensor  # [max_nq, d_h]; rows past n_q are zero
    token_ids: list[int]
    n_q: int
    mask: np.ndarray  # bool [max_nq], True at real tokens


@dataclass
class VideoRep:
    h: Tensor  # [n_v, d_h]
    n_v: int
    duration_seconds: float


class QueryEncoder(Module):
    """Embedding + biGRU over the real tokens, zero-padded to the fixed
    maximum query length; the mask marks real rows."""

    def __init__(self, vocab_size, d_emb, d_h, max_nq, rng):
        super().__init__()
        self.max_nq = max_nq
        self.embedding = Embedding(vocab_size, d_emb, rng)
        self.bigru = BiGRU(d_emb, d_h, rng)

    def __call__(self, token_ids) -> QueryRep:
        n_q = len(token_ids)
        if n_q < 1:
            raise ValueError("empty query")
        if n_q > self.max_nq:
            raise ValueError(f"query length {n_q} exceeds configured max {self.max_nq}")
        h = self.bigru(self.embedding(token_ids))
        if n_q < self.max_nq:
            pad = Tensor(np.zeros((self.max_nq - n_q, h.shape[1])))
            h = ad.concat([h, pad], axis=0)
        mask = np.zeros(self.max_nq, dtype=bool)
        mask[:n_q] = True
        return QueryRep(h=h, token_ids=list(token_ids), n_q=n_q, mask=mask)


class VideoEncoder(Module):
    """Uniform resample + linear width reduction + multi-head
    self-attention (residual, post-norm) + biGRU."""

    def __init__(self, d_f, d_h, n_v, heads, rng):
        super().__init__()
        self.d_f = d_f
        self.n_v = n_v
        self.project = Linear(d_f, d_h, rng)
        self.self_attn = MultiHeadCrossAttention(d_h, heads, rng)
        self.norm = LayerNorm(d_h)
        self.bigru = BiGRU(d_h, d_h, rng)

    def __call__(self, features: np.ndarray, duration_seconds: float = 0.0) -> VideoRep:
        features = np.asarray(features)
        if features.ndim != 2 or features.shape[1] != self.d_f:
            raise ad.ShapeError(
                f"video features must be [raw_len, {self.d_f}], got {features.shape}"
            )
        if features.shape[0] < 1:
            raise ValueError("empty video")
        x = self.project(Tensor(resample_rows(features, self.n_v)))
        y = self.norm(x + self.self_attn(x, x))
        return VideoRep(h=self.bigru(y), n_v=self.n_v, duration_seconds=duration_seconds)
