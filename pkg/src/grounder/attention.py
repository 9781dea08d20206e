"""Cross-modal attention blocks.

Three interchangeable attention kinds feed the cross-modal encoder:

* multi-head scaled dot-product attention between modalities,
* the gated variant (an information gate, conditioned on the attending
  side, filters the multi-head output), and
* plain single-space soft attention (no head split, no projections).

Each encoder block wraps one of them with residual + post-norm and a
position-wise feed-forward layer.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .nn import LayerNorm, Module, glorot_uniform

MASKED_LOGIT = -1e9


class AttentionKind(enum.Enum):
    GATED = "gated"
    MULTI_HEAD = "multihead"
    SOFT = "soft"


def _mask_bias(key_mask) -> Tensor | None:
    """Additive [1, n_keys] logit bias: 0 at valid keys, -1e9 at padding."""
    if key_mask is None:
        return None
    m = np.asarray(key_mask, dtype=bool)
    return Tensor(np.where(m, 0.0, MASKED_LOGIT)[None, :])


class MultiHeadCrossAttention(Module):
    """Scaled dot-product attention from a query sequence onto a value
    sequence, with ``heads`` parallel subspaces of width d_h/heads."""

    def __init__(self, d_h: int, heads: int, rng: np.random.Generator):
        super().__init__()
        if d_h % heads != 0:
            raise ValueError(f"d_h={d_h} not divisible by heads={heads}")
        self.d_h = d_h
        self.heads = heads
        self.d_k = d_h // heads
        self.w_q = Parameter(glorot_uniform(rng, d_h, d_h))
        self.w_k = Parameter(glorot_uniform(rng, d_h, d_h))
        self.w_v = Parameter(glorot_uniform(rng, d_h, d_h))
        self.w_o = Parameter(glorot_uniform(rng, d_h, d_h))

    def __call__(self, q: Tensor, v: Tensor, key_mask=None, return_weights=False):
        qp = ad.matmul(q, self.w_q)
        kp = ad.matmul(v, self.w_k)
        vp = ad.matmul(v, self.w_v)
        bias = _mask_bias(key_mask)
        scale = 1.0 / math.sqrt(self.d_k)
        outs = []
        weights = []
        for h in range(self.heads):
            cols = slice(h * self.d_k, (h + 1) * self.d_k)
            logits = ad.matmul(qp[:, cols], ad.transpose(kp[:, cols])) * scale
            if bias is not None:
                logits = logits + bias
            attn = ad.softmax_rows(logits)
            if return_weights:
                weights.append(attn.data.copy())
            outs.append(ad.matmul(attn, vp[:, cols]))
        out = ad.matmul(ad.concat(outs, axis=1), self.w_o)
        return (out, weights) if return_weights else out


class GatedCrossAttention(Module):
    """Multi-head cross attention filtered by a sigmoid information gate.

    The gate and content branches share their projection weights (a
    single linear map of [query, attended] per branch input); only the
    two bias vectors differ, so the pre-activation tensor is computed
    once.
    """

    def __init__(self, d_h: int, heads: int, rng: np.random.Generator):
        super().__init__()
        self.mha = MultiHeadCrossAttention(d_h, heads, rng)
        self.w_query = Parameter(glorot_uniform(rng, d_h, d_h))
        self.w_attended = Parameter(glorot_uniform(rng, d_h, d_h))
        self.gate_bias = Parameter(np.zeros(d_h))
        self.content_bias = Parameter(np.zeros(d_h))

    def __call__(self, q: Tensor, v: Tensor, key_mask=None) -> Tensor:
        attended = self.mha(q, v, key_mask=key_mask)
        lin = ad.matmul(q, self.w_query) + ad.matmul(attended, self.w_attended)
        gate = ad.sigmoid(lin + self.gate_bias)
        return gate * (lin + self.content_bias)


def soft_attention(q: Tensor, v: Tensor, key_mask=None, return_weights=False):
    """Single-space soft attention: softmax(q vᵀ / sqrt(d)) · v."""
    scale = 1.0 / math.sqrt(q.shape[-1])
    logits = ad.matmul(q, ad.transpose(v)) * scale
    bias = _mask_bias(key_mask)
    if bias is not None:
        logits = logits + bias
    weights = ad.softmax_rows(logits)
    out = ad.matmul(weights, v)
    return (out, weights.data.copy()) if return_weights else out


class CrossModalEncoderBlock(Module):
    """Attention sublayer + feed-forward sublayer, each wrapped in a
    residual connection with post-layer-norm; emits a value-aware query
    representation of the same length as the query input."""

    def __init__(
        self,
        d_h: int,
        heads: int,
        rng: np.random.Generator,
        kind: AttentionKind = AttentionKind.GATED,
        ffn_multiple: int = 4,
    ):
        super().__init__()
        self.kind = kind
        if kind is AttentionKind.GATED:
            self.attn = GatedCrossAttention(d_h, heads, rng)
        elif kind is AttentionKind.MULTI_HEAD:
            self.attn = MultiHeadCrossAttention(d_h, heads, rng)
        else:
            self.attn = None
        inner = ffn_multiple * d_h
        self.ffn_w1 = Parameter(glorot_uniform(rng, d_h, inner))
        self.ffn_b1 = Parameter(np.zeros(inner))
        self.ffn_w2 = Parameter(glorot_uniform(rng, inner, d_h))
        self.ffn_b2 = Parameter(np.zeros(d_h))
        self.norm_attn = LayerNorm(d_h)
        self.norm_ffn = LayerNorm(d_h)

    def _attend(self, q, v, key_mask):
        if self.attn is None:
            return soft_attention(q, v, key_mask=key_mask)
        return self.attn(q, v, key_mask=key_mask)

    def __call__(self, q: Tensor, v: Tensor, key_mask=None) -> Tensor:
        y1 = self.norm_attn(q + self._attend(q, v, key_mask))
        ffn = ad.matmul(ad.relu(ad.matmul(y1, self.ffn_w1) + self.ffn_b1), self.ffn_w2)
        return self.norm_ffn(y1 + (ffn + self.ffn_b2))
