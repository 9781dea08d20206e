"""Symmetrical iterative attention and video-enhanced integration.

Two mirrored branches each apply the cross-modal encoder twice:
query->video then video->(video-aware query), and video->query then
query->(query-aware video). Their outputs are integrated along the
feature axis into the fused sequence M of width 2*d_h, with a learned
sigmoid filter controlling how much query information joins the video
features. Ablation modes swap this integration for simpler variants.
"""

from __future__ import annotations

import enum

import numpy as np

from . import autodiff as ad
from .attention import AttentionKind, CrossModalEncoderBlock
from .autodiff import Parameter, Tensor
from .nn import LayerNorm, Linear, Module, glorot_uniform


class FusionKind(enum.Enum):
    FULL = "full"
    QV_ONLY = "qv_only"  # query->video branch alone, gated integration
    VQ_ONLY = "vq_only"  # video->query branch alone, gated integration
    VIDEO_ONLY = "video_only"  # one query-aware video encoder, no query path
    CONCAT = "concat"  # both branches, plain feature concat
    MATRIX = "matrix"  # both branches, matrix ops instead of the gate


class SequenceLengthProjection(Module):
    """Project a fixed-length query sequence onto the video length along
    the sequence axis; bias is per output row, broadcast over features."""

    def __init__(self, n_q: int, n_v: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Parameter(glorot_uniform(rng, n_q, n_v, (n_v, n_q)))
        self.bias = Parameter(np.zeros((n_v, 1)))

    def __call__(self, q: Tensor) -> Tensor:
        if q.shape[0] != self.weight.shape[1]:
            raise ad.ShapeError(
                f"query length {q.shape[0]} != configured max {self.weight.shape[1]}"
            )
        return ad.matmul(self.weight, q) + self.bias


class CrossModalFusion(Module):
    """Builds only the blocks the selected mode needs; every mode ends
    in the shared output layer norm so M is always [n_v, 2*d_h]."""

    def __init__(
        self,
        d_h: int,
        heads: int,
        n_v: int,
        max_nq: int,
        rng: np.random.Generator,
        attention: AttentionKind = AttentionKind.GATED,
        mode: FusionKind = FusionKind.FULL,
        ffn_multiple: int = 4,
    ):
        super().__init__()
        self.mode = mode
        self.d_h = d_h

        def block():
            return CrossModalEncoderBlock(d_h, heads, rng, kind=attention, ffn_multiple=ffn_multiple)

        both = mode in (FusionKind.FULL, FusionKind.CONCAT, FusionKind.MATRIX)
        if both or mode is FusionKind.QV_ONLY:
            self.qv_first = block()  # query attends to video
            self.qv_second = block()  # video attends to the integrated query
        if both or mode in (FusionKind.VQ_ONLY, FusionKind.VIDEO_ONLY):
            self.vq_first = block()  # video attends to query
            if mode is not FusionKind.VIDEO_ONLY:
                self.vq_second = block()  # query attends to the integrated video

        gated = mode in (FusionKind.FULL, FusionKind.QV_ONLY, FusionKind.VQ_ONLY)
        if mode in (FusionKind.FULL, FusionKind.QV_ONLY):
            self.project_q1 = SequenceLengthProjection(max_nq, n_v, rng)
        if mode in (FusionKind.FULL, FusionKind.VQ_ONLY):
            self.project_q2 = SequenceLengthProjection(max_nq, n_v, rng)
        if gated:
            self.filter_w = Parameter(glorot_uniform(rng, 2 * d_h, 2 * d_h))
            self.filter_b = Parameter(np.zeros(2 * d_h))
        if mode is FusionKind.MATRIX:
            self.matrix_proj = Linear(4 * d_h, 2 * d_h, rng)
        if mode is FusionKind.VIDEO_ONLY:
            self.up_proj = Linear(d_h, 2 * d_h, rng)
        self.out_norm = LayerNorm(2 * d_h)

    # -- branches ----------------------------------------------------------

    def query_video_branch(self, q: Tensor, v: Tensor, query_mask=None):
        q1 = self.qv_first(q, v)
        v1 = self.qv_second(v, q1, key_mask=query_mask)
        return q1, v1

    def video_query_branch(self, q: Tensor, v: Tensor, query_mask=None):
        v2 = self.vq_first(v, q, key_mask=query_mask)
        q2 = self.vq_second(q, v2) if self.mode is not FusionKind.VIDEO_ONLY else None
        return v2, q2

    # -- integration ---------------------------------------------------------

    def _gated(self, v_hat: Tensor, q_hat: Tensor) -> Tensor:
        r = ad.sigmoid(ad.matmul(q_hat, self.filter_w) + self.filter_b)
        return self.out_norm(v_hat + r * q_hat)

    def __call__(self, q: Tensor, v: Tensor, query_mask=None) -> Tensor:
        mode = self.mode
        if mode in (FusionKind.FULL, FusionKind.CONCAT, FusionKind.MATRIX):
            q1, v1 = self.query_video_branch(q, v, query_mask)
            v2, q2 = self.video_query_branch(q, v, query_mask)
            if mode is FusionKind.CONCAT:
                return self.out_norm(ad.concat([v1, v2], axis=1))
            if mode is FusionKind.MATRIX:
                stacked = ad.concat([v1, v2, v1 - v2, v1 * v2], axis=1)
                return self.out_norm(self.matrix_proj(stacked))
            v_hat = ad.concat([v1, v2], axis=1)
            q_hat = ad.concat([self.project_q1(q1), self.project_q2(q2)], axis=1)
            return self._gated(v_hat, q_hat)
        if mode is FusionKind.QV_ONLY:
            q1, v1 = self.query_video_branch(q, v, query_mask)
            qp = self.project_q1(q1)
            return self._gated(ad.concat([v1, v1], axis=1), ad.concat([qp, qp], axis=1))
        if mode is FusionKind.VQ_ONLY:
            v2, q2 = self.video_query_branch(q, v, query_mask)
            qp = self.project_q2(q2)
            return self._gated(ad.concat([v2, v2], axis=1), ad.concat([qp, qp], axis=1))
        if mode is FusionKind.VIDEO_ONLY:
            v2, _ = self.video_query_branch(q, v, query_mask)
            return self.out_norm(self.up_proj(v2))
        raise ValueError(f"unhandled fusion mode {mode}")
