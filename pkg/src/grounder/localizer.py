"""Content-oriented localization.

A contextual biGRU runs over the fused sequence M; multi-scale
overlapped windows are scored by kernel-wide temporal 1-D convolutions
(one filter for the confidence logit, two for the boundary offsets), so
every window is judged from all features it covers. Training losses,
boundary refinement, NMS and the Rank@n/IoU@m metrics live here too.

Window coordinates are 1-based inclusive frame indices; IoU treats
(s, e) as the continuous interval [s, e] of length e - s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .nn import BiGRU, Module, ModuleList

CONFIDENCE_EPS = 1e-7


@dataclass(frozen=True)
class Window:
    start: int  # 1-based first frame covered
    end: int  # inclusive last frame, end - start + 1 == scale
    scale: int  # kernel size that produced it


@dataclass
class ScoredWindows:
    """Per-window confidence and offsets, aligned 1:1 with ``windows``."""

    windows: list[Window]
    confidence: Tensor  # [N]
    offsets: Tensor  # [N, 2] predicted (start, end) offsets in frames


@dataclass
class LabeledWindows:
    iou: np.ndarray  # [N]
    positive: np.ndarray  # bool [N], iou strictly above the threshold
    offset_targets: np.ndarray  # [N, 2], zeros on negatives

    @property
    def n_pos(self) -> int:
        return int(self.positive.sum())

    @property
    def n_neg(self) -> int:
        return int((~self.positive).sum())


@dataclass
class Candidate:
    start: float  # refined, possibly fractional frame coordinates
    end: float
    score: float
    window: Window


def stride_for(kernel: int, stride_ratio: float, stride_frames: int = 0) -> int:
    """Stride rule: an absolute frame count when given, otherwise
    round(ratio * kernel) with a floor of one frame."""
    if stride_frames:
        return int(stride_frames)
    return max(1, round(stride_ratio * kernel))


def enumerate_windows(
    n_v: int, kernel_sizes, stride_ratio: float, stride_frames: int = 0
):
    """All candidate windows, scale-major then start-minor.

    Starts run 1, 1+stride, ... while start + k - 1 <= n_v, matching the
    conv1d grid exactly. Scales longer than the video are skipped and
    reported in the returned warning list.
    """
    windows: list[Window] = []
    warnings: list[str] = []
    for k in kernel_sizes:
        if k > n_v:
            warnings.append(f"kernel {k} exceeds video length {n_v}; scale skipped")
            continue
        stride = stride_for(k, stride_ratio, stride_frames)
        for start in range(1, n_v - k + 2, stride):
            windows.append(Window(start=start, end=start + k - 1, scale=k))
    return windows, warnings


def interval_iou(a, b) -> float:
    """IoU of two continuous intervals given as (start, end), end > start."""
    sa, ea = float(a[0]), float(a[1])
    sb, eb = float(b[0]), float(b[1])
    if ea <= sa or eb <= sb:
        raise ValueError(f"degenerate segment: {a} vs {b}")
    overlap = max(0.0, min(ea, eb) - max(sa, sb))
    union = (ea - sa) + (eb - sb) - overlap
    return overlap / union


def label_windows(windows, gt, tau: float) -> LabeledWindows:
    """IoU-label windows against the ground-truth segment; positives
    (IoU strictly above tau) carry frame-unit offset targets."""
    n = len(windows)
    iou = np.empty(n)
    targets = np.zeros((n, 2))
    for i, w in enumerate(windows):
        iou[i] = interval_iou((w.start, w.end), gt)
    positive = iou > tau
    for i, w in enumerate(windows):
        if positive[i]:
            targets[i, 0] = gt[0] - w.start
            targets[i, 1] = gt[1] - w.end
    return LabeledWindows(iou=iou, positive=positive, offset_targets=targets)


class ScaleHead(Module):
    """Two temporal convolutions for one window scale: a single-filter
    confidence conv and a two-filter offset conv on the same grid."""

    def __init__(self, d: int, kernel: int, stride: int, rng: np.random.Generator):
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        limit = ad.glorot_limit(kernel * d, 1)
        self.score_filters = Parameter(rng.uniform(-limit, limit, (1, kernel, d)))
        self.score_bias = Parameter(np.zeros(1))
        self.offset_filters = Parameter(rng.uniform(-limit, limit, (2, kernel, d)))
        self.offset_bias = Parameter(np.zeros(2))

    def __call__(self, seq: Tensor):
        logits = ad.conv1d(seq, self.score_filters, self.score_bias, self.stride)
        offsets = ad.conv1d(seq, self.offset_filters, self.offset_bias, self.stride)
        return logits, offsets


class MomentLocalizer(Module):
    """biGRU context over M plus one ScaleHead per usable kernel size."""

    def __init__(
        self,
        d_in: int,
        d_h: int,
        n_v: int,
        kernel_sizes,
        stride_ratio: float,
        rng: np.random.Generator,
        stride_frames: int = 0,
    ):
        super().__init__()
        self.n_v = n_v
        self.windows, self.skipped = enumerate_windows(
            n_v, kernel_sizes, stride_ratio, stride_frames
        )
        self.bigru = BiGRU(d_in, d_h, rng)
        self.heads = ModuleList()
        self.scales = []
        for k in kernel_sizes:
            if k > n_v:
                continue
            self.heads.append(ScaleHead(d_h, k, stride_for(k, stride_ratio, stride_frames), rng))
            self.scales.append(k)

    def __call__(self, m: Tensor) -> ScoredWindows:
        seq = self.bigru(m)
        logits_parts = []
        offset_parts = []
        count = 0
        for head in self.heads:
            logits, offsets = head(seq)
            logits_parts.append(logits)
            offset_parts.append(offsets)
            count += logits.shape[0]
        if count != len(self.windows):
            raise RuntimeError(
                f"conv grid produced {count} windows, enumeration has {len(self.windows)}"
            )
        confidence = ad.sigmoid(ad.reshape(ad.concat(logits_parts, axis=0), (count,)))
        return ScoredWindows(
            windows=self.windows,
            confidence=confidence,
            offsets=ad.concat(offset_parts, axis=0),
        )


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def alignment_loss(confidence: Tensor, labels: LabeledWindows) -> Tensor:
    """Cross-entropy between predicted confidence and window IoU, averaged
    separately over positives and negatives; an empty partition adds 0."""
    cs = ad.clamp(confidence, CONFIDENCE_EPS, 1.0 - CONFIDENCE_EPS)
    o = Tensor(labels.iou)
    per = o * ad.log(cs) + (1.0 - o) * ad.log(1.0 - cs)
    loss = Tensor(0.0)
    if labels.n_pos:
        loss = loss + ad.tsum(per * Tensor(labels.positive.astype(float))) * (
            -1.0 / labels.n_pos
        )
    if labels.n_neg:
        loss = loss + ad.tsum(per * Tensor((~labels.positive).astype(float))) * (
            -1.0 / labels.n_neg
        )
    return loss


def boundary_loss(offsets: Tensor, labels: LabeledWindows) -> Tensor:
    """Smooth-L1 on start/end offsets of positive windows (0 if none)."""
    if labels.n_pos == 0:
        return Tensor(0.0)
    diff = offsets - Tensor(labels.offset_targets)
    per = ad.smooth_l1(diff)
    mask = Tensor(labels.positive.astype(float)[:, None])
    return ad.tsum(per * mask) * (1.0 / labels.n_pos)


def total_loss(scored: ScoredWindows, labels: LabeledWindows, alpha: float):
    align = alignment_loss(scored.confidence, labels)
    bound = boundary_loss(scored.offsets, labels)
    return align + alpha * bound, align, bound


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def refine_window(window: Window, d_start: float, d_end: float, n_v: int):
    """Apply predicted offsets, clamped to [1, n_v]; a collapsed result
    falls back to the unrefined window."""
    s = min(max(window.start + d_start, 1.0), float(n_v))
    e = min(max(window.end + d_end, 1.0), float(n_v))
    if e <= s:
        return float(window.start), float(window.end)
    return s, e


def nms(candidates: list[Candidate], keep_n: int, threshold: float) -> list[Candidate]:
    """Greedy suppression by descending score; drop any candidate whose
    IoU with an already-kept segment exceeds the threshold."""
    ordered = sorted(candidates, key=lambda c: (-c.score, c.start, c.end))
    kept: list[Candidate] = []
    for cand in ordered:
        if len(kept) >= keep_n:
            break
        if any(
            interval_iou((cand.start, cand.end), (k.start, k.end)) > threshold
            for k in kept
        ):
            continue
        kept.append(cand)
    return kept


def candidates_from(scored: ScoredWindows, n_v: int) -> list[Candidate]:
    conf = scored.confidence.numpy()
    offs = scored.offsets.numpy()
    out = []
    for i, w in enumerate(scored.windows):
        s, e = refine_window(w, float(offs[i, 0]), float(offs[i, 1]), n_v)
        out.append(Candidate(start=s, end=e, score=float(conf[i]), window=w))
    return out


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def rank_metrics(predictions, ground_truths, n_list, m_list) -> dict:
    """Fraction of queries with at least one of the top-n predictions
    exceeding IoU m. ``predictions`` is a list (one entry per query) of
    ordered (start, end) segments; empty lists count as misses."""
    if len(predictions) != len(ground_truths):
        raise ValueError("predictions and ground truths differ in length")
    total = len(ground_truths)
    table = {}
    for n in n_list:
        for m in m_list:
            hits = 0
            for preds, gt in zip(predictions, ground_truths):
                for seg in preds[:n]:
                    if interval_iou((seg[0], seg[1]), gt) > m:
                        hits += 1
                        break
            table[(n, m)] = hits / total if total else 0.0
    return table


def format_metric_table(table: dict) -> str:
    ns = sorted({n for n, _ in table})
    ms = sorted({m for _, m in table})
    lines = ["metric " + " ".join(f"IoU>{m:g}" for m in ms)]
    for n in ns:
        row = " ".join(f"{table[(n, m)]:.4f}" for m in ms)
        lines.append(f"R@{n}    {row}")
    return "\n".join(lines)


def start_seconds(frame: float, n_v: int, duration: float) -> float:
    return (frame - 1.0) / n_v * duration


def end_seconds(frame: float, n_v: int, duration: float) -> float:
    return frame / n_v * duration
