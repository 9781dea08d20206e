"""Finite-difference verification of every differentiable operation.

All checks run in 64-bit mode with central differences (h = 1e-5);
32-bit finite differences are too noisy for the 1e-4 tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

H_STEP = 1e-5
TOLERANCE = 1e-4


@dataclass
class OpReport:
    name: str
    max_rel_error: float
    passed: bool


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    """Largest elementwise relative error.

    The denominator is floored so that finite-difference noise on
    near-zero gradients compares on an absolute scale instead of
    blowing up the ratio.
    """
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = diff / scale
    return float(rel.max()) if rel.size else 0.0


def numeric_gradients(scalar_fn, arrays, h: float = H_STEP):
    """Central-difference gradients of ``scalar_fn(arrays) -> float``."""
    grads = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = g.ravel()
        src = a.ravel()
        for i in range(src.size):
            orig = src[i]
            src[i] = orig + h
            up = scalar_fn(arrays)
            src[i] = orig - h
            down = scalar_fn(arrays)
            src[i] = orig
            flat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def check_function(fn, arrays, rng: np.random.Generator, h: float = H_STEP) -> float:
    """Compare reverse-mode gradients of ``fn(*tensors) -> Tensor`` against
    finite differences of a random linear functional of its output.
    Returns the max relative error across all inputs."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    out = fn(*tensors)
    proj = rng.standard_normal(out.shape) if out.shape else np.asarray(1.0)

    def scalar(arrs):
        ts = [Tensor(a, requires_grad=False) for a in arrs]
        return float((fn(*ts).data * proj).sum())

    loss = ad.tsum(ad.mul(out, Tensor(proj)))
    ad.backward(loss)
    numeric = numeric_gradients(scalar, [a.copy() for a in arrays], h=h)
    worst = 0.0
    for t, n in zip(tensors, numeric):
        analytic = t.grad if t.grad is not None else np.zeros_like(n)
        worst = max(worst, max_rel_error(analytic, n))
    return worst


def _away_from(x: np.ndarray, points, margin: float = 1e-3) -> np.ndarray:
    """Shift values clear of non-differentiable points."""
    for p in points:
        near = np.abs(x - p) < margin
        x = x + near * (2 * margin)
    return x


def _dims(rng, n=2, lo=1, hi=5):
    return tuple(int(rng.integers(lo, hi + 1)) for _ in range(n))


def op_checks(rng: np.random.Generator):
    """Yield (name, fn, arrays) triples covering every primitive."""
    m, k = _dims(rng)
    n = int(rng.integers(1, 6))
    yield "matmul", ad.matmul, [rng.standard_normal((m, k)), rng.standard_normal((k, n))]

    shape = _dims(rng)
    yield "add_broadcast", ad.add, [
        rng.standard_normal(shape),
        rng.standard_normal(shape[-1]),
    ]
    yield "mul", ad.mul, [rng.standard_normal(shape), rng.standard_normal(shape)]
    yield "power", lambda x: ad.power(x, 3.0), [rng.standard_normal(shape)]
    yield "relu", ad.relu, [_away_from(rng.standard_normal(shape), [0.0])]
    yield "sigmoid", ad.sigmoid, [rng.standard_normal(shape) * 3]
    yield "tanh", ad.tanh, [rng.standard_normal(shape) * 3]
    yield "exp", ad.exp, [rng.standard_normal(shape)]
    yield "log", ad.log, [rng.uniform(0.2, 3.0, shape)]
    yield "sqrt", ad.sqrt, [rng.uniform(0.2, 3.0, shape)]
    yield "clamp", lambda x: ad.clamp(x, -1.0, 1.0), [
        _away_from(rng.standard_normal(shape) * 2, [-1.0, 1.0])
    ]
    yield "smooth_l1", ad.smooth_l1, [
        _away_from(rng.standard_normal(shape) * 2, [-1.0, 1.0])
    ]

    rows, cols = _dims(rng, lo=2)
    yield "softmax_rows", ad.softmax_rows, [rng.standard_normal((rows, cols)) * 2]
    yield "layer_norm", ad.layer_norm, [
        rng.standard_normal((rows, cols)),
        rng.standard_normal(cols),
        rng.standard_normal(cols),
    ]
    yield "concat_last", lambda a, b: ad.concat([a, b], axis=-1), [
        rng.standard_normal((rows, cols)),
        rng.standard_normal((rows, cols + 1)),
    ]
    yield "concat_rows", lambda a, b: ad.concat([a, b], axis=0), [
        rng.standard_normal((rows, cols)),
        rng.standard_normal((rows + 2, cols)),
    ]
    yield "transpose", ad.transpose, [rng.standard_normal((rows, cols))]
    yield "reshape", lambda x: ad.reshape(x, (cols, rows)), [
        rng.standard_normal((rows, cols))
    ]
    yield "flip_rows", ad.flip_rows, [rng.standard_normal((rows, cols))]
    yield "slice_cols", lambda x: x[:, : max(1, cols // 2)], [
        rng.standard_normal((rows, cols))
    ]
    gather_ids = rng.integers(0, rows, size=6)
    yield "gather_rows", lambda x: x[gather_ids], [rng.standard_normal((rows, cols))]
    yield "sum_all", ad.tsum, [rng.standard_normal(shape)]
    yield "mean_axis", lambda x: ad.tmean(x, axis=0), [
        rng.standard_normal((rows, cols))
    ]

    L = int(rng.integers(4, 9))
    d = int(rng.integers(1, 5))
    kk = int(rng.integers(1, L + 1))
    cf = int(rng.integers(1, 4))
    stride = int(rng.integers(1, 3))
    yield "conv1d", lambda s, f, b: ad.conv1d(s, f, b, stride), [
        rng.standard_normal((L, d)),
        rng.standard_normal((cf, kk, d)),
        rng.standard_normal(cf),
    ]

    hs = int(rng.integers(1, 5))
    yield "gru_cell", lambda x, hp, wx, wh, b: ad.gru_cell(x, hp, wx, wh, b), [
        rng.standard_normal(d),
        rng.standard_normal(hs),
        rng.standard_normal((d, 3 * hs)),
        rng.standard_normal((hs, 3 * hs)),
        rng.standard_normal(3 * hs),
    ]
    yield "gru_sequence", ad.gru_sequence, [
        rng.standard_normal((L, 3 * hs)),
        rng.standard_normal((hs, 3 * hs)),
    ]

    # shared subexpression: gradient contributions must accumulate
    yield "shared_subexpr", lambda x: ad.tsum(ad.mul(x, x) + x), [
        rng.standard_normal(shape)
    ]


def check_all_ops(seed: int) -> list[OpReport]:
    reports = []
    with ad.precision("float64"):
        rng = np.random.default_rng(seed)
        for name, fn, arrays in op_checks(rng):
            err = check_function(fn, arrays, rng)
            reports.append(OpReport(name, err, err < TOLERANCE))
    return reports


def check_model_parameters(
    loss_fn, params: dict, rng: np.random.Generator, samples_per_param: int = 4
) -> float:
    """Spot-check d(loss)/d(param) for random elements of every parameter.

    ``loss_fn()`` must rebuild the loss from current parameter data and
    return a scalar Tensor; gradients are taken from one reverse sweep.
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    ad.backward(loss)
    worst = 0.0
    for name, p in params.items():
        if p.grad is None:
            raise RuntimeError(f"no gradient reached parameter {name!r}")
        flat = p.data.ravel()
        gflat = p.grad.ravel()
        count = min(samples_per_param, flat.size)
        idx = rng.choice(flat.size, size=count, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + H_STEP
            up = loss_fn().item()
            flat[i] = orig - H_STEP
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * H_STEP)
            worst = max(worst, max_rel_error(np.asarray(gflat[i]), np.asarray(numeric)))
    return worst


def format_report(reports: list[OpReport]) -> str:
    lines = []
    for r in reports:
        status = "ok" if r.passed else "FAIL"
        lines.append(f"{r.name:<18} max_rel_err={r.max_rel_error:.3e}  [{status}]")
    return "\n".join(lines)
