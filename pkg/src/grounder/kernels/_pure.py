"""Pure-numpy recurrent-scan kernels (fallback for the compiled extension).

The GRU scan is the one loop in the model that cannot be vectorized over
time, so it is isolated here behind the same interface as the compiled
version in ``_fast.pyx``. Gate layout along the projected axis is
[reset | update | candidate], each of width H.
"""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[neg])
    out[neg] = ex / (1.0 + ex)
    return out


def gru_seq_forward(xp, wh):
    """Scan a GRU over pre-projected inputs.

    xp: [L, 3H] input projections (x @ W_x + b per step)
    wh: [H, 3H] recurrent weights
    Returns (h, r, z, n, hpn) where h is [L, H] and the rest are the
    per-step gate activations cached for the backward pass.
    """
    L, h3 = xp.shape
    hs = h3 // 3
    h = np.empty((L, hs), dtype=xp.dtype)
    r = np.empty_like(h)
    z = np.empty_like(h)
    n = np.empty_like(h)
    hpn = np.empty_like(h)
    h_prev = np.zeros(hs, dtype=xp.dtype)
    for t in range(L):
        hp = h_prev @ wh
        r_t = _sigmoid(xp[t, :hs] + hp[:hs])
        z_t = _sigmoid(xp[t, hs : 2 * hs] + hp[hs : 2 * hs])
        hpn_t = hp[2 * hs :]
        n_t = np.tanh(xp[t, 2 * hs :] + r_t * hpn_t)
        h_prev = (1.0 - z_t) * n_t + z_t * h_prev
        r[t], z[t], n[t], hpn[t], h[t] = r_t, z_t, n_t, hpn_t, h_prev
    return h, r, z, n, hpn


def gru_seq_backward(wh, h, r, z, n, hpn, dh_out):
    """Backpropagate through the scan produced by ``gru_seq_forward``.

    Returns (dxp, dwh): gradients for the input projections and the
    recurrent weights.
    """
    L, hs = h.shape
    dxp = np.empty((L, 3 * hs), dtype=h.dtype)
    dwh = np.zeros_like(wh)
    carry = np.zeros(hs, dtype=h.dtype)
    zero = np.zeros(hs, dtype=h.dtype)
    for t in range(L - 1, -1, -1):
        h_prev = h[t - 1] if t > 0 else zero
        dh = dh_out[t] + carry
        dz = dh * (h_prev - n[t])
        dn = dh * (1.0 - z[t])
        carry = dh * z[t]
        dn_pre = dn * (1.0 - n[t] * n[t])
        dr = dn_pre * hpn[t]
        dhp_n = dn_pre * r[t]
        dz_pre = dz * z[t] * (1.0 - z[t])
        dr_pre = dr * r[t] * (1.0 - r[t])
        dxp[t, :hs] = dr_pre
        dxp[t, hs : 2 * hs] = dz_pre
        dxp[t, 2 * hs :] = dn_pre
        dhp = np.concatenate([dr_pre, dz_pre, dhp_n])
        dwh += np.outer(h_prev, dhp)
        carry = carry + dhp @ wh.T
    return dxp, dwh
