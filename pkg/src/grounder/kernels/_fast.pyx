# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrent-scan kernels.

Same contract as ``_pure``: GRU scan forward and backward over
pre-projected inputs, gate layout [reset | update | candidate].
"""

import numpy as np

from libc.math cimport exp, tanh

ctypedef fused real:
    float
    double


cdef inline real _sig(real x) noexcept nogil:
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    cdef real e = exp(x)
    return e / (1.0 + e)


def gru_seq_forward(real[:, ::1] xp, real[:, ::1] wh):
    cdef Py_ssize_t L = xp.shape[0]
    cdef Py_ssize_t h3 = xp.shape[1]
    cdef Py_ssize_t hs = h3 // 3
    dtype = np.float32 if real is float else np.float64

    h_arr = np.empty((L, hs), dtype=dtype)
    r_arr = np.empty((L, hs), dtype=dtype)
    z_arr = np.empty((L, hs), dtype=dtype)
    n_arr = np.empty((L, hs), dtype=dtype)
    hpn_arr = np.empty((L, hs), dtype=dtype)
    hp_arr = np.empty(h3, dtype=dtype)

    cdef real[:, ::1] h = h_arr
    cdef real[:, ::1] r = r_arr
    cdef real[:, ::1] z = z_arr
    cdef real[:, ::1] n = n_arr
    cdef real[:, ::1] hpn = hpn_arr
    cdef real[::1] hp = hp_arr

    cdef Py_ssize_t t, i, j
    cdef real acc, r_t, z_t, n_t, prev

    with nogil:
        for t in range(L):
            for j in range(h3):
                acc = 0
                if t > 0:
                    for i in range(hs):
                        acc = acc + h[t - 1, i] * wh[i, j]
                hp[j] = acc
            for i in range(hs):
                prev = h[t - 1, i] if t > 0 else <real>0
                r_t = _sig(xp[t, i] + hp[i])
                z_t = _sig(xp[t, hs + i] + hp[hs + i])
                n_t = tanh(xp[t, 2 * hs + i] + r_t * hp[2 * hs + i])
                r[t, i] = r_t
                z[t, i] = z_t
                n[t, i] = n_t
                hpn[t, i] = hp[2 * hs + i]
                h[t, i] = (1 - z_t) * n_t + z_t * prev

    return h_arr, r_arr, z_arr, n_arr, hpn_arr


def gru_seq_backward(real[:, ::1] wh,
                     real[:, ::1] h,
                     real[:, ::1] r,
                     real[:, ::1] z,
                     real[:, ::1] n,
                     real[:, ::1] hpn,
                     real[:, ::1] dh_out):
    cdef Py_ssize_t L = h.shape[0]
    cdef Py_ssize_t hs = h.shape[1]
    cdef Py_ssize_t h3 = 3 * hs
    dtype = np.float32 if real is float else np.float64

    dxp_arr = np.empty((L, h3), dtype=dtype)
    dwh_arr = np.zeros((hs, h3), dtype=dtype)
    carry_arr = np.zeros(hs, dtype=dtype)
    dhp_arr = np.empty(h3, dtype=dtype)

    cdef real[:, ::1] dxp = dxp_arr
    cdef real[:, ::1] dwh = dwh_arr
    cdef real[::1] carry = carry_arr
    cdef real[::1] dhp = dhp_arr

    cdef Py_ssize_t t, i, j
    cdef real dh, dz, dn, dn_pre, dr, dr_pre, dz_pre, prev, acc

    with nogil:
        for t in range(L - 1, -1, -1):
            for i in range(hs):
                prev = h[t - 1, i] if t > 0 else <real>0
                dh = dh_out[t, i] + carry[i]
                dz = dh * (prev - n[t, i])
                dn = dh * (1 - z[t, i])
                carry[i] = dh * z[t, i]
                dn_pre = dn * (1 - n[t, i] * n[t, i])
                dr = dn_pre * hpn[t, i]
                dz_pre = dz * z[t, i] * (1 - z[t, i])
                dr_pre = dr * r[t, i] * (1 - r[t, i])
                dxp[t, i] = dr_pre
                dxp[t, hs + i] = dz_pre
                dxp[t, 2 * hs + i] = dn_pre
                dhp[i] = dr_pre
                dhp[hs + i] = dz_pre
                dhp[2 * hs + i] = dn_pre * r[t, i]
            if t > 0:
                for i in range(hs):
                    prev = h[t - 1, i]
                    for j in range(h3):
                        dwh[i, j] = dwh[i, j] + prev * dhp[j]
            for i in range(hs):
                acc = carry[i]
                for j in range(h3):
                    acc = acc + dhp[j] * wh[i, j]
                carry[i] = acc

    return dxp_arr, dwh_arr
