"""Numba-accelerated density-matrix kernels for the noisy backend.

The bandwidth-bound operations fuse the unitary conjugation of a gate
with the symmetric depolarizing channel on the gate's own qubits, so a
moment costs roughly one array pass per qubit instead of three.  Plain
numpy fallbacks in circuits.py keep everything working without numba.
Layout: rho is C-order (dim, dim); qubit q has stride 2^(n-1-q).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f
        return wrap

    prange = range


@njit(cache=True, parallel=True)
def conj_1q_depol(rho, u00, u01, u10, u11, stride, dim, p):
    """rho -> D_q(U rho U^dag) in one pass over 2x2 sub-blocks."""
    c00, c01, c10, c11 = np.conj(u00), np.conj(u01), np.conj(u10), np.conj(u11)
    f = 1.0 - 4.0 * p
    tp = 2.0 * p
    half = dim // 2
    for rb in prange(half):
        rlow = rb % stride
        rhigh = (rb // stride) * (2 * stride)
        r0 = rhigh + rlow
        r1 = r0 + stride
        for cb in range(half):
            clow = cb % stride
            chigh = (cb // stride) * (2 * stride)
            c0 = chigh + clow
            c1 = c0 + stride
            m00 = rho[r0, c0]
            m01 = rho[r0, c1]
            m10 = rho[r1, c0]
            m11 = rho[r1, c1]
            # U M
            a00 = u00 * m00 + u01 * m10
            a01 = u00 * m01 + u01 * m11
            a10 = u10 * m00 + u11 * m10
            a11 = u10 * m01 + u11 * m11
            # (U M) U^dag ; (U^dag)[j,k] = conj(u[k,j])
            b00 = a00 * c00 + a01 * c01
            b01 = a00 * c10 + a01 * c11
            b10 = a10 * c00 + a11 * c01
            b11 = a10 * c10 + a11 * c11
            if p > 0.0:
                tr = b00 + b11
                b00 = f * b00 + tp * tr
                b11 = f * b11 + tp * tr
                b01 = f * b01
                b10 = f * b10
            rho[r0, c0] = b00
            rho[r0, c1] = b01
            rho[r1, c0] = b10
            rho[r1, c1] = b11


@njit(cache=True, parallel=True)
def conj_2q_depol(rho, u, s0, s1, dim, p):
    """rho -> D_q1 D_q0 (U rho U^dag) over 4x4 sub-blocks, one pass."""
    ud = np.conj(u).T.copy()
    f = 1.0 - 4.0 * p
    tp = 2.0 * p
    smin = min(s0, s1)
    mrange = max(s0, s1) // (2 * smin)
    smax = max(s0, s1)
    quarter = dim // 4
    for rb in prange(quarter):
        rlow = rb % smin
        rmid = (rb // smin) % mrange
        rtop = (rb // smin) // mrange
        rbase = rtop * 2 * smax + rmid * 2 * smin + rlow
        r = np.empty(4, dtype=np.int64)
        r[0] = rbase
        r[1] = rbase + s1
        r[2] = rbase + s0
        r[3] = rbase + s0 + s1
        # per-thread work buffers, reused across the column loop
        m = np.empty((4, 4), dtype=rho.dtype)
        a = np.empty((4, 4), dtype=rho.dtype)
        b = np.empty((4, 4), dtype=rho.dtype)
        for cb in range(quarter):
            clow = cb % smin
            cmid = (cb // smin) % mrange
            ctop = (cb // smin) // mrange
            cbase = ctop * 2 * smax + cmid * 2 * smin + clow
            c0 = cbase
            c1 = cbase + s1
            c2 = cbase + s0
            c3 = cbase + s0 + s1
            for i in range(4):
                m[i, 0] = rho[r[i], c0]
                m[i, 1] = rho[r[i], c1]
                m[i, 2] = rho[r[i], c2]
                m[i, 3] = rho[r[i], c3]
            for i in range(4):
                for j in range(4):
                    acc = m[i, 0] * ud[0, j]
                    acc += m[i, 1] * ud[1, j]
                    acc += m[i, 2] * ud[2, j]
                    acc += m[i, 3] * ud[3, j]
                    a[i, j] = acc
            for i in range(4):
                for j in range(4):
                    acc = u[i, 0] * a[0, j]
                    acc += u[i, 1] * a[1, j]
                    acc += u[i, 2] * a[2, j]
                    acc += u[i, 3] * a[3, j]
                    b[i, j] = acc
            if p > 0.0:
                # depol on the s1 qubit: pairs (0,1), (2,3) of block indices
                for i0 in (0, 2):
                    for j0 in (0, 2):
                        t00 = b[i0, j0]
                        t11 = b[i0 + 1, j0 + 1]
                        tr = t00 + t11
                        b[i0, j0] = f * t00 + tp * tr
                        b[i0 + 1, j0 + 1] = f * t11 + tp * tr
                        b[i0, j0 + 1] = f * b[i0, j0 + 1]
                        b[i0 + 1, j0] = f * b[i0 + 1, j0]
                # depol on the s0 qubit: pairs (0,2), (1,3)
                for i0 in (0, 1):
                    for j0 in (0, 1):
                        t00 = b[i0, j0]
                        t11 = b[i0 + 2, j0 + 2]
                        tr = t00 + t11
                        b[i0, j0] = f * t00 + tp * tr
                        b[i0 + 2, j0 + 2] = f * t11 + tp * tr
                        b[i0, j0 + 2] = f * b[i0, j0 + 2]
                        b[i0 + 2, j0] = f * b[i0 + 2, j0]
            for i in range(4):
                rho[r[i], c0] = b[i, 0]
                rho[r[i], c1] = b[i, 1]
                rho[r[i], c2] = b[i, 2]
                rho[r[i], c3] = b[i, 3]


@njit(cache=True, parallel=True)
def depolarize(rho, stride, dim, p):
    """Standalone symmetric depolarizing channel on one qubit."""
    f = 1.0 - 4.0 * p
    tp = 2.0 * p
    half = dim // 2
    for rb in prange(half):
        rlow = rb % stride
        rhigh = (rb // stride) * (2 * stride)
        r0 = rhigh + rlow
        r1 = r0 + stride
        for cb in range(half):
            clow = cb % stride
            chigh = (cb // stride) * (2 * stride)
            c0 = chigh + clow
            c1 = c0 + stride
            t00 = rho[r0, c0]
            t11 = rho[r1, c1]
            tr = t00 + t11
            rho[r0, c0] = f * t00 + tp * tr
            rho[r1, c1] = f * t11 + tp * tr
            rho[r0, c1] = f * rho[r0, c1]
            rho[r1, c0] = f * rho[r1, c0]


@njit(cache=True, parallel=True)
def z_drift(rho, stride, dim, angle):
    ph = np.exp(-1j * angle)
    phc = np.conj(ph)
    half = dim // 2
    for rb in prange(half):
        rlow = rb % stride
        rhigh = (rb // stride) * (2 * stride)
        r0 = rhigh + rlow
        r1 = r0 + stride
        for c in range(dim):
            rho[r1, c] = ph * rho[r1, c]
    for cb in prange(half):
        clow = cb % stride
        chigh = (cb // stride) * (2 * stride)
        c0 = chigh + clow
        c1 = c0 + stride
        for r in range(dim):
            rho[r, c1] = phc * rho[r, c1]
