"""Compiled inner loop of the semi-implicit thin-film step.

One call advances every row of a ``(B, M)`` stack by its own ``dt``.  The
cyclic pentadiagonal system is solved by unpivoted band elimination plus a
rank-4 Woodbury correction; rows whose backward error exceeds the
tolerance are flagged so the caller can redo them with the pivoted LAPACK
route in :mod:`thinfilm.banded`.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _solve4(A, y):
    """Gaussian elimination with partial pivoting on a 4x4 system, in place."""
    for k in range(4):
        piv = k
        big = abs(A[k, k])
        for i in range(k + 1, 4):
            if abs(A[i, k]) > big:
                big = abs(A[i, k])
                piv = i
        if piv != k:
            for j in range(4):
                A[k, j], A[piv, j] = A[piv, j], A[k, j]
            y[k], y[piv] = y[piv], y[k]
        for i in range(k + 1, 4):
            f = A[i, k] / A[k, k]
            for j in range(k, 4):
                A[i, j] -= f * A[k, j]
            y[i] -= f * y[k]
    for k in range(3, -1, -1):
        acc = y[k]
        for j in range(k + 1, 4):
            acc -= A[k, j] * y[j]
        y[k] = acc / A[k, k]


@njit(cache=True)
def _band_solve(a, b, c, d, e, R):
    """In-place unpivoted solve of the non-cyclic band; ``R`` is (M, k)."""
    M = c.shape[0]
    k = R.shape[1]
    for i in range(M - 1):
        piv = c[i]
        l1 = b[i + 1] / piv
        c[i + 1] -= l1 * d[i]
        d[i + 1] -= l1 * e[i]
        for j in range(k):
            R[i + 1, j] -= l1 * R[i, j]
        if i + 2 < M:
            l2 = a[i + 2] / piv
            b[i + 2] -= l2 * d[i]
            c[i + 2] -= l2 * e[i]
            for j in range(k):
                R[i + 2, j] -= l2 * R[i, j]
    for j in range(k):
        R[M - 1, j] /= c[M - 1]
        R[M - 2, j] = (R[M - 2, j] - d[M - 2] * R[M - 1, j]) / c[M - 2]
    for i in range(M - 3, -1, -1):
        for j in range(k):
            R[i, j] = (R[i, j] - d[i] * R[i + 1, j] - e[i] * R[i + 2, j]) / c[i]


@njit(cache=True)
def _pad(v, vp):
    """Copy ``v`` into ``vp`` with two ghost cells on either side."""
    M = v.shape[0]
    for i in range(M):
        vp[i + 2] = v[i]
    vp[0] = v[M - 2]
    vp[1] = v[M - 1]
    vp[M + 2] = v[0]
    vp[M + 3] = v[1]


@njit(cache=True)
def step_rows(V, dt, dx, n, eps, tol):
    B, M = V.shape
    out = np.empty_like(V)
    e0 = np.empty(B)
    e1 = np.empty(B)
    flux = np.empty(B)
    resid_ok = np.ones(B, dtype=np.bool_)

    vp = np.empty(M + 4)
    wp = np.empty(M + 4)
    m = np.empty(M + 1)  # m[i + 1] is the mobility of face i; m[0] is face M - 1
    g = np.empty(M + 1)
    a = np.empty(M)
    b = np.empty(M)
    c = np.empty(M)
    d = np.empty(M)
    e = np.empty(M)
    rhs = np.empty(M)
    R = np.empty((M, 5))
    ac = np.empty(M)
    bc = np.empty(M)
    cc = np.empty(M)
    dc = np.empty(M)
    ec = np.empty(M)
    weight = np.empty(M)
    cap = np.empty((4, 4))
    cy = np.empty(4)
    inv_dx3 = 1.0 / dx**3

    for p in range(B):
        _pad(V[p], vp)
        h = dt[p]
        cfac = h / dx**4
        for i in range(M):
            f = 0.5 * (vp[i + 2] + vp[i + 3])
            fa = abs(f)
            fn = fa**n
            weight[i] = fn * fn
            if f > 0.0:
                m[i + 1] = fn if eps == 0.0 else fn / (1.0 + eps * fn / (f * f) ** 2)
            else:
                m[i + 1] = 0.0
        m[0] = m[M]
        for i in range(-1, M):
            d3 = ((vp[i + 4] - vp[i + 1]) - 3.0 * (vp[i + 3] - vp[i + 2])) * inv_dx3
            g[i + 1] = m[i + 1] * d3
        rmax = 0.0
        cdiag = 0.0
        for i in range(M):
            cm = cfac * m[i + 1]
            cmm = cfac * m[i]
            a[i] = cmm
            b[i] = -(cm + 3.0 * cmm)
            c[i] = 1.0 + 3.0 * (cm + cmm)
            d[i] = -(3.0 * cm + cmm)
            e[i] = cm
            rhs[i] = -h * (g[i + 1] - g[i]) / dx
            rmax = max(rmax, abs(rhs[i]))
            cdiag = max(cdiag, abs(c[i]))
            ac[i] = a[i]
            bc[i] = b[i]
            cc[i] = c[i]
            dc[i] = d[i]
            ec[i] = e[i]
            R[i, 0] = rhs[i]
            for j in range(1, 5):
                R[i, j] = 0.0
        R[0, 1] = 1.0
        R[1, 2] = 1.0
        R[M - 2, 3] = 1.0
        R[M - 1, 4] = 1.0
        _band_solve(ac, bc, cc, dc, ec, R)

        # rank-4 correction for the wrap-around entries
        a0, b0, a1 = a[0], b[0], a[1]
        eM2, dM1, eM1 = e[M - 2], d[M - 1], e[M - 1]
        for i in range(4):
            for j in range(4):
                cap[i, j] = 1.0 if i == j else 0.0
        for j in range(4):
            cap[0, j] += a0 * R[M - 2, j + 1] + b0 * R[M - 1, j + 1]
            cap[1, j] += a1 * R[M - 1, j + 1]
            cap[2, j] += eM2 * R[0, j + 1]
            cap[3, j] += dM1 * R[0, j + 1] + eM1 * R[1, j + 1]
        cy[0] = a0 * R[M - 2, 0] + b0 * R[M - 1, 0]
        cy[1] = a1 * R[M - 1, 0]
        cy[2] = eM2 * R[0, 0]
        cy[3] = dM1 * R[0, 0] + eM1 * R[1, 0]
        _solve4(cap, cy)

        mean = 0.0
        wmax = 0.0
        for i in range(M):
            wi = R[i, 0] - R[i, 1] * cy[0] - R[i, 2] * cy[1] - R[i, 3] * cy[2] - R[i, 4] * cy[3]
            wp[i + 2] = wi
            mean += wi
            wmax = max(wmax, abs(wi))
        mean /= M
        wp[0] = wp[M]
        wp[1] = wp[M + 1]
        wp[M + 2] = wp[2]
        wp[M + 3] = wp[3]

        res = 0.0
        for i in range(M):
            r = (a[i] * wp[i] + b[i] * wp[i + 1] + c[i] * wp[i + 2]
                 + d[i] * wp[i + 3] + e[i] * wp[i + 4])
            res = max(res, abs(r - rhs[i]))
        if not (res <= tol * (rmax + cdiag * wmax)):
            resid_ok[p] = False

        s0 = 0.0
        for i in range(M):
            q = (vp[i + 3] - vp[i + 2]) / dx
            s0 += q * q
            wp[i + 2] = vp[i + 2] + (wp[i + 2] - mean)
            out[p, i] = wp[i + 2]
        e0[p] = dx * s0
        wp[0] = wp[M]
        wp[1] = wp[M + 1]
        wp[M + 2] = wp[2]
        wp[M + 3] = wp[3]
        s1 = 0.0
        fl = 0.0
        for i in range(M):
            q = (wp[i + 3] - wp[i + 2]) / dx
            s1 += q * q
            d3 = ((wp[i + 4] - wp[i + 1]) - 3.0 * (wp[i + 3] - wp[i + 2])) * inv_dx3
            fl += weight[i] * d3 * d3
        e1[p] = dx * s1
        flux[p] = h * dx * fl
    return out, e0, e1, flux, resid_ok
