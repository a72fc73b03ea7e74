# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled power-control kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY, isfinite

cnp.import_array()

DEF MAX_POLICY_STEPS = 100


cdef int _solve(double[:, ::1] A, double[::1] x, int n) noexcept nogil:
    """In-place Gaussian elimination with partial pivoting; 0 on success."""
    cdef int i, j, r, piv
    cdef double m, t, best
    for i in range(n):
        piv = i
        best = fabs(A[i, i])
        for r in range(i + 1, n):
            if fabs(A[r, i]) > best:
                best = fabs(A[r, i])
                piv = r
        if best == 0.0:
            return 1
        if piv != i:
            for j in range(n):
                t = A[i, j]; A[i, j] = A[piv, j]; A[piv, j] = t
            t = x[i]; x[i] = x[piv]; x[piv] = t
        for r in range(i + 1, n):
            m = A[r, i] / A[i, i]
            if m != 0.0:
                for j in range(i, n):
                    A[r, j] -= m * A[i, j]
                x[r] -= m * x[i]
    for i in range(n - 1, -1, -1):
        t = x[i]
        for j in range(i + 1, n):
            t -= A[i, j] * x[j]
        x[i] = t / A[i, i]
    return 0


cdef int _min_power_one(const double[:, ::1] G, const double[::1] gamma, const double[::1] sigma2,
                        const Py_ssize_t[::1] grp,
                        double t, double[::1] p, Py_ssize_t[::1] policy, double[:, ::1] A,
                        double[::1] rhs, double[::1] demand) noexcept nogil:
    """Least powers for one candidate; returns 1 if feasible."""
    cdef Py_ssize_t K = G.shape[0], g = G.shape[1]
    cdef Py_ssize_t i, j, k, it, cur
    cdef double s, c, best
    cdef int changed
    for k in range(g):
        policy[k] = -1
    for i in range(K):
        k = grp[i]
        if not (G[i, k] > 0.0):
            return 0
        demand[i] = t * gamma[i] * sigma2[i] / G[i, k]
        if policy[k] < 0 or demand[i] > demand[policy[k]]:
            policy[k] = i
    for it in range(MAX_POLICY_STEPS):
        for k in range(g):
            i = policy[k]
            s = t * gamma[i] / G[i, k]
            for j in range(g):
                A[k, j] = -s * G[i, j] if j != k else 1.0
            rhs[k] = s * sigma2[i]
        if _solve(A, rhs, <int>g):
            return 0
        for k in range(g):
            if not (isfinite(rhs[k]) and rhs[k] > 0.0):
                return 0
            p[k] = rhs[k]
        for i in range(K):
            k = grp[i]
            s = t * gamma[i] / G[i, k]
            c = sigma2[i]
            for j in range(g):
                if j != k:
                    c += G[i, j] * p[j]
            demand[i] = s * c
        changed = 0
        for k in range(g):
            cur = policy[k]
            best = demand[cur]
            for i in range(K):
                if grp[i] == k and demand[i] > best * (1 + 1e-12) and demand[i] > demand[policy[k]]:
                    policy[k] = i
            if policy[k] != cur:
                changed = 1
        if not changed:
            return 1
    return 1


def min_power_batch(gains, gamma, sigma2, group_of, t_scale=1.0):
    cdef const double[:, :, ::1] Gs = np.ascontiguousarray(gains, dtype=np.float64)
    cdef const double[::1] gm = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef const double[::1] s2 = np.ascontiguousarray(sigma2, dtype=np.float64)
    cdef const Py_ssize_t[::1] grp = np.ascontiguousarray(group_of, dtype=np.intp)
    cdef Py_ssize_t Z = Gs.shape[0], K = Gs.shape[1], g = Gs.shape[2], z, k
    cdef double[::1] ts = np.array(np.broadcast_to(np.asarray(t_scale, dtype=np.float64), (Z,)))
    P = np.full((Z, g), np.inf)
    ok = np.zeros(Z, dtype=np.uint8)
    cdef double[:, ::1] pv = P
    cdef unsigned char[::1] okv = ok
    cdef double[::1] p = np.empty(g)
    cdef Py_ssize_t[::1] policy = np.empty(g, dtype=np.intp)
    cdef double[:, ::1] A = np.empty((g, g))
    cdef double[::1] rhs = np.empty(g)
    cdef double[::1] demand = np.empty(K)
    with nogil:
        for z in range(Z):
            if _min_power_one(Gs[z], gm, s2, grp, ts[z], p, policy, A, rhs, demand):
                okv[z] = 1
                for k in range(g):
                    pv[z, k] = p[k]
    return P, ok.astype(bool)


cdef double _level(const double[:, ::1] G, const double[::1] p, const double[::1] gamma,
                   const double[::1] sigma2, const Py_ssize_t[::1] grp) noexcept nogil:
    cdef Py_ssize_t K = G.shape[0], g = G.shape[1], i, j, k
    cdef double sig, interf, r, out = INFINITY
    for i in range(K):
        k = grp[i]
        sig = G[i, k] * p[k]
        interf = sigma2[i]
        for j in range(g):
            if j != k:
                interf += G[i, j] * p[j]
        if interf == 0.0:
            r = 0.0 if sig == 0.0 else INFINITY
        else:
            r = sig / interf / gamma[i]
        if r < out:
            out = r
    return out


def maxmin_power_batch(gains, gamma, sigma2, group_of, budget, rel_tol=1e-9):
    cdef const double[:, :, ::1] Gs = np.ascontiguousarray(gains, dtype=np.float64)
    cdef const double[::1] gm = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef const double[::1] s2 = np.ascontiguousarray(sigma2, dtype=np.float64)
    cdef const Py_ssize_t[::1] grp = np.ascontiguousarray(group_of, dtype=np.intp)
    cdef Py_ssize_t Z = Gs.shape[0], K = Gs.shape[1], g = Gs.shape[2], z, k, i, it
    cdef double Pb = budget, tol = rel_tol
    P = np.zeros((Z, g))
    T = np.zeros(Z)
    cdef double[:, ::1] pv = P
    cdef double[::1] tv = T
    cdef double[::1] p = np.empty(g)
    cdef double[::1] plo = np.empty(g)
    cdef Py_ssize_t[::1] policy = np.empty(g, dtype=np.intp)
    cdef double[:, ::1] A = np.empty((g, g))
    cdef double[::1] rhs = np.empty(g)
    cdef double[::1] demand = np.empty(K)
    cdef double lo, hi, mid, tot, r
    with nogil:
        for z in range(Z):
            hi = INFINITY
            for i in range(K):
                r = Pb * Gs[z, i, grp[i]] / (gm[i] * s2[i])
                if r < hi:
                    hi = r
            lo = 0.0
            for k in range(g):
                plo[k] = 0.0
            if hi > 0.0:
                for it in range(200):
                    if hi - lo <= tol * hi:
                        break
                    mid = 0.5 * (lo + hi)
                    if _min_power_one(Gs[z], gm, s2, grp, mid, p, policy, A, rhs, demand):
                        tot = 0.0
                        for k in range(g):
                            tot += p[k]
                        if tot <= Pb:
                            lo = mid
                            for k in range(g):
                                plo[k] = p[k]
                            continue
                    hi = mid
            tot = 0.0
            for k in range(g):
                tot += plo[k]
            if tot > 0.0:
                for k in range(g):
                    pv[z, k] = plo[k] * Pb / tot
                tv[z] = _level(Gs[z], pv[z], gm, s2, grp)
            else:
                tv[z] = 0.0
    return P, T


def scaled_sinr_batch(gains, p, gamma, sigma2, group_of):
    cdef const double[:, :, ::1] Gs = np.ascontiguousarray(gains, dtype=np.float64)
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[::1] gm = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef const double[::1] s2 = np.ascontiguousarray(sigma2, dtype=np.float64)
    cdef const Py_ssize_t[::1] grp = np.ascontiguousarray(group_of, dtype=np.intp)
    cdef Py_ssize_t Z = Gs.shape[0], z
    out = np.empty(Z)
    cdef double[::1] ov = out
    with nogil:
        for z in range(Z):
            ov[z] = _level(Gs[z], pv[z], gm, s2, grp)
    return out
