# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-trial loops. Signatures mirror ``_fallback.py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_lapack cimport dgetrf, dgetri, dgetrs

cnp.import_array()

cdef double DIVERGENCE = 1e12

# algorithm codes shared with the Python layer
cdef enum:
    Q_WATKINS = 0
    Q_SNR = 1
    Q_POLSA = 2
    Q_POLSA_D = 3
    Q_NESA = 4

cdef enum:
    L_SA = 0
    L_SNR_IDEAL = 1
    L_SNR = 2
    L_POLSA_FIXED = 3
    L_POLSA = 4
    L_NESA = 5


cdef int _invert(double[:, ::1] m, double[:, ::1] out, int* ipiv, double* work, int lwork) noexcept nogil:
    """out = m^{-1} via LU; returns LAPACK info (> 0 means singular)."""
    cdef int n = m.shape[0]
    cdef int info = 0
    memcpy(&out[0, 0], &m[0, 0], n * n * sizeof(double))
    dgetrf(&n, &n, &out[0, 0], &n, ipiv, &info)
    if info != 0:
        return info
    dgetri(&n, &out[0, 0], &n, ipiv, work, &lwork, &info)
    return info


def async_events(const cnp.int64_t[::1] first, const cnp.int64_t[::1] count,
                 const double[:, ::1] cum, long goal, const cnp.int64_t[::1] starts,
                 const double[:, ::1] u, long x0):
    """Online exploration: uniform feasible action, sampled next state, restart at goal."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t n_states = cum.shape[1]
    cdef Py_ssize_t n_starts = starts.shape[0]
    pairs_arr = np.empty(n, dtype=np.int64)
    nxt_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] pairs = pairs_arr
    cdef cnp.int64_t[::1] nxt = nxt_arr
    cdef Py_ssize_t k, a, y
    cdef long x = x0
    cdef long pair
    with nogil:
        for k in range(n):
            a = <Py_ssize_t>(u[k, 0] * count[x])
            if a >= count[x]:
                a = count[x] - 1
            pair = first[x] + a
            y = 0
            while y < n_states - 1 and cum[pair, y] <= u[k, 1]:
                y += 1
            pairs[k] = pair
            nxt[k] = y
            if x == goal:
                a = <Py_ssize_t>(u[k, 2] * n_starts)
                if a >= n_starts:
                    a = n_starts - 1
                x = starts[a]
            else:
                x = y
    return pairs_arr, nxt_arr


def clock_events(const double[:, ::1] cum, const double[:, ::1] u, long start):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t d = cum.shape[0]
    cdef Py_ssize_t n_states = cum.shape[1]
    pairs_arr = np.empty(n, dtype=np.int64)
    nxt_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] pairs = pairs_arr
    cdef cnp.int64_t[::1] nxt = nxt_arr
    cdef Py_ssize_t k, y, pair
    with nogil:
        for k in range(n):
            pair = (start + k) % d
            y = 0
            while y < n_states - 1 and cum[pair, y] <= u[k, 0]:
                y += 1
            pairs[k] = pair
            nxt[k] = y
    return pairs_arr, nxt_arr


def _pinv_column(s, double tol, Py_ssize_t i, out):
    out[:] = np.linalg.pinv(s, rcond=tol)[:, i]


def _pinv_solve(a, rhs, out):
    out[:] = np.linalg.pinv(a, rcond=1e-10) @ rhs


cdef inline Py_ssize_t _greedy(const double* theta, long first, long count) noexcept nogil:
    cdef Py_ssize_t best = first
    cdef double val = theta[first]
    cdef Py_ssize_t p
    for p in range(first + 1, first + count):
        if theta[p] < val:
            val = theta[p]
            best = p
    return best


def qlearn_run(int code, double beta, const double[::1] cost,
               const cnp.int64_t[::1] first, const cnp.int64_t[::1] count,
               const cnp.int64_t[::1] pairs, const cnp.int64_t[::1] nxt,
               const double[::1] theta0, bint clock, double zeta, double g, double n0,
               double pinv_tol, long refresh, const cnp.int64_t[::1] snapshots):
    """One tabular Q-learning trial over a fixed event stream.

    Returns ``(theta_snaps, dtheta_snaps, diverged_step)``; ``diverged_step``
    is 0 when the run completed.
    """
    cdef Py_ssize_t d = cost.shape[0]
    cdef Py_ssize_t n = pairs.shape[0]
    cdef Py_ssize_t n_snap = snapshots.shape[0]
    theta_snap = np.full((n_snap, d), np.nan)
    dtheta_snap = np.full((n_snap, d), np.nan)
    cdef double[:, ::1] ts = theta_snap
    cdef double[:, ::1] dts = dtheta_snap

    theta_arr = np.array(theta0, dtype=np.float64)
    dtheta_arr = np.zeros(d)
    tmp_arr = np.zeros(d)
    s_arr = np.zeros((d, d))
    sinv_arr = np.zeros((d, d))
    counts_arr = np.zeros(d, dtype=np.int64)
    cdef double[::1] theta = theta_arr
    cdef double[::1] dtheta = dtheta_arr
    cdef double[::1] tmp = tmp_arr
    cdef double[:, ::1] S = s_arr
    cdef double[:, ::1] Sinv = sinv_arr
    cdef cnp.int64_t[::1] counts = counts_arr

    cdef int lwork = <int>(64 * d)
    cdef int* ipiv = <int*>malloc(d * sizeof(int))
    cdef double* work = <double*>malloc(lwork * sizeof(double))
    cdef double* col = <double*>malloc(d * sizeof(double))
    cdef double* row = <double*>malloc(d * sizeof(double))

    cdef Py_ssize_t k, i, j, p, q, pos = 0
    cdef long covered = 0, n_new
    cdef bint have_inv = False
    cdef double alpha, f, t, di, denom, m, acc
    cdef long diverged = 0
    cdef int info
    cdef long since_refresh = 0

    if n_snap > 0 and snapshots[0] == 0:
        for p in range(d):
            ts[0, p] = theta[p]
            dts[0, p] = 0.0
        pos = 1

    try:
      with nogil:
        for k in range(n):
            n_new = k + 1
            i = pairs[k]
            j = _greedy(&theta[0], first[nxt[k]], count[nxt[k]])
            f = cost[i] + beta * theta[j] - theta[i]
            alpha = g / (n_new + n0)
            counts[i] += 1
            if counts[i] == 1:
                covered += 1
            if code == Q_SNR and have_inv:
                # Sherman-Morrison for S + e_i v^T, v = beta e_j - e_i
                for p in range(d):
                    col[p] = Sinv[p, i]
                    row[p] = beta * Sinv[j, p] - Sinv[i, p]
                denom = 1.0 + beta * Sinv[j, i] - Sinv[i, i]
            S[i, j] += beta
            S[i, i] -= 1.0

            if code == Q_WATKINS:
                if clock:
                    di = <double>d
                else:
                    di = <double>n_new / counts[i]
                for p in range(d):
                    dtheta[p] = 0.0
                dtheta[i] = alpha * di * f
            elif code == Q_NESA:
                t = beta * dtheta[j] - dtheta[i]
                dtheta[i] += zeta * t + zeta * alpha * f
            elif code == Q_POLSA or code == Q_POLSA_D:
                for p in range(d):
                    acc = 0.0
                    for q in range(d):
                        acc += S[p, q] * dtheta[q]
                    tmp[p] = acc
                if code == Q_POLSA:
                    for p in range(d):
                        dtheta[p] += zeta * tmp[p] / n_new
                    dtheta[i] += alpha * zeta * f
                else:
                    for p in range(d):
                        if counts[p] > 0:
                            dtheta[p] += tmp[p] / counts[p]
                    dtheta[i] += alpha * (<double>n_new / counts[i]) * f
            else:
                if have_inv:
                    since_refresh += 1
                    if fabs(denom) < 1e-12 or since_refresh >= refresh:
                        info = _invert(S, Sinv, ipiv, work, lwork)
                        since_refresh = 0
                        if info != 0:
                            have_inv = False
                    else:
                        for p in range(d):
                            m = col[p] / denom
                            for q in range(d):
                                Sinv[p, q] -= m * row[q]
                elif covered == d:
                    info = _invert(S, Sinv, ipiv, work, lwork)
                    since_refresh = 0
                    have_inv = info == 0
                if have_inv:
                    for p in range(d):
                        dtheta[p] = -alpha * n_new * f * Sinv[p, i]
                else:
                    with gil:
                        _pinv_column(s_arr, pinv_tol, i, tmp_arr)
                    for p in range(d):
                        dtheta[p] = -alpha * n_new * f * tmp[p]

            acc = 0.0
            for p in range(d):
                theta[p] += dtheta[p]
                if not isfinite(theta[p]) or fabs(theta[p]) > DIVERGENCE:
                    acc = 1.0
            if acc != 0.0:
                diverged = n_new
                break
            while pos < n_snap and snapshots[pos] == n_new:
                for p in range(d):
                    ts[pos, p] = theta[p]
                    dts[pos, p] = dtheta[p]
                pos += 1
    finally:
        free(ipiv)
        free(work)
        free(col)
        free(row)
    return theta_snap, dtheta_snap, diverged


def linear_run(int code, const double[:, ::1] a_mean, const double[:, :, ::1] perts,
               const cnp.int64_t[::1] idx, const double[:, ::1] noise,
               const double[::1] theta_star, const double[::1] theta0,
               double zeta, double g, double n0, const double[:, ::1] gain,
               const cnp.int64_t[::1] snapshots):
    """One trial of a dense linear recursion; ``f_k(theta) = A_k (theta - theta*) + noise_k``.

    ``gain`` is G for SA, A^{-1} for idealized SNR and the momentum model
    matrix for fixed-matrix PolSA; other codes ignore it.
    """
    cdef Py_ssize_t d = a_mean.shape[0]
    cdef Py_ssize_t n = noise.shape[0]
    cdef Py_ssize_t n_snap = snapshots.shape[0]
    cdef bint random_a = perts.shape[0] > 0
    theta_snap = np.full((n_snap, d), np.nan)
    dtheta_snap = np.full((n_snap, d), np.nan)
    cdef double[:, ::1] ts = theta_snap
    cdef double[:, ::1] dts = dtheta_snap

    theta_arr = np.array(theta0, dtype=np.float64)
    cdef double[::1] theta = theta_arr
    cdef double[::1] dtheta = np.zeros(d)
    cdef double[::1] err = np.zeros(d)
    f_arr = np.zeros(d)
    tmp_arr = np.zeros(d)
    cdef double[::1] f = f_arr
    cdef double[::1] tmp = tmp_arr
    cdef double[:, ::1] Ak = np.zeros((d, d))
    ahat_arr = np.zeros((d, d))
    cdef double[:, ::1] Ahat = ahat_arr
    cdef double[:, ::1] lu = np.zeros((d, d))
    cdef int* ipiv = <int*>malloc(d * sizeof(int))
    cdef Py_ssize_t k, p, q, pos = 0
    cdef long n_new, diverged = 0
    cdef double alpha, acc
    cdef int info = 0, nn = <int>d, one = 1
    cdef char trans = b'T'
    cdef bint bad

    if n_snap > 0 and snapshots[0] == 0:
        for p in range(d):
            ts[0, p] = theta[p]
            dts[0, p] = 0.0
        pos = 1
    try:
      with nogil:
        for k in range(n):
            n_new = k + 1
            alpha = g / (n_new + n0)
            for p in range(d):
                for q in range(d):
                    Ak[p, q] = a_mean[p, q]
                    if random_a:
                        Ak[p, q] += perts[idx[k], p, q]
            for p in range(d):
                err[p] = theta[p] - theta_star[p]
            for p in range(d):
                acc = noise[k, p]
                for q in range(d):
                    acc += Ak[p, q] * err[q]
                f[p] = acc
            if code == L_SNR or code == L_POLSA:
                for p in range(d):
                    for q in range(d):
                        Ahat[p, q] += (Ak[p, q] - Ahat[p, q]) / n_new
            if code == L_SA or code == L_SNR_IDEAL:
                for p in range(d):
                    acc = 0.0
                    for q in range(d):
                        acc += gain[p, q] * f[q]
                    dtheta[p] = alpha * acc if code == L_SA else -alpha * acc
            elif code == L_SNR:
                memcpy(&lu[0, 0], &Ahat[0, 0], d * d * sizeof(double))
                dgetrf(&nn, &nn, &lu[0, 0], &nn, ipiv, &info)
                if info == 0:
                    for p in range(d):
                        tmp[p] = f[p]
                    dgetrs(&trans, &nn, &one, &lu[0, 0], &nn, ipiv, &tmp[0], &nn, &info)
                    for p in range(d):
                        dtheta[p] = -alpha * tmp[p]
                else:
                    with gil:
                        _pinv_solve(ahat_arr, f_arr, tmp_arr)
                    for p in range(d):
                        dtheta[p] = -alpha * tmp[p]
            else:
                for p in range(d):
                    acc = 0.0
                    for q in range(d):
                        if code == L_POLSA_FIXED:
                            acc += gain[p, q] * dtheta[q]
                        elif code == L_POLSA:
                            acc += Ahat[p, q] * dtheta[q]
                        else:
                            acc += Ak[p, q] * dtheta[q]
                    tmp[p] = acc
                for p in range(d):
                    dtheta[p] = dtheta[p] + zeta * tmp[p] + alpha * zeta * f[p]
            bad = False
            for p in range(d):
                theta[p] += dtheta[p]
                if not isfinite(theta[p]) or fabs(theta[p]) > DIVERGENCE:
                    bad = True
            if bad:
                diverged = n_new
                break
            while pos < n_snap and snapshots[pos] == n_new:
                for p in range(d):
                    ts[pos, p] = theta[p]
                    dts[pos, p] = dtheta[p]
                pos += 1
    finally:
        free(ipiv)
    return theta_snap, dtheta_snap, diverged
