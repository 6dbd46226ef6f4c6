# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: backward synthesis sweep, mean rollout, trial ensemble.

Same call surface and semantics as `_ref`. The mean rollout and the
ensemble share one C step routine, so a zero-noise ensemble reproduces the
mean trajectory bit for bit. Mean and covariance accumulation use
compensated (Kahan) summation.
"""

import numpy as np

from libc.math cimport HUGE_VAL, fabs


cdef inline void _step(const double[:, ::1] A, const double[:, ::1] B,
                       const double* x, const double* u, double* out,
                       Py_ssize_t n, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j, i, c
    cdef double acc
    for j in range(n):
        acc = 0.0
        for i in range(n):
            acc += A[j, i] * x[i]
        for c in range(m):
            acc += B[j, c] * u[c]
        out[j] = acc


cdef int _invert(double[:, ::1] M, double[:, ::1] out, Py_ssize_t m) noexcept nogil:
    """Gauss-Jordan inverse with partial pivoting; M is destroyed.

    On a singular pivot the inverse is filled with inf so the caller's
    condition-number guard fires; returns 0 in that case, 1 otherwise.
    """
    cdef Py_ssize_t i, j, k, piv
    cdef double best, f, tmp
    for i in range(m):
        for j in range(m):
            out[i, j] = 1.0 if i == j else 0.0
    for k in range(m):
        piv = k
        best = fabs(M[k, k])
        for i in range(k + 1, m):
            if fabs(M[i, k]) > best:
                best = fabs(M[i, k])
                piv = i
        if best == 0.0:
            for i in range(m):
                for j in range(m):
                    out[i, j] = HUGE_VAL
            return 0
        if piv != k:
            for j in range(m):
                tmp = M[k, j]; M[k, j] = M[piv, j]; M[piv, j] = tmp
                tmp = out[k, j]; out[k, j] = out[piv, j]; out[piv, j] = tmp
        f = M[k, k]
        for j in range(m):
            M[k, j] /= f
            out[k, j] /= f
        for i in range(m):
            if i != k:
                f = M[i, k]
                if f != 0.0:
                    for j in range(m):
                        M[i, j] -= f * M[k, j]
                        out[i, j] -= f * out[k, j]
    return 1


cdef double _one_norm(const double[:, ::1] M, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s, best = 0.0
    for j in range(m):
        s = 0.0
        for i in range(m):
            s += fabs(M[i, j])
        if s > best:
            best = s
    return best


def backward_pass(A, B, Q, R, xd, alpha):
    """See `_ref.backward_pass`; identical contract."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)
    xd = np.ascontiguousarray(xd, dtype=np.float64)
    cdef Py_ssize_t N = xd.shape[0]
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t m = B.shape[1]
    cdef double a2 = alpha * alpha

    Wx_np = np.zeros((N, n, n)); We_np = np.zeros((N, n, n))
    Wr_np = np.zeros((N, n)); Wc_np = np.zeros(N)
    G_np = np.zeros((N - 1, m, n)); b_np = np.zeros((N - 1, m))
    L_np = np.zeros((N - 1, m, m)); cond_np = np.zeros(N - 1)

    cdef double[:, :, ::1] Wx = Wx_np, We = We_np, G = G_np, L = L_np
    cdef double[:, ::1] Wr = Wr_np, b = b_np
    cdef double[::1] Wc = Wc_np, cond = cond_np
    cdef const double[:, ::1] Av = A, Bv = B
    cdef const double[:, :, ::1] Qv = Q, Rv = R
    cdef const double[:, ::1] xdv = xd

    # scratch
    BW_np = np.zeros((m, n)); KA_np = np.zeros((m, n))
    Lk_np = np.zeros((m, m)); Li_np = np.zeros((m, m)); Lc_np = np.zeros((m, m))
    AtW_np = np.zeros((n, n))
    BWr_np = np.zeros(m); Qxd_np = np.zeros(n)
    cdef double[:, ::1] BW = BW_np, KA = KA_np, Lk = Lk_np, Li = Li_np, Lc = Lc_np
    cdef double[:, ::1] AtW = AtW_np
    cdef double[::1] BWr = BWr_np, Qxd = Qxd_np

    cdef Py_ssize_t k, i, j, c, c2, p
    cdef double acc, sdiag, sediag, xqx

    # terminal boundary
    for i in range(n):
        acc = 0.0
        for j in range(n):
            Wx[N - 1, i, j] = Qv[N - 1, i, j]
            acc += Qv[N - 1, i, j] * xdv[N - 1, j]
        Wr[N - 1, i] = acc
    acc = 0.0
    for i in range(n):
        acc += xdv[N - 1, i] * Wr[N - 1, i]
    Wc[N - 1] = 2.0 * acc

    for k in range(N - 2, -1, -1):
        for c in range(m):
            for j in range(n):
                acc = 0.0
                for i in range(n):
                    acc += Bv[i, c] * Wx[k + 1, i, j]
                BW[c, j] = acc
        for c in range(m):
            for c2 in range(m):
                acc = 0.0
                for j in range(n):
                    acc += BW[c, j] * Bv[j, c2]
                Lk[c, c2] = Rv[k, c, c2] + acc
                Lc[c, c2] = Lk[c, c2]
        for c in range(m):
            sdiag = Lk[c, c] - Rv[k, c, c]
            sediag = 0.0
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += We[k + 1, i, j] * Bv[j, c]
                sediag += Bv[i, c] * acc
            Lk[c, c] += a2 * (sdiag + sediag)
            Lc[c, c] = Lk[c, c]
        for c in range(m):
            for c2 in range(m):
                L[k, c, c2] = Lk[c, c2]
        _invert(Lk, Li, m)
        cond[k] = _one_norm(Lc, m) * _one_norm(Li, m)
        for c in range(m):
            for j in range(n):
                acc = 0.0
                for i in range(n):
                    acc += BW[c, i] * Av[i, j]
                KA[c, j] = acc
        for c in range(m):
            for j in range(n):
                acc = 0.0
                for c2 in range(m):
                    acc += Li[c, c2] * KA[c2, j]
                G[k, c, j] = acc
        for c in range(m):
            acc = 0.0
            for i in range(n):
                acc += Bv[i, c] * Wr[k + 1, i]
            BWr[c] = acc
        for c in range(m):
            acc = 0.0
            for c2 in range(m):
                acc += Li[c, c2] * BWr[c2]
            b[k, c] = acc
        # A' Wx1 then (A' Wx1) A - KA' G, symmetrized
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for p in range(n):
                    acc += Av[p, i] * Wx[k + 1, p, j]
                AtW[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = Qv[k, i, j]
                for p in range(n):
                    acc += AtW[i, p] * Av[p, j]
                for c in range(m):
                    acc -= KA[c, i] * G[k, c, j]
                Wx[k, i, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = 0.5 * (Wx[k, i, j] + Wx[k, j, i])
                Wx[k, i, j] = acc
                Wx[k, j, i] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for p in range(n):
                    acc += Av[p, i] * We[k + 1, p, j]
                AtW[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for p in range(n):
                    acc += AtW[i, p] * Av[p, j]
                for c in range(m):
                    acc += KA[c, i] * G[k, c, j]
                We[k, i, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = 0.5 * (We[k, i, j] + We[k, j, i])
                We[k, i, j] = acc
                We[k, j, i] = acc
        xqx = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Qv[k, i, j] * xdv[k, j]
            Qxd[i] = acc
            xqx += xdv[k, i] * acc
        for i in range(n):
            acc = Qxd[i]
            for p in range(n):
                acc += Av[p, i] * Wr[k + 1, p]
            for c in range(m):
                acc -= KA[c, i] * b[k, c]
            Wr[k, i] = acc
        acc = 0.0
        for c in range(m):
            acc += BWr[c] * b[k, c]
        Wc[k] = Wc[k + 1] + 2.0 * xqx - acc
    return G_np, b_np, L_np, Wx_np, We_np, Wr_np, Wc_np, cond_np


def mean_rollout(A, B, G, b, x1):
    """See `_ref.mean_rollout`; identical contract."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    G = np.ascontiguousarray(G, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n_ctrl = G.shape[0]
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t m = B.shape[1]
    X_np = np.zeros((n_ctrl + 1, n))
    U_np = np.zeros((n_ctrl, m))
    x_np = np.ascontiguousarray(x1, dtype=np.float64).copy()
    nxt_np = np.zeros(n)
    cdef double[:, ::1] X = X_np, U = U_np
    cdef const double[:, ::1] Av = A, Bv = B
    cdef const double[:, :, ::1] Gv = G
    cdef const double[:, ::1] bv = b
    cdef double[::1] x = x_np, nxt = nxt_np
    cdef Py_ssize_t k, c, j
    cdef double acc
    for j in range(n):
        X[0, j] = x[j]
    for k in range(n_ctrl):
        for c in range(m):
            acc = bv[k, c]
            for j in range(n):
                acc -= Gv[k, c, j] * x[j]
            U[k, c] = acc
        _step(Av, Bv, &x[0], &U[k, 0], &nxt[0], n, m)
        for j in range(n):
            x[j] = nxt[j]
            X[k + 1, j] = nxt[j]
    return X_np, U_np


cdef void _moments(double[:, ::1] X, double[:, ::1] mean, double[:, :, ::1] cov,
                   double[::1] sums, double[::1] comp,
                   double[:, ::1] csum, double[:, ::1] ccomp,
                   Py_ssize_t row, Py_ssize_t trials, Py_ssize_t n) noexcept nogil:
    """Kahan-compensated per-step mean and covariance into row `row`.

    The mean is accumulated as deviations from the first trial: identical
    trials then average to that row bit for bit with exactly zero
    covariance, matching the reference implementation's anchoring.
    """
    cdef Py_ssize_t t, i, j
    cdef double y, tmp, di
    for j in range(n):
        sums[j] = 0.0
        comp[j] = 0.0
    for t in range(trials):
        for j in range(n):
            y = (X[t, j] - X[0, j]) - comp[j]
            tmp = sums[j] + y
            comp[j] = (tmp - sums[j]) - y
            sums[j] = tmp
    for j in range(n):
        mean[row, j] = X[0, j] + sums[j] / trials
    for i in range(n):
        for j in range(n):
            csum[i, j] = 0.0
            ccomp[i, j] = 0.0
    for t in range(trials):
        for i in range(n):
            di = X[t, i] - mean[row, i]
            for j in range(i, n):
                y = di * (X[t, j] - mean[row, j]) - ccomp[i, j]
                tmp = csum[i, j] + y
                ccomp[i, j] = (tmp - csum[i, j]) - y
                csum[i, j] = tmp
    for i in range(n):
        for j in range(i, n):
            cov[row, i, j] = csum[i, j] / trials
            cov[row, j, i] = cov[row, i, j]


def ensemble(A, B, U, alpha, noise, x1, keep):
    """See `_ref.ensemble`; identical contract."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    U = np.ascontiguousarray(U, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t trials = noise.shape[0]
    cdef Py_ssize_t steps = noise.shape[1]
    cdef Py_ssize_t m = noise.shape[2]
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t N = steps + 1
    cdef double a = alpha

    mean_np = np.zeros((N, n))
    cov_np = np.zeros((N, n, n))
    X_np = np.ascontiguousarray(
        np.broadcast_to(np.asarray(x1, dtype=np.float64), (trials, n)).copy()
    )
    states_np = np.zeros((trials, N, n)) if keep else None

    cdef double[:, ::1] mean = mean_np, X = X_np
    cdef double[:, :, ::1] cov = cov_np
    cdef double[:, :, ::1] states
    cdef const double[:, ::1] Av = A, Bv = B, Uv = U
    cdef const double[:, :, ::1] Wv = noise
    cdef bint keep_states = bool(keep)
    if keep_states:
        states = states_np

    ueff_np = np.zeros(m)
    nxt_np = np.zeros(n)
    sums_np = np.zeros(n)
    comp_np = np.zeros(n)
    csum_np = np.zeros((n, n))
    ccomp_np = np.zeros((n, n))
    cdef double[::1] ueff = ueff_np, nxt = nxt_np, sums = sums_np, comp = comp_np
    cdef double[:, ::1] csum = csum_np, ccomp = ccomp_np

    cdef Py_ssize_t k, t, c, j

    _moments(X, mean, cov, sums, comp, csum, ccomp, 0, trials, n)
    if keep_states:
        for t in range(trials):
            for j in range(n):
                states[t, 0, j] = X[t, j]
    for k in range(steps):
        for t in range(trials):
            for c in range(m):
                ueff[c] = Uv[k, c] + a * Uv[k, c] * Wv[t, k, c]
            _step(Av, Bv, &X[t, 0], &ueff[0], &nxt[0], n, m)
            for j in range(n):
                X[t, j] = nxt[j]
            if keep_states:
                for j in range(n):
                    states[t, k + 1, j] = nxt[j]
        _moments(X, mean, cov, sums, comp, csum, ccomp, k + 1, trials, n)
    return mean_np, cov_np, X_np.copy(), states_np
