"""Reference numpy implementation of the hot kernels.

Same call surface as the compiled module `_core`; used as the fallback when
the extension is unavailable and as the ground truth in equivalence tests.
All inputs are C-contiguous float64 arrays, validated by the callers.
"""

from __future__ import annotations

import numpy as np


def backward_pass(A, B, Q, R, xd, alpha):
    """Backward sweep of the velocity-tracking synthesis.

    Parameters are the discrete plant (A: n x n, B: n x m), per-step state
    cost Q (N x n x n), per-step control cost R ((N-1) x m x m), desired
    state sequence xd (N x n) and the signal-dependent noise scale alpha.

    Returns (G, b, L, Wx, We, Wr, Wc, cond) where G/b define the feedback
    law u_k = -G_k x_hat_k + b_k, L is the per-step control-cost factor,
    Wx/We/Wr/Wc are the recursed value weights and cond holds the 1-norm
    condition number of each L_k for the caller's guard.
    """
    N, n = xd.shape
    m = B.shape[1]
    Wx = np.zeros((N, n, n))
    We = np.zeros((N, n, n))
    Wr = np.zeros((N, n))
    Wc = np.zeros(N)
    G = np.zeros((N - 1, m, n))
    b = np.zeros((N - 1, m))
    L = np.zeros((N - 1, m, m))
    cond = np.zeros(N - 1)

    Wx[N - 1] = Q[N - 1]
    Wr[N - 1] = Q[N - 1] @ xd[N - 1]
    Wc[N - 1] = 2.0 * xd[N - 1] @ Q[N - 1] @ xd[N - 1]

    a2 = alpha * alpha
    for k in range(N - 2, -1, -1):
        BW = B.T @ Wx[k + 1]                  # m x n
        S = BW @ B                            # m x m
        Se = B.T @ We[k + 1] @ B
        Lk = R[k] + a2 * np.diag(np.diag(S) + np.diag(Se)) + S
        Linv = np.linalg.inv(Lk)
        cond[k] = np.abs(Lk).sum(axis=0).max() * np.abs(Linv).sum(axis=0).max()
        KA = BW @ A                           # m x n
        G[k] = Linv @ KA
        b[k] = Linv @ (B.T @ Wr[k + 1])
        T = KA.T                              # n x m, equals A' Wx B by symmetry
        Wxk = Q[k] + A.T @ Wx[k + 1] @ A - T @ G[k]
        Wx[k] = 0.5 * (Wxk + Wxk.T)
        Wek = A.T @ We[k + 1] @ A + T @ G[k]
        We[k] = 0.5 * (Wek + Wek.T)
        Wr[k] = Q[k] @ xd[k] + A.T @ Wr[k + 1] - T @ b[k]
        Wc[k] = Wc[k + 1] + 2.0 * xd[k] @ Q[k] @ xd[k] - (B.T @ Wr[k + 1]) @ b[k]
        L[k] = Lk
    return G, b, L, Wx, We, Wr, Wc, cond


def _advance(A, B, X, U_eff):
    """One dynamics step for a row batch: X A' + U_eff B'.

    Written as an explicit per-column scalar chain (not a matmul) so each
    row's arithmetic is independent of the batch size; a zero-noise
    ensemble then reproduces the 1-row mean rollout bit for bit, which a
    BLAS call does not guarantee across shapes.
    """
    n = A.shape[0]
    m = B.shape[1]
    cols = []
    for j in range(n):
        acc = X[:, 0] * A[j, 0]
        for i in range(1, n):
            acc = acc + X[:, i] * A[j, i]
        for c in range(m):
            acc = acc + U_eff[:, c] * B[j, c]
        cols.append(acc)
    return np.stack(cols, axis=1)


def mean_rollout(A, B, G, b, x1):
    """Noise-free closed-loop rollout of the scheduled law from x1.

    Shares the stepping helper with `ensemble` so that a zero-noise
    ensemble reproduces this trajectory bit for bit.
    """
    n_ctrl = G.shape[0]
    n = A.shape[0]
    m = B.shape[1]
    X = np.zeros((n_ctrl + 1, n))
    U = np.zeros((n_ctrl, m))
    x = np.ascontiguousarray(x1, dtype=float).reshape(1, n)
    X[0] = x[0]
    for k in range(n_ctrl):
        u = -(x @ G[k].T) + b[k]
        U[k] = u[0]
        x = _advance(A, B, x, u)
        X[k + 1] = x[0]
    return X, U


def _moments_into(X, mean, cov, row, trials):
    """Sample mean and covariance of the trial rows, written into row `row`.

    The average is anchored at the first trial: when every trial is
    identical the deviations vanish exactly, so the reported mean is that
    row bit for bit and the covariance is exactly zero. A plain axis mean
    does not guarantee this (summation order leaves last-bit residue).
    """
    anchor = X[0]
    mean[row] = anchor + (X - anchor).mean(axis=0)
    d = X - mean[row]
    cov[row] = d.T @ d / trials


def ensemble(A, B, U, alpha, noise, x1, keep):
    """Propagate a trial ensemble under signal-dependent control noise.

    noise: (trials, steps, m) standard normal draws. Returns per-step mean
    (N x n), per-step covariance (N x n x n), final states (trials x n) and,
    when keep is true, the full state array (trials x N x n).
    """
    trials, steps, m = noise.shape
    n = A.shape[0]
    N = steps + 1
    mean = np.zeros((N, n))
    cov = np.zeros((N, n, n))
    X = np.broadcast_to(x1, (trials, n)).copy()
    states = np.zeros((trials, N, n)) if keep else None
    if keep:
        states[:, 0, :] = X
    _moments_into(X, mean, cov, 0, trials)
    for k in range(steps):
        u_eff = U[k] + alpha * U[k] * noise[:, k, :]
        X = _advance(A, B, X, u_eff)
        _moments_into(X, mean, cov, k + 1, trials)
        if keep:
            states[:, k + 1, :] = X
    return mean, cov, X.copy(), states
