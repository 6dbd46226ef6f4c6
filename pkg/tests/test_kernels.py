"""Compiled kernel vs numpy reference: same surface, same numbers."""

import os
import subprocess
import sys

import numpy as np
import pytest

import saccadeoc._kernels as kernels
from saccadeoc._kernels import _ref
from saccadeoc.verification import standard_problem

try:
    from saccadeoc._kernels import _core
    IMPLS = {"numpy": _ref, "compiled": _core}
except ImportError:
    IMPLS = {"numpy": _ref}

impl_param = pytest.mark.parametrize("impl", IMPLS.values(), ids=IMPLS.keys())


def _tracking_case(seed=0):
    rng = np.random.default_rng(seed)
    n, m, N = 4, 2, 14
    A = rng.standard_normal((n, n))
    A *= 0.95 / np.max(np.abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, m))
    Q = np.zeros((N, n, n))
    Q[:, 1, 1] = Q[:, 3, 3] = 2e3
    R = np.repeat(np.eye(m)[None], N - 1, axis=0)
    xd = np.zeros((N, n))
    xd[:, (1, 3)] = rng.standard_normal((N, 2))
    return A, B, Q, R, xd, 0.15, rng.standard_normal(n)


def _saccade_case():
    system, cost, alpha, _ = standard_problem()
    return (system.A, system.B, cost.Q_seq, cost.R_seq, cost.x_d_seq, alpha,
            np.zeros(2))


@impl_param
def test_zero_noise_ensemble_matches_mean_rollout_bitwise(impl):
    A, B, Q, R, xd, _, x1 = _saccade_case()
    G, b = impl.backward_pass(A, B, Q, R, xd, 0.0)[:2]
    X, U = impl.mean_rollout(A, B, G, b, x1)
    noise = np.random.default_rng(2).standard_normal((8, U.shape[0], B.shape[1]))
    mean, cov, finals, states = impl.ensemble(A, B, U, 0.0, noise, x1, True)
    assert np.array_equal(mean, X)
    for t in range(8):
        assert np.array_equal(states[t], X)
    assert np.array_equal(finals, np.broadcast_to(X[-1], finals.shape))
    assert np.all(cov == 0.0)


@impl_param
def test_ensemble_keep_flag(impl):
    A, B, Q, R, xd, alpha, x1 = _tracking_case(1)
    G, b = impl.backward_pass(A, B, Q, R, xd, alpha)[:2]
    U = impl.mean_rollout(A, B, G, b, x1)[1]
    noise = np.random.default_rng(0).standard_normal((5, U.shape[0], B.shape[1]))
    mean, cov, finals, states = impl.ensemble(A, B, U, alpha, noise, x1, False)
    assert states is None
    assert mean.shape == (U.shape[0] + 1, A.shape[0])
    assert cov.shape == (U.shape[0] + 1, A.shape[0], A.shape[0])
    assert finals.shape == (5, A.shape[0])
    kept = impl.ensemble(A, B, U, alpha, noise, x1, True)[3]
    assert kept.shape == (5, U.shape[0] + 1, A.shape[0])
    assert np.array_equal(kept[:, -1, :], finals)


@pytest.mark.skipif("compiled" not in IMPLS, reason="extension not built")
@pytest.mark.parametrize("case", [_saccade_case(), _tracking_case(3)],
                         ids=["saccade", "random"])
def test_backward_pass_agrees_across_implementations(case):
    A, B, Q, R, xd, alpha, _ = case
    ref = _ref.backward_pass(A, B, Q, R, xd, alpha)
    fast = IMPLS["compiled"].backward_pass(A, B, Q, R, xd, alpha)
    names = ("G", "b", "L", "Wx", "We", "Wr", "Wc", "cond")
    # the recursed weights accumulate a few ulps per step on different
    # summation orders; observed worst case sits near 3e-12 relative
    for name, r, f in zip(names, ref, fast):
        np.testing.assert_allclose(f, r, rtol=1e-10, atol=1e-12, err_msg=name)


@pytest.mark.skipif("compiled" not in IMPLS, reason="extension not built")
def test_rollout_and_ensemble_agree_across_implementations():
    A, B, Q, R, xd, alpha, x1 = _tracking_case(5)
    G, b = _ref.backward_pass(A, B, Q, R, xd, alpha)[:2]
    X_r, U_r = _ref.mean_rollout(A, B, G, b, x1)
    X_c, U_c = IMPLS["compiled"].mean_rollout(A, B, G, b, x1)
    np.testing.assert_allclose(X_c, X_r, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(U_c, U_r, rtol=1e-12, atol=1e-14)

    noise = np.random.default_rng(9).standard_normal((64, U_r.shape[0], B.shape[1]))
    out_r = _ref.ensemble(A, B, U_r, alpha, noise, x1, True)
    out_c = IMPLS["compiled"].ensemble(A, B, U_r, alpha, noise, x1, True)
    for name, r, c in zip(("mean", "cov", "finals", "states"), out_r, out_c):
        np.testing.assert_allclose(c, r, rtol=1e-11, atol=1e-13, err_msg=name)


def test_selection_flag_is_consistent():
    assert kernels.implementation_name() == (
        "compiled" if kernels.USING_COMPILED else "numpy"
    )


def test_pure_env_var_forces_numpy_backend():
    code = ("import saccadeoc._kernels as k;"
            "print(k.implementation_name(), k.USING_COMPILED)")
    env = dict(os.environ, SACCADE_OC_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "False"]
