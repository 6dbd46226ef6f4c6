"""Finite-horizon gain synthesis for velocity tracking under control noise.

The controller minimizes the expected quadratic tracking cost

    E[ sum_k (x_k - xd_k)' Q_k (x_k - xd_k) + u_k' R_k u_k ]

for the sampled plant with multiplicative control noise. Only velocity
entries of Q_k are weighted (a single free scalar q); R_k defaults to the
identity and is never fitted. The backward sweep yields a time-varying
affine law u_k = -G_k x_hat_k + b_k driven by the internal forward-model
estimate, not the noisy state, which makes the realized control sequence
deterministic.

Steps are 0-based: states run 0..N-1 and controls 0..N-2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import DiscreteSystem
from .errors import ConfigurationError, ContractError, SynthesisError, VerificationError

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class CostSpec:
    """Per-step quadratic cost: Q_seq (N,n,n), R_seq (N-1,m,m), targets (N,n)."""

    Q_seq: np.ndarray
    R_seq: np.ndarray
    x_d_seq: np.ndarray
    q: float | None = None   # free scalar behind Q_seq, kept for reporting

    def __post_init__(self) -> None:
        N, n = self.x_d_seq.shape[0], self.x_d_seq.shape[1]
        if self.Q_seq.shape != (N, n, n):
            raise ContractError(f"Q_seq shape {self.Q_seq.shape} != ({N}, {n}, {n})")
        if self.R_seq.ndim != 3 or self.R_seq.shape[0] != N - 1:
            raise ContractError("R_seq must hold N-1 control-cost matrices")
        for k in range(N):
            Qk = self.Q_seq[k]
            if not np.allclose(Qk, Qk.T):
                raise ConfigurationError(f"Q at step {k} is not symmetric")
            if np.min(np.linalg.eigvalsh(Qk)) < -1e-12 * max(1.0, np.abs(Qk).max()):
                raise ConfigurationError(f"Q at step {k} is not positive semidefinite")
        for k in range(N - 1):
            Rk = self.R_seq[k]
            if not np.allclose(Rk, Rk.T):
                raise ConfigurationError(f"R at step {k} is not symmetric")
            if np.min(np.linalg.eigvalsh(Rk)) <= 0.0:
                raise ConfigurationError(f"R at step {k} is not positive definite")

    @property
    def horizon(self) -> int:
        return self.x_d_seq.shape[0]

    @property
    def n(self) -> int:
        return self.x_d_seq.shape[1]

    @property
    def m(self) -> int:
        return self.R_seq.shape[1]

    @staticmethod
    def velocity_tracking(
        q: float,
        desired_velocity: np.ndarray,
        r_scale: float = 1.0,
    ) -> "CostSpec":
        """Velocity-only weighting from a desired velocity sequence.

        desired_velocity: (N,) for a single axis or (N, 2) for oblique.
        State targets put the desired velocity in the velocity entries and
        zero in the displacement entries (which carry no weight).
        """
        if q < 0.0:
            raise ConfigurationError("q must be non-negative")
        if r_scale <= 0.0:
            raise ConfigurationError("r_scale must be positive")
        v = np.asarray(desired_velocity, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        N, axes = v.shape
        if axes not in (1, 2):
            raise ContractError("desired velocity must carry one or two axes")
        n = 2 * axes
        vel_rows = list(range(1, n, 2))
        Qk = np.zeros((n, n))
        for i in vel_rows:
            Qk[i, i] = q
        x_d = np.zeros((N, n))
        x_d[:, vel_rows] = v
        return CostSpec(
            Q_seq=np.broadcast_to(Qk, (N, n, n)).copy(),
            R_seq=np.broadcast_to(r_scale * np.eye(axes), (N - 1, axes, axes)).copy(),
            x_d_seq=x_d,
            q=q,
        )


@dataclass(frozen=True)
class GainSchedule:
    """Synthesized feedback law plus the value weights behind it.

    G_seq/b_seq/L_seq have N-1 entries (one per control step); the weight
    sequences have N entries. W_seq is bookkeeping only: it never enters
    the gains, and zeroing it leaves every control untouched.
    """

    G_seq: np.ndarray
    b_seq: np.ndarray
    L_seq: np.ndarray
    W_x_seq: np.ndarray
    W_e_seq: np.ndarray
    W_r_seq: np.ndarray
    W_seq: np.ndarray
    alpha: float

    @property
    def horizon(self) -> int:
        return self.W_x_seq.shape[0]

    @property
    def n(self) -> int:
        return self.G_seq.shape[2]

    @property
    def m(self) -> int:
        return self.G_seq.shape[1]

    def control_at(self, k: int, x_hat: np.ndarray) -> np.ndarray:
        """Control for step k given the current estimate: -G_k x_hat + b_k."""
        if not 0 <= k < self.horizon - 1:
            raise ContractError(
                f"step {k} out of range; controls exist for steps 0..{self.horizon - 2}"
            )
        x_hat = np.asarray(x_hat, dtype=float)
        if x_hat.shape != (self.n,):
            raise ContractError(f"estimate must have shape ({self.n},), got {x_hat.shape}")
        return -self.G_seq[k] @ x_hat + self.b_seq[k]


def terminal_weights(cost: CostSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Boundary values of the backward sweep at the final step.

    Returns (W_x, W_e, W_r, W) = (Q_N, 0, Q_N xd_N, 2 xd_N' Q_N xd_N).
    """
    Q_N = cost.Q_seq[-1]
    x_d = cost.x_d_seq[-1]
    return Q_N.copy(), np.zeros_like(Q_N), Q_N @ x_d, float(2.0 * x_d @ Q_N @ x_d)


def backward_pass(system: DiscreteSystem, cost: CostSpec, alpha: float) -> GainSchedule:
    """Run the backward sweep and package the affine feedback law.

    Each step inverts L_k = R_k + C^x_k + C^e_k + B' W^x_{k+1} B, where the
    C terms are the noise-induced diagonal penalties; alpha = 0 reduces the
    sweep to the deterministic tracking recursion. L_k with 1-norm condition
    number above CONDITION_LIMIT aborts synthesis naming the offending step.
    """
    if alpha < 0.0:
        raise ConfigurationError("alpha must be non-negative")
    if cost.n != system.n:
        raise ContractError(f"cost is for n={cost.n}, plant has n={system.n}")
    if cost.m != system.m:
        raise ContractError(f"cost is for m={cost.m}, plant has m={system.m}")
    if cost.horizon < 2:
        raise ContractError("horizon must span at least one control step")
    G, b, L, Wx, We, Wr, Wc, cond = _kernels.backward_pass(
        np.ascontiguousarray(system.A, dtype=float),
        np.ascontiguousarray(system.B, dtype=float),
        np.ascontiguousarray(cost.Q_seq, dtype=float),
        np.ascontiguousarray(cost.R_seq, dtype=float),
        np.ascontiguousarray(cost.x_d_seq, dtype=float),
        float(alpha),
    )
    bad = np.flatnonzero(~np.isfinite(cond) | (cond > CONDITION_LIMIT))
    if bad.size:
        k = int(bad.max())   # first failure encountered by the backward sweep
        raise SynthesisError(
            f"control-cost factor ill-conditioned at step {k} "
            f"(condition {cond[k]:.3e} > {CONDITION_LIMIT:.0e})"
        )
    return GainSchedule(
        G_seq=G, b_seq=b, L_seq=L,
        W_x_seq=Wx, W_e_seq=We, W_r_seq=Wr, W_seq=Wc,
        alpha=float(alpha),
    )


def control_at(schedule: GainSchedule, k: int, x_hat: np.ndarray) -> np.ndarray:
    return schedule.control_at(k, x_hat)


def _controls_array(cost_horizon: int, m: int, control_seq: np.ndarray) -> np.ndarray:
    U = np.asarray(control_seq, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.shape[0] == cost_horizon:    # trailing entry carries no cost; drop it
        U = U[:-1]
    if U.shape != (cost_horizon - 1, m):
        raise ContractError(
            f"control sequence must have shape ({cost_horizon - 1}, {m}), got {U.shape}"
        )
    return U


def propagate_moments(
    system: DiscreteSystem,
    control_seq: np.ndarray,
    alpha: float,
    x_1: np.ndarray,
    horizon: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic mean and covariance of the state under open-loop controls.

    mu_{k+1} = A mu_k + B u_k;  Sigma_{k+1} = A Sigma_k A' + alpha^2 B D_k B'
    with D_k = diag(u_k)^2 and Sigma_0 = 0 (the initial state is known).
    """
    n = system.n
    U = np.asarray(control_seq, dtype=float)
    mu = np.zeros((horizon, n))
    Sigma = np.zeros((horizon, n, n))
    mu[0] = np.asarray(x_1, dtype=float)
    A, B = system.A, system.B
    a2 = alpha * alpha
    for k in range(horizon - 1):
        mu[k + 1] = A @ mu[k] + B @ U[k]
        Sigma[k + 1] = A @ Sigma[k] @ A.T + a2 * (B * U[k] ** 2) @ B.T
    return mu, Sigma


def expected_cost(
    system: DiscreteSystem,
    cost: CostSpec,
    alpha: float,
    control_seq: np.ndarray,
    x_1: np.ndarray,
) -> float:
    """Exact expected cost of an open-loop control sequence.

    sum_k (mu_k - xd_k)' Q_k (mu_k - xd_k) + tr(Q_k Sigma_k) + u_k' R_k u_k,
    with the final step contributing only its state terms.
    """
    N = cost.horizon
    U = _controls_array(N, cost.m, control_seq)
    x_1 = np.asarray(x_1, dtype=float)
    if x_1.shape != (cost.n,):
        raise ContractError(f"initial state must have shape ({cost.n},), got {x_1.shape}")
    mu, Sigma = propagate_moments(system, U, alpha, x_1, N)
    total = 0.0
    for k in range(N):
        d = mu[k] - cost.x_d_seq[k]
        total += d @ cost.Q_seq[k] @ d + np.trace(cost.Q_seq[k] @ Sigma[k])
        if k < N - 1:
            total += U[k] @ cost.R_seq[k] @ U[k]
    return float(total)


@dataclass(frozen=True)
class ValueFormReport:
    """Outcome of the value-form self-consistency check."""

    max_discrepancy: float
    worst_step: int
    probes_per_step: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance


def _consistent_constants(
    system: DiscreteSystem, cost: CostSpec, schedule: GainSchedule
) -> np.ndarray:
    # Constant value terms that make the quadratic form an exact value
    # function; the printed W_seq adds one extra xd'Q xd per step and is
    # kept separately for reporting.
    N = cost.horizon
    B = system.B
    c = np.zeros(N)
    c[N - 1] = cost.x_d_seq[N - 1] @ cost.Q_seq[N - 1] @ cost.x_d_seq[N - 1]
    for k in range(N - 2, -1, -1):
        r = B.T @ schedule.W_r_seq[k + 1]
        c[k] = (
            c[k + 1]
            + cost.x_d_seq[k] @ cost.Q_seq[k] @ cost.x_d_seq[k]
            - r @ np.linalg.solve(schedule.L_seq[k], r)
        )
    return c


def verify_value_form(
    system: DiscreteSystem,
    cost: CostSpec,
    alpha: float,
    schedule: GainSchedule,
    probes_per_step: int = 20,
    tolerance: float = 1e-9,
    seed: int = 0,
) -> ValueFormReport:
    """Check that the recursed weights reproduce the Bellman backup.

    At every step the value of randomized (state, estimate) pairs is
    evaluated two ways: through the quadratic form with the recursed
    weights, and through the one-step cost plus the expected next-step
    value under the scheduled control. Raises VerificationError naming the
    offending step when the relative discrepancy exceeds the tolerance.
    """
    if schedule.horizon != cost.horizon:
        raise ContractError("schedule and cost horizons differ")
    rng = np.random.default_rng(seed)
    N = cost.horizon
    A, B = system.A, system.B
    n = system.n
    const = _consistent_constants(system, cost, schedule)
    scale = max(1.0, float(np.abs(cost.x_d_seq).max()))
    a2 = alpha * alpha

    def quad_value(k: int, x: np.ndarray, e: np.ndarray) -> float:
        return float(
            x @ schedule.W_x_seq[k] @ x
            - 2.0 * x @ schedule.W_r_seq[k]
            + e @ schedule.W_e_seq[k] @ e
            + const[k]
        )

    worst = 0.0
    worst_step = 0
    for k in range(N - 1):
        Wx1 = schedule.W_x_seq[k + 1]
        We1 = schedule.W_e_seq[k + 1]
        Wr1 = schedule.W_r_seq[k + 1]
        Cx = a2 * np.diag(np.diag(B.T @ Wx1 @ B))
        Ce = a2 * np.diag(np.diag(B.T @ We1 @ B))
        for _ in range(probes_per_step):
            x = rng.standard_normal(n) * scale
            x_hat = rng.standard_normal(n) * scale
            e = x - x_hat
            u = schedule.control_at(k, x_hat)
            d = x - cost.x_d_seq[k]
            mu_next = A @ x + B @ u
            e_next = A @ e
            backed = (
                d @ cost.Q_seq[k] @ d
                + u @ cost.R_seq[k] @ u
                + u @ (Cx + Ce) @ u
                + mu_next @ Wx1 @ mu_next
                - 2.0 * mu_next @ Wr1
                + e_next @ We1 @ e_next
                + const[k + 1]
            )
            direct = quad_value(k, x, e)
            rel = abs(direct - backed) / max(1.0, abs(direct), abs(backed))
            if rel > worst:
                worst, worst_step = rel, k
    report = ValueFormReport(
        max_discrepancy=float(worst),
        worst_step=worst_step,
        probes_per_step=probes_per_step,
        tolerance=tolerance,
    )
    if not report.passed:
        raise VerificationError(
            f"value form mismatch at step {worst_step}: "
            f"relative discrepancy {worst:.3e} > {tolerance:.1e}"
        )
    return report
