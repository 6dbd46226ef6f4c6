"""Independent correctness checks for the synthesized controller.

Each check re-derives a quantity the backward recursion should reproduce
through a deliberately different route:

* a batch quadratic oracle assembles the expected cost analytically in
  extended precision and solves its normal equations, giving the global
  open-loop minimizer to compare against the recursion's control sequence;
* a separately coded deterministic tracking recursion (solve-based,
  closed-loop Joseph updates) must match the gains at zero noise;
* the quadratic value form is probed pointwise (see controller);
* the two-axis synthesis must decompose into two single-axis syntheses.

None of these routes shares intermediate results with the recursion under
test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .controller import CostSpec, backward_pass, verify_value_form
from .dynamics import (
    DiscretizationMethod,
    Geometry,
    NoiseModel,
    PlantConfig,
    build_continuous,
    discretize,
    step_stochastic,
)
from .errors import VerificationError
from .estimator import ForwardModel
from .signals import DEFAULT_PEAK_RULE, build_desired, minimum_jerk_velocity

ORACLE_TOLERANCE = 1e-9
REDUCTION_TOLERANCE = 1e-12
VALUE_FORM_TOLERANCE = 1e-9
DECOUPLING_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metric: float
    threshold: float
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def gauss_solve(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Partially pivoted Gaussian elimination; keeps the input dtype.

    Exists because the oracle solve runs in extended precision, which the
    LAPACK-backed solvers do not support.
    """
    H = H.copy()
    g = g.copy()
    size = H.shape[0]
    for col in range(size):
        pivot = col + int(np.argmax(np.abs(H[col:, col])))
        if H[pivot, col] == 0.0:
            raise VerificationError("oracle normal equations are singular")
        if pivot != col:
            H[[col, pivot]] = H[[pivot, col]]
            g[[col, pivot]] = g[[pivot, col]]
        for row in range(col + 1, size):
            f = H[row, col] / H[col, col]
            H[row, col:] -= f * H[col, col:]
            g[row] -= f * g[col]
    x = np.zeros_like(g)
    for row in range(size - 1, -1, -1):
        x[row] = (g[row] - H[row, row + 1:] @ x[row + 1:]) / H[row, row]
    return x


def oracle_controls(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    x_d: np.ndarray,
    alpha: float,
    x_1: np.ndarray,
) -> np.ndarray:
    """Global minimizer of the analytic expected cost over all controls.

    The state mean is linear in the stacked controls, so the expected cost
    is an explicit strictly convex quadratic; the noise term contributes a
    per-step diagonal. Assembled and solved in extended precision so the
    comparison against the recursion is limited by the recursion, not by
    the oracle.
    """
    ld = np.longdouble
    A = A.astype(ld)
    B = B.astype(ld)
    Q = Q.astype(ld)
    R = R.astype(ld)
    x_d = x_d.astype(ld)
    x_1 = x_1.astype(ld)
    a2 = ld(alpha) ** 2
    N, n = x_d.shape
    m = B.shape[1]
    dim = (N - 1) * m
    powers = [np.eye(n, dtype=ld)]
    for _ in range(N - 1):
        powers.append(A @ powers[-1])
    H = np.zeros((dim, dim), dtype=ld)
    g = np.zeros(dim, dtype=ld)
    for k in range(N):
        Qk = Q[k]
        free = powers[k] @ x_1 - x_d[k]
        for j in range(min(k, N - 1)):
            Sj = powers[k - 1 - j] @ B
            g[j * m:(j + 1) * m] += 2.0 * (free @ (Qk @ Sj))
            for j2 in range(min(k, N - 1)):
                Sj2 = powers[k - 1 - j2] @ B
                H[j * m:(j + 1) * m, j2 * m:(j2 + 1) * m] += 2.0 * (Sj.T @ Qk @ Sj2)
    for j in range(N - 1):
        block = 2.0 * R[j]
        noise = np.zeros((m, m), dtype=ld)
        for k in range(j + 1, N):
            Sj = powers[k - 1 - j] @ B
            noise += np.diag(np.diag(Sj.T @ Q[k] @ Sj))
        block += 2.0 * a2 * noise
        H[j * m:(j + 1) * m, j * m:(j + 1) * m] += block
    u = gauss_solve(H, -g)
    return np.asarray(u, dtype=np.float64).reshape(N - 1, m)


def riccati_tracking_gains(
    A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, x_d: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic tracking recursion, coded on a different route.

    Uses linear solves instead of explicit inverses and closed-loop
    (Joseph-form) updates instead of subtraction form. At zero noise the
    main recursion must reproduce these gains.
    """
    N, n = x_d.shape
    m = B.shape[1]
    G = np.zeros((N - 1, m, n))
    b = np.zeros((N - 1, m))
    S = Q[-1].copy()
    v = Q[-1] @ x_d[-1]
    for k in range(N - 2, -1, -1):
        M = R[k] + B.T @ S @ B
        G[k] = np.linalg.solve(M, B.T @ S @ A)
        b[k] = np.linalg.solve(M, B.T @ v)
        closed = A - B @ G[k]
        S = Q[k] + G[k].T @ R[k] @ G[k] + closed.T @ S @ closed
        S = 0.5 * (S + S.T)
        v = Q[k] @ x_d[k] + closed.T @ v
    return G, b


def _random_tracking_case(rng: np.random.Generator):
    n = int(rng.choice([1, 2, 4]))
    m = {1: 1, 2: 1, 4: 2}[n]
    N = int(rng.integers(3, 21))
    A = rng.standard_normal((n, n))
    radius = np.max(np.abs(np.linalg.eigvals(A)))
    A *= 0.95 / max(radius, 1e-9)
    B = rng.standard_normal((n, m))
    q = 10.0 ** rng.uniform(0.0, 6.0)
    alpha = float(rng.uniform(0.0, 0.5))
    vel_rows = {1: [0], 2: [1], 4: [1, 3]}[n]
    Qk = np.zeros((n, n))
    for i in vel_rows:
        Qk[i, i] = q
    Q = np.repeat(Qk[None, :, :], N, axis=0)
    R = np.repeat(np.eye(m)[None, :, :], N - 1, axis=0)
    x_d = np.zeros((N, n))
    x_d[:, vel_rows] = 3.0 * rng.standard_normal((N, len(vel_rows)))
    x_1 = rng.standard_normal(n)
    return A, B, Q, R, x_d, alpha, x_1


def check_oracle_equivalence(
    n_systems: int = 50,
    seed: int = 0,
    tolerance: float = ORACLE_TOLERANCE,
    debug_flip_sign: bool = False,
) -> CheckResult:
    """Recursion controls vs the quadratic oracle on randomized systems.

    `debug_flip_sign` corrupts the recursion's copy of A (negative
    control); the check must then fail.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_case = -1
    for case in range(n_systems):
        A, B, Q, R, x_d, alpha, x_1 = _random_tracking_case(rng)
        A_dp = A.copy()
        if debug_flip_sign:
            A_dp[0, -1] = -A_dp[0, -1]
        G, b = _kernels.backward_pass(A_dp, B, Q, R, x_d, alpha)[:2]
        U = _kernels.mean_rollout(A_dp, B, G, b, x_1)[1]
        U_oracle = oracle_controls(A, B, Q, R, x_d, alpha, x_1)
        rel = float(
            np.linalg.norm(U - U_oracle) / max(np.linalg.norm(U_oracle), 1e-300)
        )
        if rel > worst:
            worst, worst_case = rel, case
    return CheckResult(
        name="oracle-equivalence",
        passed=worst <= tolerance,
        metric=worst,
        threshold=tolerance,
        detail=f"worst of {n_systems} randomized systems (case {worst_case})",
    )


def standard_problem(
    amplitude: float = 12.0,
    direction_deg: float = 180.0,
    q: float = 1e4,
    alpha: float = 0.01,
    dt: float = 0.004,
    bins: int = 50,
    oblique: bool = False,
):
    """Template-driven saccade setup used by the self-contained checks."""
    geometry = Geometry.OBLIQUE if oblique else Geometry.HORIZONTAL
    config = PlantConfig(dt=dt, geometry=geometry)
    system = discretize(build_continuous(config), config.dt,
                        DiscretizationMethod.EXACT_EXPONENTIAL)
    peak = DEFAULT_PEAK_RULE[0] + DEFAULT_PEAK_RULE[1] * amplitude
    duration = 1.875 * amplitude / peak
    speed = amplitude / duration * minimum_jerk_velocity(np.linspace(0.0, 1.0, bins))
    if oblique:
        unit = np.array([np.cos(np.radians(direction_deg)), np.sin(np.radians(direction_deg))])
        velocity = np.outer(speed, unit)
    else:
        velocity = np.outer(speed, [np.cos(np.radians(direction_deg))])
    desired = build_desired(velocity, duration, dt, direction_deg)
    cost = CostSpec.velocity_tracking(q, desired.velocity_for_tracking())
    return system, cost, alpha, desired


def check_value_form(
    probes_per_step: int = 20,
    tolerance: float = VALUE_FORM_TOLERANCE,
    seed: int = 0,
) -> CheckResult:
    """Quadratic value form on the standard saccade configuration."""
    system, cost, alpha, _ = standard_problem()
    schedule = backward_pass(system, cost, alpha)
    try:
        report = verify_value_form(system, cost, alpha, schedule,
                                   probes_per_step=probes_per_step,
                                   tolerance=tolerance, seed=seed)
        metric, detail = report.max_discrepancy, f"worst step {report.worst_step}"
        passed = True
    except VerificationError as exc:
        metric, detail, passed = float("inf"), str(exc), False
    return CheckResult("value-form", passed, metric, tolerance, detail)


def check_riccati_reduction(tolerance: float = REDUCTION_TOLERANCE) -> CheckResult:
    """Zero-noise agreement: gains vs the independent recursion, state vs estimate."""
    system, cost, _, desired = standard_problem(alpha=0.0)
    schedule = backward_pass(system, cost, 0.0)
    G_ind, b_ind = riccati_tracking_gains(system.A, system.B, cost.Q_seq,
                                          cost.R_seq, cost.x_d_seq)
    scale_G = max(float(np.max(np.abs(G_ind))), 1.0)
    scale_b = max(float(np.max(np.abs(b_ind))), 1.0)
    gain_err = float(np.max(np.abs(schedule.G_seq - G_ind))) / scale_G
    bias_err = float(np.max(np.abs(schedule.b_seq - b_ind))) / scale_b

    rng = np.random.default_rng(0)
    quiet = NoiseModel(0.0)
    x = np.zeros(system.A.shape[0])
    model = ForwardModel(system, x)
    track_err = 0.0
    for k in range(desired.n_steps - 1):
        u = schedule.control_at(k, model.x_hat)
        x = step_stochastic(system, x, u, quiet, rng)
        model.predict(u)
        track_err = max(track_err, float(np.max(np.abs(x - model.x_hat))))
    track_err /= max(float(np.max(np.abs(desired.velocity))), 1.0)
    metric = max(gain_err, bias_err, track_err)
    return CheckResult(
        name="deterministic-reduction",
        passed=metric <= tolerance,
        metric=metric,
        threshold=tolerance,
        detail=f"gains {gain_err:.2e}, bias {bias_err:.2e}, state-vs-estimate {track_err:.2e}",
    )


def check_decoupling(tolerance: float = DECOUPLING_TOLERANCE) -> CheckResult:
    """Two-axis synthesis must equal two single-axis syntheses block-wise."""
    system4, cost4, alpha, desired4 = standard_problem(direction_deg=30.0, oblique=True)
    schedule4 = backward_pass(system4, cost4, alpha)
    config = PlantConfig(dt=system4.dt, geometry=Geometry.HORIZONTAL)
    system2 = discretize(build_continuous(config), config.dt,
                         DiscretizationMethod.EXACT_EXPONENTIAL)
    worst = 0.0
    for axis, rows in enumerate(((0, 1), (2, 3))):
        cost2 = CostSpec.velocity_tracking(cost4.q, desired4.velocity[:, axis])
        schedule2 = backward_pass(system2, cost2, alpha)
        sub_G = schedule4.G_seq[:, axis, rows[0]:rows[1] + 1]
        off_G = schedule4.G_seq[:, 1 - axis, rows[0]:rows[1] + 1]
        scale = max(float(np.max(np.abs(schedule2.G_seq))), 1.0)
        worst = max(worst, float(np.max(np.abs(sub_G - schedule2.G_seq[:, 0, :]))) / scale)
        worst = max(worst, float(np.max(np.abs(off_G))) / scale)
        b_scale = max(float(np.max(np.abs(schedule2.b_seq))), 1.0)
        worst = max(
            worst,
            float(np.max(np.abs(schedule4.b_seq[:, axis] - schedule2.b_seq[:, 0]))) / b_scale,
        )
        X2 = _kernels.mean_rollout(system2.A, system2.B, schedule2.G_seq,
                                   schedule2.b_seq, np.zeros(2))[0]
        X4 = _kernels.mean_rollout(system4.A, system4.B, schedule4.G_seq,
                                   schedule4.b_seq, np.zeros(4))[0]
        x_scale = max(float(np.max(np.abs(X2))), 1.0)
        worst = max(
            worst, float(np.max(np.abs(X4[:, rows[0]:rows[1] + 1] - X2))) / x_scale
        )
    return CheckResult(
        name="axis-decoupling",
        passed=worst <= tolerance,
        metric=worst,
        threshold=tolerance,
        detail="gain blocks, bias entries, and rollouts vs single-axis syntheses",
    )


def run_all_checks(
    seed: int = 0,
    oracle_systems: int = 50,
    probes_per_step: int = 20,
    debug_flip_sign: bool = False,
) -> VerificationReport:
    checks = (
        check_oracle_equivalence(oracle_systems, seed, debug_flip_sign=debug_flip_sign),
        check_riccati_reduction(),
        check_value_form(probes_per_step=probes_per_step, seed=seed),
        check_decoupling(),
    )
    return VerificationReport(checks=checks)
