"""Parameter estimation: relative RMS metric and the two-stage (q, alpha) fit.

Stage 1 fits the velocity error weight q with the noise scale pinned to
zero; stage 2 fits the noise scale alpha with q held fixed (alpha shifts
the mean trajectory through the gain denominators). Both stages use a
derivative-free search: a coarse logarithmic grid scan bracketing the
minimum, then golden-section refinement inside the bracket.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .controller import CostSpec, backward_pass
from .dynamics import DiscreteSystem
from .errors import ContractError, FitWarning, MetricError
from .signals import DesiredSignal
from .simulation import simulate_mean

DEFAULT_Q_RANGE = (1e2, 1e10)
DEFAULT_ALPHA_RANGE = (1e-4, 1.0)
DEFAULT_GRID_POINTS = 25
DEFAULT_REFINE_ITERS = 40
FLAT_OBJECTIVE_SPAN = 1e-12

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class StageResult:
    """Outcome of one 1-D search stage."""

    value: float
    objective: float
    evaluations: int
    bracket: tuple[float, float]


@dataclass(frozen=True)
class FitResult:
    q: float
    alpha: float
    velocity_error_pct: float
    displacement_error_pct: float | None
    q_evaluations: int
    alpha_evaluations: int
    q_bracket: tuple[float, float]
    alpha_bracket: tuple[float, float]

    def __post_init__(self) -> None:
        if self.q < 0.0 or self.alpha < 0.0:
            raise ContractError("fitted parameters must be non-negative")
        if self.velocity_error_pct < 0.0:
            raise ContractError("errors must be non-negative")

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "alpha": self.alpha,
            "velocity_error_pct": self.velocity_error_pct,
            "displacement_error_pct": self.displacement_error_pct,
            "q_evaluations": self.q_evaluations,
            "alpha_evaluations": self.alpha_evaluations,
            "q_bracket": list(self.q_bracket),
            "alpha_bracket": list(self.alpha_bracket),
        }


def relative_rms_error(predicted: np.ndarray, reference: np.ndarray) -> float:
    """Percent root-sum-square deviation, normalized by the reference."""
    predicted = np.asarray(predicted, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if predicted.shape != reference.shape:
        raise ContractError(
            f"shape mismatch: predicted {predicted.shape} vs reference {reference.shape}"
        )
    denom = float(np.linalg.norm(reference))
    if denom == 0.0:
        raise MetricError("reference signal is identically zero")
    return float(100.0 * np.linalg.norm(reference - predicted) / denom)


def predict_mean(
    system: DiscreteSystem,
    desired: DesiredSignal,
    q: float,
    alpha: float,
    r_scale: float = 1.0,
):
    """Synthesize gains for (q, alpha) and roll out the mean trajectory."""
    cost = CostSpec.velocity_tracking(q, desired.velocity_for_tracking(), r_scale)
    schedule = backward_pass(system, cost, alpha)
    x_1 = np.zeros(system.A.shape[0])
    return simulate_mean(system, schedule, x_1, desired.n_steps)


def _velocity_objective(system, desired, reference_velocity, r_scale):
    reference_velocity = np.asarray(reference_velocity, dtype=float)

    def objective(q: float, alpha: float) -> float:
        traj = predict_mean(system, desired, q, alpha, r_scale)
        return relative_rms_error(traj.velocity, reference_velocity)

    return objective


def _golden_section(f, lo: float, hi: float, iterations: int):
    """Minimize a unimodal scalar function on [lo, hi]; returns (x, f(x), evals)."""
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    for _ in range(iterations):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        evals += 1
    if fc <= fd:
        return c, fc, evals
    return d, fd, evals


def _scan_and_refine(f, grid: np.ndarray, refine_iters: int, log_refine: bool) -> StageResult:
    values = np.array([f(x) for x in grid])
    if values.max() - values.min() < FLAT_OBJECTIVE_SPAN:
        warnings.warn("objective is flat across the scan range", FitWarning)
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    x_best, f_best = float(grid[best]), float(values[best])
    evals = grid.size
    if hi > lo:
        if log_refine:
            x, fx, used = _golden_section(
                lambda t: f(10.0**t), math.log10(lo), math.log10(hi), refine_iters
            )
            x = 10.0**x
        else:
            x, fx, used = _golden_section(f, lo, hi, refine_iters)
        evals += used
        if fx < f_best:
            x_best, f_best = float(x), float(fx)
    return StageResult(
        value=x_best, objective=f_best, evaluations=evals, bracket=(float(lo), float(hi))
    )


def fit_q(
    system: DiscreteSystem,
    desired: DesiredSignal,
    reference_velocity: np.ndarray,
    search_range: tuple[float, float] = DEFAULT_Q_RANGE,
    grid_points: int = DEFAULT_GRID_POINTS,
    refine_iters: int = DEFAULT_REFINE_ITERS,
    r_scale: float = 1.0,
) -> StageResult:
    """Fit the velocity weight with the noise scale pinned to zero."""
    lo, hi = search_range
    if not 0.0 < lo < hi:
        raise ContractError("q search range must satisfy 0 < lo < hi")
    if grid_points < 3:
        raise ContractError("need at least 3 grid points")
    objective = _velocity_objective(system, desired, reference_velocity, r_scale)
    grid = np.geomspace(lo, hi, grid_points)
    return _scan_and_refine(lambda q: objective(q, 0.0), grid, refine_iters, log_refine=True)


def fit_alpha(
    system: DiscreteSystem,
    desired: DesiredSignal,
    reference_velocity: np.ndarray,
    q: float,
    search_range: tuple[float, float] = DEFAULT_ALPHA_RANGE,
    grid_points: int = DEFAULT_GRID_POINTS,
    refine_iters: int = DEFAULT_REFINE_ITERS,
    r_scale: float = 1.0,
) -> StageResult:
    """Fit the noise scale with q held fixed; the scan grid starts at exactly 0."""
    lo, hi = search_range
    if not 0.0 < lo < hi:
        raise ContractError("alpha search range must satisfy 0 < lo < hi")
    if grid_points < 3:
        raise ContractError("need at least 3 grid points")
    objective = _velocity_objective(system, desired, reference_velocity, r_scale)
    grid = np.concatenate([[0.0], np.geomspace(lo, hi, grid_points)])
    # the bracket can include 0, so refinement stays on the linear scale
    return _scan_and_refine(lambda a: objective(q, a), grid, refine_iters, log_refine=False)


def two_stage_fit(
    system: DiscreteSystem,
    desired: DesiredSignal,
    reference_velocity: np.ndarray,
    reference_displacement: np.ndarray | None = None,
    q_range: tuple[float, float] = DEFAULT_Q_RANGE,
    alpha_range: tuple[float, float] = DEFAULT_ALPHA_RANGE,
    grid_points: int = DEFAULT_GRID_POINTS,
    refine_iters: int = DEFAULT_REFINE_ITERS,
    r_scale: float = 1.0,
    fit_noise: bool = True,
) -> FitResult:
    """Run both stages and report achieved errors at the fitted parameters.

    The displacement error is a pure prediction: it is evaluated at the
    fitted parameters but never enters either objective.
    """
    stage1 = fit_q(system, desired, reference_velocity, q_range, grid_points,
                   refine_iters, r_scale)
    if fit_noise:
        stage2 = fit_alpha(system, desired, reference_velocity, stage1.value,
                           alpha_range, grid_points, refine_iters, r_scale)
        alpha, velocity_error, alpha_evals, alpha_bracket = (
            stage2.value, stage2.objective, stage2.evaluations, stage2.bracket)
    else:
        alpha, velocity_error, alpha_evals, alpha_bracket = (
            0.0, stage1.objective, 0, (0.0, 0.0))
    displacement_error = None
    if reference_displacement is not None:
        traj = predict_mean(system, desired, stage1.value, alpha, r_scale)
        displacement_error = relative_rms_error(
            traj.displacement, np.asarray(reference_displacement, dtype=float)
        )
    return FitResult(
        q=stage1.value,
        alpha=alpha,
        velocity_error_pct=velocity_error,
        displacement_error_pct=displacement_error,
        q_evaluations=stage1.evaluations,
        alpha_evaluations=alpha_evals,
        q_bracket=stage1.bracket,
        alpha_bracket=alpha_bracket,
    )
