"""Closed-loop simulation: mean trajectories and noisy trial ensembles.

The feedback law reads the forward-model estimate, so the realized control
sequence is the same on every trial; trials differ only through the
multiplicative noise injected into the plant. Ensembles draw one random
stream per trial, derived from (seed, trial index), which makes the
statistics independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .controller import GainSchedule
from .dynamics import DiscreteSystem, Geometry, NoiseModel
from .errors import ContractError


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled displacement and velocity, one column per axis."""

    dt: float
    time_s: np.ndarray
    displacement: np.ndarray
    velocity: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    label: str = ""

    @property
    def n_samples(self) -> int:
        return self.time_s.shape[0]

    @property
    def axes(self) -> int:
        return self.displacement.shape[1]


@dataclass(frozen=True)
class EnsembleStats:
    """Aggregated Monte-Carlo rollout of one gain schedule."""

    mean: Trajectory
    covariance: np.ndarray          # (N, n, n) per-step state covariance
    final_mean: np.ndarray          # mean final displacement per axis
    final_std: np.ndarray           # std of final displacement per axis
    trials: int
    seed: int
    alpha: float
    states: np.ndarray | None = field(default=None, repr=False)


def _check_rollout_args(
    system: DiscreteSystem, schedule: GainSchedule, x_1: np.ndarray, n_steps: int
) -> np.ndarray:
    if schedule.n != system.n or schedule.m != system.m:
        raise ContractError(
            f"schedule is for (n={schedule.n}, m={schedule.m}), "
            f"plant has (n={system.n}, m={system.m})"
        )
    if n_steps != schedule.horizon:
        raise ContractError(
            f"requested {n_steps} steps but schedule horizon is {schedule.horizon}"
        )
    x_1 = np.asarray(x_1, dtype=float)
    if x_1.shape != (system.n,):
        raise ContractError(f"initial state must have shape ({system.n},), got {x_1.shape}")
    return x_1


def _trajectory(system: DiscreteSystem, X: np.ndarray, U: np.ndarray, label: str) -> Trajectory:
    t = np.arange(X.shape[0]) * system.dt
    return Trajectory(
        dt=system.dt,
        time_s=t,
        displacement=X[:, list(system.displacement_rows)],
        velocity=X[:, list(system.velocity_rows)],
        states=X,
        controls=U,
        label=label,
    )


def simulate_mean(
    system: DiscreteSystem,
    schedule: GainSchedule,
    x_1: np.ndarray,
    n_steps: int,
    label: str = "",
) -> Trajectory:
    """Noise-free closed-loop rollout; equals the per-step ensemble mean."""
    x_1 = _check_rollout_args(system, schedule, x_1, n_steps)
    X, U = _kernels.mean_rollout(
        np.ascontiguousarray(system.A),
        np.ascontiguousarray(system.B),
        np.ascontiguousarray(schedule.G_seq),
        np.ascontiguousarray(schedule.b_seq),
        x_1,
    )
    return _trajectory(system, X, U, label)


def trial_noise_streams(seed: int, trials: int, steps: int, m: int) -> np.ndarray:
    """Standard normal draws, one independent child stream per trial."""
    children = np.random.SeedSequence(seed).spawn(trials)
    W = np.empty((trials, steps, m))
    for i, child in enumerate(children):
        W[i] = np.random.default_rng(child).standard_normal((steps, m))
    return W


def simulate_monte_carlo(
    system: DiscreteSystem,
    schedule: GainSchedule,
    x_1: np.ndarray,
    n_steps: int,
    trials: int,
    noise: NoiseModel | float,
    seed: int = 0,
    keep_trials: bool = False,
) -> EnsembleStats:
    """Propagate `trials` noisy rollouts under the scheduled controls.

    All trials share the deterministic control sequence (the forward model
    never sees the noise); per-trial randomness enters only through the
    signal-dependent plant noise. With alpha = 0 every trial reproduces the
    mean trajectory exactly.
    """
    if trials < 1:
        raise ContractError("trials must be positive")
    x_1 = _check_rollout_args(system, schedule, x_1, n_steps)
    alpha = noise.alpha if isinstance(noise, NoiseModel) else float(noise)
    if alpha < 0.0:
        raise ContractError("alpha must be non-negative")
    A = np.ascontiguousarray(system.A)
    B = np.ascontiguousarray(system.B)
    _, U = _kernels.mean_rollout(
        A, B, np.ascontiguousarray(schedule.G_seq), np.ascontiguousarray(schedule.b_seq), x_1
    )
    W = trial_noise_streams(seed, trials, n_steps - 1, system.m)
    mean, cov, finals, states = _kernels.ensemble(A, B, U, alpha, W, x_1, bool(keep_trials))
    disp = list(system.displacement_rows)
    return EnsembleStats(
        mean=_trajectory(system, mean, U, ""),
        covariance=cov,
        final_mean=finals[:, disp].mean(axis=0),
        final_std=finals[:, disp].std(axis=0),
        trials=trials,
        seed=seed,
        alpha=alpha,
        states=states,
    )


def simulate_oblique(
    system: DiscreteSystem,
    schedule: GainSchedule,
    x_1: np.ndarray,
    n_steps: int,
    label: str = "",
) -> Trajectory:
    """Mean rollout of the two-axis plant; columns are (horizontal, vertical).

    The block-diagonal plant keeps the axes uncoupled: this equals two
    independent single-axis rollouts assembled side by side.
    """
    if system.geometry is not Geometry.OBLIQUE:
        raise ContractError("oblique simulation needs the two-axis plant (n=4)")
    return simulate_mean(system, schedule, x_1, n_steps, label=label)
