"""Oculomotor plant model and its discretization.

The eyeball plus muscles are modelled as a second-order spring-mass-damper
parameterized by two time constants tau1 and tau2. State per axis is
[angular displacement (deg), angular velocity (deg/s)]; the control input is
displacement-equivalent (steady state of a constant input u is theta = u).
Oblique movements duplicate the plant block-diagonally, one block per axis,
with no cross-axis coupling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ConfigurationError, ContractError

DEFAULT_TAU1 = 0.223
DEFAULT_TAU2 = 0.014
DEFAULT_DT = 0.004


class Geometry(enum.Enum):
    HORIZONTAL = "horizontal"   # single axis, 2 states
    OBLIQUE = "oblique"         # two axes, 4 states


class DiscretizationMethod(enum.Enum):
    EXACT_EXPONENTIAL = "exact"
    FIRST_ORDER = "euler"


@dataclass(frozen=True)
class PlantConfig:
    """Plant time constants plus the controller sampling interval."""

    tau1: float = DEFAULT_TAU1
    tau2: float = DEFAULT_TAU2
    dt: float = DEFAULT_DT
    geometry: Geometry = Geometry.HORIZONTAL

    def __post_init__(self) -> None:
        if self.tau1 <= 0.0 or self.tau2 <= 0.0:
            raise ConfigurationError("time constants must be positive")
        if self.dt <= 0.0:
            raise ConfigurationError("dt must be positive")
        if self.dt >= min(self.tau1, self.tau2):
            raise ConfigurationError(
                "dt must resolve the fastest plant time constant "
                f"(dt={self.dt}, min tau={min(self.tau1, self.tau2)})"
            )


@dataclass(frozen=True)
class ContinuousSystem:
    """Continuous-time dynamics x' = A_c x + B_c u."""

    A_c: np.ndarray
    B_c: np.ndarray
    geometry: Geometry

    @property
    def n(self) -> int:
        return self.A_c.shape[0]

    @property
    def m(self) -> int:
        return self.B_c.shape[1]


@dataclass(frozen=True)
class DiscreteSystem:
    """Sampled dynamics x_{k+1} = A x_k + B (u_k + noise)."""

    A: np.ndarray
    B: np.ndarray
    dt: float
    method: DiscretizationMethod
    geometry: Geometry

    def __post_init__(self) -> None:
        if np.max(np.abs(np.linalg.eigvals(self.A))) >= 1.0:
            raise ConfigurationError("discretized plant must be stable (spectral radius < 1)")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def axes(self) -> int:
        return 2 if self.geometry is Geometry.OBLIQUE else 1

    @property
    def displacement_rows(self) -> tuple[int, ...]:
        return (0, 2) if self.geometry is Geometry.OBLIQUE else (0,)

    @property
    def velocity_rows(self) -> tuple[int, ...]:
        return (1, 3) if self.geometry is Geometry.OBLIQUE else (1,)


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative control noise: each channel receives alpha * u * w, w ~ N(0,1)."""

    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha < 0.0:
            raise ConfigurationError("alpha must be non-negative")


def _axis_blocks(tau1: float, tau2: float) -> tuple[np.ndarray, np.ndarray]:
    k = 1.0 / (tau1 * tau2)
    A = np.array([[0.0, 1.0], [-k, -(tau1 + tau2) * k]])
    B = np.array([[0.0], [k]])
    return A, B


def build_continuous(config: PlantConfig) -> ContinuousSystem:
    """Assemble the continuous plant for the configured geometry.

    Both eigenvalues of each axis block are real and negative
    (-1/tau1 and -1/tau2), so the plant is strictly stable.
    """
    Ab, Bb = _axis_blocks(config.tau1, config.tau2)
    if config.geometry is Geometry.HORIZONTAL:
        A_c, B_c = Ab, Bb
    else:
        A_c = np.zeros((4, 4))
        B_c = np.zeros((4, 2))
        A_c[:2, :2] = Ab
        A_c[2:, 2:] = Ab
        B_c[:2, :1] = Bb
        B_c[2:, 1:] = Bb
    return ContinuousSystem(A_c=A_c, B_c=B_c, geometry=config.geometry)


def discretize(
    system: ContinuousSystem,
    dt: float,
    method: DiscretizationMethod = DiscretizationMethod.EXACT_EXPONENTIAL,
) -> DiscreteSystem:
    """Sample the continuous plant with a zero-order hold on the input.

    EXACT_EXPONENTIAL integrates the hold exactly:
        A = expm(A_c dt),  B = A_c^{-1} (A - I) B_c.
    FIRST_ORDER is the explicit Euler pair A = I + A_c dt, B = B_c dt,
    retained for discretization-sensitivity comparisons.
    """
    if dt <= 0.0:
        raise ConfigurationError("dt must be positive")
    if method is DiscretizationMethod.EXACT_EXPONENTIAL:
        A = expm(system.A_c * dt)
        B = np.linalg.solve(system.A_c, (A - np.eye(system.n)) @ system.B_c)
    elif method is DiscretizationMethod.FIRST_ORDER:
        A = np.eye(system.n) + system.A_c * dt
        B = system.B_c * dt
    else:
        raise ConfigurationError(f"unknown discretization method: {method!r}")
    return DiscreteSystem(A=A, B=B, dt=dt, method=method, geometry=system.geometry)


def step_stochastic(
    system: DiscreteSystem,
    x: np.ndarray,
    u: np.ndarray | float,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """One plant step under signal-dependent control noise.

    x_{k+1} = A x + B (u + eps), eps_i = alpha * u_i * w_i with independent
    standard normal w_i per control channel. alpha = 0 or u = 0 makes the
    step deterministic.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (system.n,):
        raise ContractError(f"state must have shape ({system.n},), got {x.shape}")
    if u.shape != (system.m,):
        raise ContractError(f"control must have shape ({system.m},), got {u.shape}")
    eps = noise.alpha * u * rng.standard_normal(system.m)
    return system.A @ x + system.B @ (u + eps)


def noise_cost_contraction(system: DiscreteSystem, W: np.ndarray, alpha: float) -> np.ndarray:
    """Quadratic control penalty induced by the multiplicative noise.

    For E[(B eps)' W (B eps)] with per-channel eps_i = alpha u_i w_i the
    induced term is u' C u with C = alpha^2 Diag(B' W B); returned as the
    m x m diagonal matrix C. Zero when alpha = 0.
    """
    W = np.asarray(W, dtype=float)
    if W.shape != (system.n, system.n):
        raise ContractError(f"weight must have shape ({system.n}, {system.n}), got {W.shape}")
    if not np.allclose(W, W.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(W).max())):
        raise ContractError("weight matrix must be symmetric")
    return alpha * alpha * np.diag(np.diag(system.B.T @ W @ system.B))
