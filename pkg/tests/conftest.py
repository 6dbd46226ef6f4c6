"""Shared fixtures: standard discretized plants and a hand-sized toy system."""

import numpy as np
import pytest

from saccadeoc.controller import CostSpec
from saccadeoc.dynamics import (
    DiscretizationMethod,
    DiscreteSystem,
    Geometry,
    PlantConfig,
    build_continuous,
    discretize,
)

DT = 0.004


@pytest.fixture(scope="session")
def plant_h() -> DiscreteSystem:
    return discretize(
        build_continuous(PlantConfig()), DT, DiscretizationMethod.EXACT_EXPONENTIAL
    )


@pytest.fixture(scope="session")
def plant_o() -> DiscreteSystem:
    cfg = PlantConfig(geometry=Geometry.OBLIQUE)
    return discretize(build_continuous(cfg), DT, DiscretizationMethod.EXACT_EXPONENTIAL)


def scalar_toy() -> tuple[DiscreteSystem, CostSpec, float]:
    """One-state system small enough to solve by hand.

    x_{k+1} = 0.9 x_k + 0.5 (u_k + eps_k), three steps, unit state cost
    toward x_d = 1 on steps 2 and 3, unit control cost, alpha = 0.2.
    """
    system = DiscreteSystem(
        A=np.array([[0.9]]),
        B=np.array([[0.5]]),
        dt=1.0,
        method=DiscretizationMethod.EXACT_EXPONENTIAL,
        geometry=Geometry.HORIZONTAL,
    )
    N = 3
    Q = np.zeros((N, 1, 1))
    Q[1:] = 1.0
    R = np.ones((N - 1, 1, 1))
    x_d = np.zeros((N, 1))
    x_d[1:] = 1.0
    cost = CostSpec(Q_seq=Q, R_seq=R, x_d_seq=x_d)
    return system, cost, 0.2


# Normal equations of the toy's expected cost, solved exactly:
# H = [[2.9412, 0.45], [0.45, 2.52]], rhs = [1.9, 1.0].
TOY_DET = 2.9412 * 2.52 - 0.45 * 0.45
TOY_U = np.array([4.338 / TOY_DET, 2.0862 / TOY_DET])
