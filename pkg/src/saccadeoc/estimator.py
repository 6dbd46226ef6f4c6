"""Internal forward model supplying the state estimate to the controller.

The model integrates an exact copy of the sampled plant with the issued
control, with no measurement update: x_hat_{k+1} = A x_hat_k + B u_k from
x_hat_0 = x_0. Because the control copy is uncorrupted, the estimate equals
the expected state, and the controls it generates are the same on every
noisy trial.
"""

from __future__ import annotations

import numpy as np

from .dynamics import DiscreteSystem
from .errors import ContractError


class ForwardModel:
    """Deterministic plant copy advanced by `predict`."""

    def __init__(self, system: DiscreteSystem, x_1: np.ndarray):
        x_1 = np.asarray(x_1, dtype=float)
        if x_1.shape != (system.n,):
            raise ContractError(f"initial state must have shape ({system.n},), got {x_1.shape}")
        self.A_f = system.A
        self.B_f = system.B
        self.x_hat = x_1.copy()

    @property
    def n(self) -> int:
        return self.A_f.shape[0]

    @property
    def m(self) -> int:
        return self.B_f.shape[1]

    def predict(self, u: np.ndarray | float) -> np.ndarray:
        """Advance the estimate one step with the issued control."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.m,):
            raise ContractError(f"control must have shape ({self.m},), got {u.shape}")
        self.x_hat = self.A_f @ self.x_hat + self.B_f @ u
        return self.x_hat


def predict(model: ForwardModel, u: np.ndarray | float) -> np.ndarray:
    return model.predict(u)
