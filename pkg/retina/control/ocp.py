"""
Peak-temperature tracking problem on the discrete reduced model and its condensed QP.

    min  sum_{k=0}^{N-1} |c x_k - y_ref|^2 + rho |u_k - u_ref|^2
    s.t. x_{k+1} = A x_k + b u_k,  0 <= u_k <= u_max,  c x_k <= y_max

After eliminating the states, cost(u) = 1/2 u^T H u + q^T u + constant.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from retina.model import REFERENCE_MEAN, AbsorptionScale
from retina.reduction import ParametricROM

# Set up global logger for optimal control problems
logger = logging.getLogger(__name__)


class OcpSpec(BaseModel):
    """Tracking problem data; u_ref None means the steady input of the prediction model"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    horizon: int = Field(20, ge=2)
    y_ref: float = 30.0
    y_max: float = 32.0
    u_max: float = Field(0.1, ge=0)
    rho: float = Field(5e4, gt=0)
    u_ref: Optional[float] = None
    alpha: AbsorptionScale = REFERENCE_MEAN

    @model_validator(mode='after')
    def _consistent_bounds(self):
        if self.y_ref > self.y_max:
            raise ValueError(f'y_ref={self.y_ref} exceeds y_max={self.y_max}')
        if self.u_ref is not None and not 0 <= self.u_ref <= self.u_max:
            raise ValueError(f'u_ref={self.u_ref} outside [0, u_max={self.u_max}]')
        return self


@dataclass
class CondensedQP:
    """
    Dense QP in the inputs u_0..u_{N-1}:
        min 1/2 u^T H u + q^T u + constant   s.t.  lower <= G u <= upper
    G stacks the identity (input box) over the output rows for k = 1..N-1.
    """
    H: np.ndarray
    q: np.ndarray
    constant: float
    G: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    free_response: np.ndarray
    gamma: np.ndarray
    infeasible: bool = False

    @property
    def horizon(self) -> int:
        return len(self.q)

    def cost(self, u: np.ndarray) -> float:
        return float(0.5 * u @ self.H @ u + self.q @ u + self.constant)

    def predicted_outputs(self, u: np.ndarray) -> np.ndarray:
        """Predicted peak temperatures y_0..y_{N-1}"""
        return self.free_response + self.gamma @ u


class Condenser:
    """
    Prediction matrices of one (A, b, c) triple and spec; condense(x0) only recomputes the
    state-dependent gradient and bounds.
    """

    def __init__(self, spec: OcpSpec, A: np.ndarray, b: np.ndarray, c: np.ndarray, u_ref: Optional[float] = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        c = np.asarray(c, dtype=float).ravel()
        d = A.shape[0]
        if A.shape != (d, d) or b.shape != (d,) or c.shape != (d,):
            raise ValueError(f"incompatible prediction model shapes A{A.shape}, b{b.shape}, c{c.shape}")
        self.spec = spec
        self.A, self.b, self.c = A, b, c
        N = spec.horizon

        # Phi[k] = c A^k, markov[k] = c A^k b
        phi = np.empty((N, d))
        row = c.copy()
        for k in range(N):
            phi[k] = row
            row = row @ A
        markov = phi @ b
        gamma = np.zeros((N, N))
        for k in range(1, N):
            gamma[k, :k] = markov[k - 1::-1]
        self.phi = phi
        self.gamma = gamma

        if u_ref is None:
            u_ref = spec.u_ref if spec.u_ref is not None else self.steady_input(spec.y_ref)
        self.u_ref = float(np.clip(u_ref, 0.0, spec.u_max))
        self.H = 2.0 * (gamma.T @ gamma + spec.rho * np.eye(N))
        self.G = np.vstack([np.eye(N), gamma[1:]])

    def steady_input(self, y_target: float) -> float:
        """Constant input whose steady prediction-model output equals y_target"""
        gain = float(self.c @ np.linalg.solve(np.eye(len(self.b)) - self.A, self.b))
        if not gain > 0:
            raise ValueError(f"prediction model DC gain {gain:.3e} is not positive")
        return y_target / gain

    @classmethod
    def from_rom(cls, spec: OcpSpec, rom: ParametricROM, alpha: Optional[AbsorptionScale] = None) -> 'Condenser':
        A_d, B_d, C_r = rom.discrete(alpha or spec.alpha)
        return cls(spec, A_d, B_d, C_r[1])

    def condense(self, x0: np.ndarray) -> CondensedQP:
        spec = self.spec
        N = spec.horizon
        free = self.phi @ np.asarray(x0, dtype=float)
        offset = free - spec.y_ref
        q = 2.0 * self.gamma.T @ offset - 2.0 * spec.rho * self.u_ref * np.ones(N)
        constant = float(offset @ offset + N * spec.rho * self.u_ref ** 2)
        lower = np.concatenate([np.zeros(N), np.full(N - 1, -np.inf)])
        upper = np.concatenate([np.full(N, spec.u_max), spec.y_max - free[1:]])
        infeasible = bool(free[0] > spec.y_max)
        if infeasible:
            logger.debug(f"Current peak {free[0]:.4f} K already exceeds y_max={spec.y_max}")
        return CondensedQP(H=self.H, q=q, constant=constant, G=self.G, lower=lower, upper=upper,
                           free_response=free, gamma=self.gamma, infeasible=infeasible)


def condense(spec: OcpSpec, rom: ParametricROM, x0: np.ndarray, alpha: Optional[AbsorptionScale] = None) -> CondensedQP:
    """
    Condensed QP of the tracking problem at reduced state x0.

    Args:
        spec: OcpSpec
        rom: ParametricROM providing the discrete prediction model
        x0: current reduced state
        alpha: parameters of the prediction model (default spec.alpha)

    Returns:
        CondensedQP
    """
    return Condenser.from_rom(spec, rom, alpha).condense(x0)
