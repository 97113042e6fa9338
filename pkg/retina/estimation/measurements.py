"""
Volume-temperature measurement records and the synthetic-measurement generator.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from retina.model import AbsorptionScale, FullOrderModel
from retina.simulation import Stepper, make_stepper, simulate

# Set up global logger for measurement handling
logger = logging.getLogger(__name__)


@dataclass
class MeasurementSet:
    """Input power u_k (W) and measured volume temperature y_k (K) at period delta"""
    u: np.ndarray
    y_meas: np.ndarray
    delta: float

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.y_meas = np.asarray(self.y_meas, dtype=float).ravel()
        if len(self.u) != len(self.y_meas):
            raise ValueError(f"u has {len(self.u)} samples but y_meas has {len(self.y_meas)}")
        if len(self.u) < 2:
            raise ValueError("a measurement set needs at least 2 samples")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def N(self) -> int:
        return len(self.u)

    @property
    def t(self) -> np.ndarray:
        return self.delta * np.arange(self.N)

    def truncated(self, horizon: int) -> 'MeasurementSet':
        """First `horizon` samples"""
        if not 2 <= horizon <= self.N:
            raise ValueError(f"horizon {horizon} outside [2, {self.N}]")
        return MeasurementSet(u=self.u[:horizon], y_meas=self.y_meas[:horizon], delta=self.delta)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.t, 'u': self.u, 'y_meas': self.y_meas})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.12g')

    @classmethod
    def from_csv(cls, path, delta: Optional[float] = None) -> 'MeasurementSet':
        """
        Read a CSV with columns t, u, y_meas. The period is taken from the t column unless
        given explicitly.
        """
        frame = pd.read_csv(path)
        missing = {'t', 'u', 'y_meas'} - set(frame.columns)
        if missing:
            raise ValueError(f"measurement file {path} lacks columns {sorted(missing)}")
        if delta is None:
            steps = np.diff(frame['t'].to_numpy(dtype=float))
            if len(steps) == 0 or not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
                raise ValueError(f"measurement file {path} has no uniform time grid")
            delta = float(steps[0])
        logger.info(f"Loaded {len(frame)} samples from {path} (delta={delta:g} s)")
        return cls(u=frame['u'].to_numpy(), y_meas=frame['y_meas'].to_numpy(), delta=delta)


def synth_measurements(model: FullOrderModel, alpha_true: AbsorptionScale, u_seq, noise_std: float,
                       seed: Optional[int] = None, stepper: Optional[Stepper] = None) -> MeasurementSet:
    """
    Simulated volume temperature plus i.i.d. Gaussian noise.

    Args:
        model: FullOrderModel
        alpha_true: parameters generating the data
        u_seq: laser power per sample (W)
        noise_std: noise standard deviation (K)
        seed: seed of the numpy Generator
        stepper: optional prebuilt Stepper

    Returns:
        MeasurementSet: y_meas[k] = C_vol x_k + eps_k
    """
    if noise_std < 0:
        raise ValueError(f"noise_std must be non-negative, got {noise_std}")
    stepper = stepper or make_stepper(model)
    clean = simulate(stepper, alpha_true, u_seq).y_vol
    noise = np.random.default_rng(seed).normal(0.0, noise_std, len(clean)) if noise_std > 0 else 0.0
    logger.debug(f"Synthesized {len(clean)} samples at alpha={alpha_true}, noise_std={noise_std}")
    return MeasurementSet(u=np.asarray(u_seq, dtype=float), y_meas=clean + noise, delta=stepper.delta)
