"""
Laser power sequences used as excitation.
"""
from typing import Sequence

import numpy as np


def constant_input(power: float, steps: int) -> np.ndarray:
    """`steps` samples of constant power (W)"""
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    return np.full(int(steps), float(power))


def piecewise_constant_input(levels: Sequence[float], durations: Sequence[int]) -> np.ndarray:
    """
    Multi-level signal: levels[i] held for durations[i] samples.

    Example:
        piecewise_constant_input([0.03, 0.045, 0.02], [240, 240, 241])
    """
    if len(levels) != len(durations):
        raise ValueError("levels and durations must have equal length")
    if any(d < 0 for d in durations):
        raise ValueError("durations must be non-negative")
    if len(levels) == 0:
        return np.zeros(0)
    return np.concatenate([np.full(int(d), float(level)) for level, d in zip(levels, durations)])
