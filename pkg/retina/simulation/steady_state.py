"""
Steady states, DC gains and the constant control reaching a target peak temperature.
Gains use G = -C A_c^{-1} B, so physical gains are positive and y = G u at steady state.
"""
import logging
from typing import Tuple

import numpy as np

from retina.model import (
    AbsorptionScale,
    FullOrderModel,
    assemble_input,
    assemble_output_peak,
    assemble_output_vol,
)

# Set up global logger for steady-state computations
logger = logging.getLogger(__name__)


def steady_state(model: FullOrderModel, alpha: AbsorptionScale, u: float = 1.0) -> np.ndarray:
    """Steady temperature field x = -A_c^{-1} B(alpha) u"""
    return -model.steady_lu.solve(assemble_input(model, alpha)) * u


def dc_gain(model: FullOrderModel, alpha: AbsorptionScale) -> Tuple[float, float]:
    """
    Steady-state gains from laser power to the outputs.

    Returns:
        tuple: (G_vol, G_peak) in K/W
    """
    x = steady_state(model, alpha)
    gains = float(assemble_output_vol(model, alpha) @ x), float(assemble_output_peak(model) @ x)
    logger.debug(f"dc_gain at alpha={alpha}: G_vol={gains[0]:.6g}, G_peak={gains[1]:.6g} K/W")
    return gains


def steady_state_control(model: FullOrderModel, alpha: AbsorptionScale, y_peak_target: float = 30.0) -> float:
    """
    Constant laser power whose steady peak temperature equals the target.

    Args:
        model: FullOrderModel
        alpha: absorption prefactors
        y_peak_target: target peak temperature rise in K

    Returns:
        float: power in W
    """
    _, gain = dc_gain(model, alpha)
    if not gain > 0:
        raise ValueError(f"peak gain {gain:.3e} K/W is not positive at alpha={alpha}")
    return y_peak_target / gain
