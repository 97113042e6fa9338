"""
L2 norms of the alpha-derivatives of the attenuation profile g_alpha over the absorbing layers.
"""
import logging
from typing import Tuple

import numpy as np
from scipy import integrate

from retina.model import AbsorptionScale, LayerStack
from retina.model.absorption import CHOROID, RPE, attenuation

# Set up global logger for attenuation sensitivities
logger = logging.getLogger(__name__)

UNITS = ('micron', 'si')

_WHICH = {'rpe': (1, 0), 'ch': (0, 1)}

# Lengths in micrometres: g scales by 1e-6 and dz by 1e6, so the norm scales by 1e-3
_MICRON = 1e-6
_SI_PER_MICRON_NORM = 1e3

_QUAD_TOL = 1e-10


def _segment_norm_squared(layers: LayerStack, alpha: AbsorptionScale, code: int, thickness: float,
                          orders: Tuple[int, int]) -> float:
    """Integral of |d g|^2 over one layer in micrometre units"""
    def integrand(s):
        value = attenuation(layers, alpha, [code], [s * _MICRON], orders)[0] * _MICRON
        return value * value

    value, error = integrate.quad(integrand, 0.0, thickness / _MICRON, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
    logger.debug(f"quad over layer code {code}: {value:.10g} (error estimate {error:.1e})")
    return value


def g_partial_norm(layers: LayerStack, alpha: AbsorptionScale, which: str, units: str = 'micron') -> float:
    """
    L2 norm of dg/d alpha_which over the RPE and choroid.

    Args:
        layers: LayerStack
        alpha: evaluation point
        which: 'rpe' or 'ch'
        units: 'micron' (lengths in um, mu in 1/um) or 'si'

    Returns:
        float: non-negative norm
    """
    if which not in _WHICH:
        raise ValueError(f"which must be 'rpe' or 'ch', got '{which}'")
    if units not in UNITS:
        raise ValueError(f"units must be one of {UNITS}, got '{units}'")
    orders = _WHICH[which]
    squared = (_segment_norm_squared(layers, alpha, RPE, layers.rpe, orders)
               + _segment_norm_squared(layers, alpha, CHOROID, layers.choroid, orders))
    norm = float(np.sqrt(squared))
    return norm * _SI_PER_MICRON_NORM if units == 'si' else norm


def scaled_g_sensitivities(layers: LayerStack, alpha: AbsorptionScale, sigma: AbsorptionScale,
                           units: str = 'micron') -> Tuple[float, float]:
    """Norms weighted by one standard deviation per parameter: (s_rpe, s_ch)"""
    return (g_partial_norm(layers, alpha, 'rpe', units) * sigma.rpe,
            g_partial_norm(layers, alpha, 'ch', units) * sigma.ch)
