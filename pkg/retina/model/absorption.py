"""
Lambert-Beer attenuation profile g_alpha and its closed-form derivatives in alpha.

Inside the RPE (depth s below its top):
    g = a e^{-a s},                      a = alpha_RPE mu_RPE
Inside the choroid (depth t below its top):
    g = c e^{-a d_RPE} e^{-c t},         c = alpha_ch mu_ch
and zero elsewhere. The optical depth starts at the RPE top; retina and the unpigmented
layer do not attenuate.
"""
import logging
from typing import Tuple

import numpy as np

from retina.model.geometry import AbsorptionScale, LayerStack

# Set up global logger for absorption profiles
logger = logging.getLogger(__name__)

# Layer codes carried per mesh node and quadrature point
TRANSPARENT, RPE, CHOROID = 0, 1, 2

LAYER_CODES = {'rpe': RPE, 'choroid': CHOROID}

# Derivative selectors accepted by the operator assemblers
DERIVATIVE_ORDERS = {
    'none': (0, 0),
    'd_rpe': (1, 0),
    'd_ch': (0, 1),
}


def derivative_orders(deriv) -> Tuple[int, int]:
    """
    Resolve a derivative selector to (order in alpha_RPE, order in alpha_ch).

    Args:
        deriv: 'none', 'd_rpe', 'd_ch' or an explicit (i, j) pair

    Returns:
        tuple: non-negative derivative orders
    """
    if isinstance(deriv, str):
        if deriv not in DERIVATIVE_ORDERS:
            raise ValueError(f"deriv must be one of {sorted(DERIVATIVE_ORDERS)}, got '{deriv}'")
        return DERIVATIVE_ORDERS[deriv]
    i, j = (int(k) for k in deriv)
    if i < 0 or j < 0:
        raise ValueError(f"derivative orders must be non-negative, got {deriv}")
    return i, j


def _scaled_exp_derivative(order: int, alpha: float, mu: float, depth):
    """k-th alpha-derivative of alpha*mu*exp(-alpha*mu*depth)"""
    beta = mu * depth
    decay = np.exp(-alpha * beta)
    if order == 0:
        return alpha * mu * decay
    return mu * (-beta) ** (order - 1) * decay * (order - alpha * beta)


def _exp_derivative(order: int, alpha: float, rate: float) -> float:
    """k-th alpha-derivative of exp(-alpha*rate)"""
    return (-rate) ** order * np.exp(-alpha * rate)


def attenuation(layers: LayerStack, alpha: AbsorptionScale, codes, depth, orders=(0, 0)) -> np.ndarray:
    """
    Evaluate the (i, j)-th mixed alpha-derivative of g_alpha at points given by layer code and
    depth below the top of that layer.

    Args:
        layers: LayerStack with the reference coefficients
        alpha: absorption prefactors
        codes: layer code per point (TRANSPARENT, RPE, CHOROID)
        depth: depth of each point below the top of its own layer (m)
        orders: (i, j) derivative orders in (alpha_RPE, alpha_ch)

    Returns:
        np.ndarray: values in 1/m (per unit alpha^(i+j) for derivatives)
    """
    i, j = orders
    codes = np.asarray(codes)
    depth = np.asarray(depth, dtype=float)
    values = np.zeros(depth.shape)

    in_rpe = codes == RPE
    if j == 0 and in_rpe.any():
        values[in_rpe] = _scaled_exp_derivative(i, alpha.rpe, layers.mu_rpe, depth[in_rpe])

    in_choroid = codes == CHOROID
    if in_choroid.any():
        transmitted = _exp_derivative(i, alpha.rpe, layers.mu_rpe * layers.rpe)
        values[in_choroid] = transmitted * _scaled_exp_derivative(
            j, alpha.ch, layers.mu_choroid, depth[in_choroid])
    return values


def locate(layers: LayerStack, z) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map axial positions to (layer code, depth below layer top).
    Layers are half-open [top, bottom), so a point on an interface belongs to the lower layer.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    codes = np.full(z.shape, TRANSPARENT, dtype=int)
    depth = np.zeros(z.shape)
    for name, top, bottom in layers.interfaces():
        code = LAYER_CODES.get(name, TRANSPARENT)
        if code == TRANSPARENT:
            continue
        inside = (z >= top) & (z < bottom)
        codes[inside] = code
        depth[inside] = z[inside] - top
    return codes, depth


def absorption_profile(layers: LayerStack, alpha: AbsorptionScale, z):
    """
    Absorption coefficient mu(z) in 1/m: alpha_RPE*mu_RPE in the RPE, alpha_ch*mu_ch in the
    choroid, zero elsewhere (margins included).
    """
    codes, _ = locate(layers, z)
    mu = np.where(codes == RPE, alpha.rpe * layers.mu_rpe,
                  np.where(codes == CHOROID, alpha.ch * layers.mu_choroid, 0.0))
    return float(mu[0]) if np.ndim(z) == 0 else mu


def g_profile(layers: LayerStack, alpha: AbsorptionScale, z, deriv='none'):
    """Pointwise g_alpha(z) (or one of its derivatives) at positions measured from the retina surface"""
    codes, depth = locate(layers, z)
    values = attenuation(layers, alpha, codes, depth, derivative_orders(deriv))
    return float(values[0]) if np.ndim(z) == 0 else values
