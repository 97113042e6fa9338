"""
Parameter-dependent input and output operators of the heat model.

B(alpha)    : chi(r <= R_I) g_alpha(z) / (rho C_p pi R_I^2)   (K/s per W)
C_vol(alpha): beam average over r <= R_I, integrated against g_alpha over the absorbing layers
C_peak      : temperature at the RPE center on the axis
"""
import logging
from math import factorial
from typing import Sequence

import numpy as np

from retina.model.absorption import attenuation, derivative_orders
from retina.model.discretization import FullOrderModel
from retina.model.geometry import AbsorptionScale

# Set up global logger for operator assembly
logger = logging.getLogger(__name__)


def assemble_input(model: FullOrderModel, alpha: AbsorptionScale, deriv='none') -> np.ndarray:
    """
    Input vector B(alpha) or one of its alpha-derivatives.

    Args:
        model: FullOrderModel
        alpha: absorption prefactors
        deriv: 'none', 'd_rpe', 'd_ch' or explicit (i, j) orders

    Returns:
        np.ndarray: state vector of length n
    """
    orders = derivative_orders(deriv)
    g = attenuation(model.layers, alpha, model.node_layer[1:-1], model.node_depth[1:-1], orders)
    return model.source_scale * np.outer(g, model.beam_mask).ravel()


def assemble_output_vol(model: FullOrderModel, alpha: AbsorptionScale, deriv='none') -> np.ndarray:
    """Volume-temperature covector C_vol(alpha) or one of its alpha-derivatives"""
    orders = derivative_orders(deriv)
    axial = model.quadrature.nodal_weights(model.layers, alpha, orders, len(model.z))[1:-1]
    return np.outer(axial, model.radial_weights).ravel()


def assemble_output_peak(model: FullOrderModel) -> np.ndarray:
    """Selection covector of the RPE center node; independent of alpha"""
    selector = np.zeros(model.n)
    selector[model.peak_index] = 1.0
    return selector


def assemble_outputs(model: FullOrderModel, alpha: AbsorptionScale) -> np.ndarray:
    """Stacked output matrix [C_vol; C_peak] of shape (2, n)"""
    return np.vstack([assemble_output_vol(model, alpha), assemble_output_peak(model)])


def input_coefficient(model: FullOrderModel, alpha0: AbsorptionScale, i: int, j: int) -> np.ndarray:
    """Taylor coefficient B_ij = d^(i+j)B / (d alpha_RPE^i d alpha_ch^j) / (i! j!) at alpha0"""
    return assemble_input(model, alpha0, (i, j)) / (factorial(i) * factorial(j))


def output_vol_coefficient(model: FullOrderModel, alpha0: AbsorptionScale, i: int, j: int) -> np.ndarray:
    """Taylor coefficient C_ij of C_vol at alpha0"""
    return assemble_output_vol(model, alpha0, (i, j)) / (factorial(i) * factorial(j))


class OperatorSampler:
    """
    Row-sparse evaluation of B(alpha) and [C_vol(alpha); C_peak] at a fixed set of state
    indices. Work per call depends only on the number of indices.
    """

    def __init__(self, model: FullOrderModel, indices: Sequence[int]):
        self.indices = np.asarray(indices, dtype=int)
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= model.n):
            raise ValueError(f"sample indices must lie in [0, {model.n})")
        self.layers = model.layers
        radial = self.indices % model.n_radial
        axial = self.indices // model.n_radial + 1

        self._codes = model.node_layer[axial]
        self._depth = model.node_depth[axial]
        self._input_scale = model.source_scale * model.beam_mask[radial]

        # quadrature points touching each sampled axial node
        quad = model.quadrature
        owners, codes, depths, weights = [], [], [], []
        for position, j in enumerate(axial):
            for nodes, node_weights in ((quad.left, quad.weight_left), (quad.right, quad.weight_right)):
                hit = np.flatnonzero(nodes == j)
                owners.append(np.full(hit.size, position))
                codes.append(quad.code[hit])
                depths.append(quad.depth[hit])
                weights.append(node_weights[hit])
        self._q_owner = np.concatenate(owners) if owners else np.zeros(0, dtype=int)
        self._q_code = np.concatenate(codes) if codes else np.zeros(0, dtype=int)
        self._q_depth = np.concatenate(depths) if depths else np.zeros(0)
        self._q_weight = np.concatenate(weights) if weights else np.zeros(0)
        self._radial_weight = model.radial_weights[radial]
        self._peak = (self.indices == model.peak_index).astype(float)

    def __len__(self):
        return self.indices.size

    def input_entries(self, alpha: AbsorptionScale, orders=(0, 0)) -> np.ndarray:
        g = attenuation(self.layers, alpha, self._codes, self._depth, orders)
        return self._input_scale * g

    def output_entries(self, alpha: AbsorptionScale, orders=(0, 0)) -> np.ndarray:
        """Selected columns of [C_vol; C_peak], shape (2, k)"""
        g = attenuation(self.layers, alpha, self._q_code, self._q_depth, orders)
        axial = np.bincount(self._q_owner, weights=g * self._q_weight, minlength=len(self))
        peak = self._peak if tuple(orders) == (0, 0) else np.zeros(len(self))
        return np.vstack([axial * self._radial_weight, peak])
