"""
Construction of the two parametric reduced models:

- taylor:  IRKA on the system augmented with all Taylor coefficients of B and C_vol at alpha0
- deim_gb: global IRKA basis with DEIM-approximated input and output operators
"""
import logging
from dataclasses import dataclass
from math import ceil, sqrt
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from retina.model import (
    AbsorptionScale,
    FullOrderModel,
    OperatorSampler,
    ParameterDomain,
    assemble_input,
    assemble_output_peak,
    assemble_output_vol,
    input_coefficient,
    output_vol_coefficient,
)
from retina.reduction.deim import build_deim, cumulative_energy
from retina.reduction.global_basis import default_basis_params, global_basis
from retina.reduction.irka import IrkaOptions, ProjectionPair, irka
from retina.reduction.rom import DeimROM, TaylorROM
from retina.simulation import make_stepper

# Set up global logger for ROM construction
logger = logging.getLogger(__name__)

STUDIES = ('rpe-only', 'two-param')


def taylor_orders(order: int, mode: str = 'two-param') -> List[tuple]:
    """Multi-indices (i, j) with i + j <= order; alpha_ch is not expanded in rpe-only mode"""
    if order < 0:
        raise ValueError(f"Taylor order must be non-negative, got {order}")
    if mode == 'rpe-only':
        return [(i, 0) for i in range(order + 1)]
    if mode == 'two-param':
        return [(i, total - i) for total in range(order + 1) for i in range(total, -1, -1)]
    raise ValueError(f"mode must be one of {STUDIES}, got '{mode}'")


def snapshot_params(domain: ParameterDomain, mode: str, n_s: int = 20,
                    alpha_ch: Optional[float] = None) -> List[AbsorptionScale]:
    """Uniform snapshot set over D: a line of n_s points, or a tensor grid with about n_s points"""
    if mode == 'rpe-only':
        return domain.line(n_s, domain.center.ch if alpha_ch is None else alpha_ch)
    n_rpe = int(ceil(sqrt(n_s)))
    return domain.grid(n_rpe, int(ceil(n_s / n_rpe)))


def scan_params(domain: ParameterDomain, mode: str, n: int = 5, alpha_ch: Optional[float] = None) -> List[AbsorptionScale]:
    """Error-scan grid: n x n over D, or 2n - 1 points along alpha_RPE"""
    if mode == 'rpe-only':
        return domain.line(2 * n - 1, domain.center.ch if alpha_ch is None else alpha_ch)
    return domain.grid(n, n)


@dataclass
class DeimSnapshots:
    """Snapshot matrices of B and C^T = [C_vol^T..., C_peak^T] with their SVDs"""
    params: List[AbsorptionScale]
    inputs: np.ndarray
    outputs: np.ndarray
    input_basis: np.ndarray
    input_singular_values: np.ndarray
    output_basis: np.ndarray
    output_singular_values: np.ndarray

    @property
    def input_energy(self) -> np.ndarray:
        return cumulative_energy(self.input_singular_values)

    @property
    def output_energy(self) -> np.ndarray:
        return cumulative_energy(self.output_singular_values)

    def to_frame(self) -> pd.DataFrame:
        frames = []
        for operator, values, energy in (('B', self.input_singular_values, self.input_energy),
                                         ('C', self.output_singular_values, self.output_energy)):
            frames.append(pd.DataFrame({'operator': operator, 'index': np.arange(1, len(values) + 1),
                                        'sigma': values, 'energy': energy}))
        return pd.concat(frames, ignore_index=True)


def collect_snapshots(model: FullOrderModel, params: Sequence[AbsorptionScale]) -> DeimSnapshots:
    if len(params) < 1:
        raise ValueError("at least one snapshot parameter is required")
    inputs = np.column_stack([assemble_input(model, alpha) for alpha in params])
    outputs = np.column_stack([assemble_output_vol(model, alpha) for alpha in params]
                              + [assemble_output_peak(model)])
    U_b, s_b, _ = np.linalg.svd(inputs, full_matrices=False)
    U_c, s_c, _ = np.linalg.svd(outputs, full_matrices=False)
    logger.debug(f"Snapshot SVDs over {len(params)} parameters: "
                 f"sigma_B[:4]={s_b[:4]}, sigma_C[:4]={s_c[:4]}")
    return DeimSnapshots(params=list(params), inputs=inputs, outputs=outputs,
                         input_basis=U_b, input_singular_values=s_b,
                         output_basis=U_c, output_singular_values=s_c)


def _implicit_euler_projection(model: FullOrderModel, pair: ProjectionPair, delta: float):
    """Z = (I - delta A_c)^{-T} W and A_d = Z^T V"""
    stepper = make_stepper(model, delta)
    Z = stepper.lu.solve(np.asfortranarray(pair.W), trans='T')
    return Z, Z.T @ pair.V


def build_taylor_rom(model: FullOrderModel, alpha0: AbsorptionScale, order: int, d: int,
                     mode: str = 'two-param', domain: Optional[ParameterDomain] = None,
                     options: Optional[IrkaOptions] = None, delta: Optional[float] = None) -> TaylorROM:
    """
    Taylor ROM of expansion order `order` and reduced order d about alpha0.

    Args:
        model: FullOrderModel
        alpha0: expansion point
        order: Taylor order k_T >= 1
        d: reduced order
        mode: 'two-param' or 'rpe-only' (expand in alpha_RPE only)
        domain: parameter domain recorded for out-of-domain warnings
        options: IrkaOptions
        delta: sample period of the discrete model (default grid.dt)

    Returns:
        TaylorROM: `stable` is False when a reduced pole is not strictly stable
    """
    if order < 1:
        raise ValueError(f"Taylor order must be at least 1, got {order}")
    delta = model.grid.dt if delta is None else delta
    orders = taylor_orders(order, mode)
    logger.info(f"Building Taylor ROM: order={order}, d={d}, {len(orders)} coefficients, alpha0={alpha0}")

    B_coeffs = np.column_stack([input_coefficient(model, alpha0, i, j) for i, j in orders])
    C_coeffs = np.vstack([output_vol_coefficient(model, alpha0, i, j) for i, j in orders])
    c_peak = assemble_output_peak(model)
    result = irka(model.A, B_coeffs, np.vstack([c_peak, C_coeffs]), d, options)
    pair = result.pair
    Z, A_d = _implicit_euler_projection(model, pair, delta)

    rom = TaylorROM(
        variant='taylor',
        pair=pair,
        A_r=result.A_r,
        A_d=A_d,
        delta=delta,
        domain=domain,
        metadata={'order': order, 'd': d, 'mode': mode, 'irka_iterations': result.iterations,
                  'irka_converged': result.converged},
        alpha0=alpha0,
        orders=orders,
        B_table=pair.W.T @ B_coeffs,
        B_table_d=delta * (Z.T @ B_coeffs),
        C_table=C_coeffs @ pair.V,
        c_peak=c_peak @ pair.V,
    )
    if not rom.stable:
        logger.warning(f"Taylor ROM (order={order}, d={d}) is unstable")
    return rom


def build_deim_gb_rom(model: FullOrderModel, snapshot_params: Sequence[AbsorptionScale], d: int, k: int,
                      basis_params: Optional[Sequence[AbsorptionScale]] = None, d_local: Optional[int] = None,
                      basis: Optional[ProjectionPair] = None, snapshots: Optional[DeimSnapshots] = None,
                      domain: Optional[ParameterDomain] = None, options: Optional[IrkaOptions] = None,
                      threads: int = 1, delta: Optional[float] = None) -> DeimROM:
    """
    Global-basis ROM with DEIM operators of k interpolation points each.

    Args:
        model: FullOrderModel
        snapshot_params: DEIM snapshot parameters
        d: reduced order
        k: DEIM dimension k_D
        basis_params: IRKA snapshot parameters (default: small grid over the snapshot box)
        d_local: local IRKA order (default d)
        basis: precomputed global ProjectionPair, skips the IRKA runs
        snapshots: precomputed DeimSnapshots for snapshot_params
        domain: parameter domain recorded for out-of-domain warnings
        options: IrkaOptions
        threads: concurrent local IRKA runs
        delta: sample period of the discrete model (default grid.dt)

    Returns:
        DeimROM
    """
    snapshots = snapshots or collect_snapshots(model, snapshot_params)
    if not 1 <= k <= snapshots.inputs.shape[1]:
        raise ValueError(f"k={k} must lie in [1, {snapshots.inputs.shape[1]}] (number of snapshots)")
    delta = model.grid.dt if delta is None else delta
    if basis is None:
        basis = global_basis(model, basis_params or default_basis_params(snapshot_params),
                             d_local or d, d, options, threads)
    if basis.d != d:
        raise ValueError(f"basis has order {basis.d}, expected {d}")
    logger.info(f"Building DEIM ROM: d={d}, k={k}, {len(snapshots.params)} snapshots")

    input_deim = build_deim(snapshots.input_basis[:, :k])
    output_deim = build_deim(snapshots.output_basis[:, :k])
    Z, A_d = _implicit_euler_projection(model, basis, delta)
    input_factor = input_deim.basis @ input_deim.interpolation

    rom = DeimROM(
        variant='deim_gb',
        pair=basis,
        A_r=basis.W.T @ (model.A @ basis.V),
        A_d=A_d,
        delta=delta,
        domain=domain,
        metadata={
            'd': d,
            'k': k,
            'snapshots': [a.model_dump() for a in snapshots.params],
            'input_singular_values': snapshots.input_singular_values,
            'output_singular_values': snapshots.output_singular_values,
            'input_condition': input_deim.condition,
            'output_condition': output_deim.condition,
        },
        input_sampler=OperatorSampler(model, input_deim.indices),
        output_sampler=OperatorSampler(model, output_deim.indices),
        B_side=basis.W.T @ input_factor,
        B_side_d=delta * (Z.T @ input_factor),
        C_side=output_deim.interpolation.T @ (output_deim.basis.T @ basis.V),
    )
    if not rom.stable:
        logger.warning(f"DEIM ROM (d={d}, k={k}) is unstable")
    return rom
