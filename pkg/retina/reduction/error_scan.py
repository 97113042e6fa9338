"""
Trajectory errors of reduced models against the full model over a parameter grid, and the
(order, d) sweep comparing both reduction methods.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from retina.model import REFERENCE_MEAN, AbsorptionScale, FullOrderModel, ParameterDomain
from retina.reduction.builders import (
    STUDIES,
    DeimSnapshots,
    build_deim_gb_rom,
    build_taylor_rom,
    collect_snapshots,
    scan_params,
    snapshot_params,
)
from retina.reduction.global_basis import default_basis_params, global_basis
from retina.reduction.irka import IrkaOptions, ReductionError
from retina.reduction.rom import ParametricROM
from retina.simulation import make_stepper, simulate, steady_state_control

# Set up global logger for reduction error scans
logger = logging.getLogger(__name__)

# Full-model outputs below this magnitude (K) are excluded from relative errors
OUTPUT_FLOOR = 1e-9

FAILED = '†'

OUTPUTS = ('vol', 'peak')

UPolicy = Union[None, float, Callable[[AbsorptionScale], np.ndarray]]


@dataclass
class ScanResult:
    """err_inf and err_inf,2 per output, maximized over the parameter grid"""
    stable: bool
    err_inf: Dict[str, float] = field(default_factory=dict)
    err_l2: Dict[str, float] = field(default_factory=dict)
    per_alpha: List[dict] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return not self.stable


@dataclass
class ReferenceRun:
    alpha: AbsorptionScale
    u: np.ndarray
    y_vol: np.ndarray
    y_peak: np.ndarray


def relative_errors(y_full: np.ndarray, y_reduced: np.ndarray, floor: float = OUTPUT_FLOOR) -> Tuple[float, float]:
    """
    Pointwise maximum and L2 relative errors over samples with |y_full| >= floor.

    Returns:
        tuple: (max_i |e_i|/|y_i|, sqrt(sum e_i^2 / sum y_i^2))
    """
    mask = np.abs(y_full) >= floor
    if not mask.any():
        return 0.0, 0.0
    reference = y_full[mask]
    error = y_reduced[mask] - reference
    return (float(np.max(np.abs(error) / np.abs(reference))),
            float(np.sqrt(np.sum(error ** 2) / np.sum(reference ** 2))))


def _policy_input(model: FullOrderModel, alpha: AbsorptionScale, horizon: int, u_policy: UPolicy) -> np.ndarray:
    if u_policy is None:
        return np.full(horizon, steady_state_control(model, alpha))
    if callable(u_policy):
        u = np.asarray(u_policy(alpha), dtype=float)
        if len(u) != horizon:
            raise ValueError(f"input policy returned {len(u)} samples, expected {horizon}")
        return u
    return np.full(horizon, float(u_policy))


def reference_runs(model: FullOrderModel, alpha_grid: Sequence[AbsorptionScale], horizon: int = 1000,
                   u_policy: UPolicy = None, threads: int = 1) -> List[ReferenceRun]:
    """
    Full-model outputs per grid point under the input policy (default: constant power with a
    30 K steady peak temperature).
    """
    inputs = [_policy_input(model, alpha, horizon, u_policy) for alpha in alpha_grid]

    def run(item):
        alpha, u = item
        trajectory = simulate(make_stepper(model), alpha, u)
        return ReferenceRun(alpha=alpha, u=u, y_vol=trajectory.y_vol, y_peak=trajectory.y_peak)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(run, zip(alpha_grid, inputs)))


def error_scan(rom: ParametricROM, model: FullOrderModel, alpha_grid: Sequence[AbsorptionScale],
               horizon: int = 1000, u_policy: UPolicy = None, references: Optional[List[ReferenceRun]] = None,
               threads: int = 1) -> ScanResult:
    """
    Compare reduced and full trajectories over alpha_grid.

    Args:
        rom: ParametricROM
        model: FullOrderModel the ROM was built from
        alpha_grid: parameters to scan
        horizon: samples per trajectory
        u_policy: None (steady control for 30 K), a constant power or a callable alpha -> inputs
        references: precomputed full-model runs for alpha_grid
        threads: concurrent full-model simulations

    Returns:
        ScanResult: unstable ROMs yield a failed result without errors
    """
    if not rom.stable:
        logger.warning(f"Skipping error scan of unstable {rom.variant} ROM (d={rom.d})")
        return ScanResult(stable=False)
    references = references or reference_runs(model, alpha_grid, horizon, u_policy, threads)

    rows = []
    for run in references:
        y_vol, y_peak = rom.simulate(run.alpha, run.u)
        inf_vol, l2_vol = relative_errors(run.y_vol, y_vol)
        inf_peak, l2_peak = relative_errors(run.y_peak, y_peak)
        rows.append({'alpha_rpe': run.alpha.rpe, 'alpha_ch': run.alpha.ch,
                     'err_inf_vol': inf_vol, 'err_l2_vol': l2_vol,
                     'err_inf_peak': inf_peak, 'err_l2_peak': l2_peak})

    result = ScanResult(
        stable=True,
        err_inf={out: max(row[f'err_inf_{out}'] for row in rows) for out in OUTPUTS},
        err_l2={out: max(row[f'err_l2_{out}'] for row in rows) for out in OUTPUTS},
        per_alpha=rows,
    )
    if not all(np.isfinite(v) for v in (*result.err_inf.values(), *result.err_l2.values())):
        logger.warning(f"Non-finite reduction error for {rom.variant} ROM (d={rom.d}), marking as failed")
        return ScanResult(stable=False, per_alpha=rows)
    logger.debug(f"{rom.variant} ROM d={rom.d}: err_inf={result.err_inf}, err_l2={result.err_l2}")
    return result


@dataclass
class ErrorTable:
    """Scan results indexed by (order, d); order is k_D for deim_gb and k_T for taylor"""
    method: str
    study: str
    orders: List[int]
    dims: List[int]
    cells: Dict[Tuple[int, int], Optional[ScanResult]] = field(default_factory=dict)

    def value(self, order: int, d: int, metric: str, output: str) -> Optional[float]:
        cell = self.cells.get((order, d))
        if cell is None or cell.failed:
            return None
        return getattr(cell, metric)[output]

    def frame(self, metric: str, output: str) -> pd.DataFrame:
        """Rows = order, columns = d, failed cells marked with a dagger"""
        data = {
            d: [FAILED if (v := self.value(k, d, metric, output)) is None else f'{v:.6e}' for k in self.orders]
            for d in self.dims
        }
        return pd.DataFrame(data, index=pd.Index(self.orders, name='k'))


@dataclass
class MorComparison:
    tables: List[ErrorTable]
    snapshots: Dict[str, DeimSnapshots]

    def error_frame(self, metric: str) -> pd.DataFrame:
        """One block per (method, study, output) in long layout"""
        frames = []
        for table in self.tables:
            for output in OUTPUTS:
                frame = table.frame(metric, output).reset_index()
                frame.insert(0, 'output', output)
                frame.insert(0, 'study', table.study)
                frame.insert(0, 'method', table.method)
                frames.append(frame)
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def singular_values_frame(self) -> pd.DataFrame:
        frames = []
        for study, snapshots in self.snapshots.items():
            frame = snapshots.to_frame()
            frame.insert(0, 'study', study)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)


def compare_mor(model: FullOrderModel, domain: Optional[ParameterDomain] = None, dims: Sequence[int] = (5, 6, 7, 8),
                deim_orders: Sequence[int] = (3,), taylor_orders: Sequence[int] = (3,),
                studies: Sequence[str] = STUDIES, n_snapshots: int = 20, scan_n: int = 5,
                horizon: int = 1000, alpha_ch: float = REFERENCE_MEAN.ch,
                alpha0: Optional[AbsorptionScale] = None, options: Optional[IrkaOptions] = None,
                threads: int = 1) -> MorComparison:
    """
    Sweep DEIM (k_D, d) and Taylor (k_T, d) cells for each parameter study.

    Args:
        model: FullOrderModel
        domain: parameter domain D
        dims: reduced orders d
        deim_orders: DEIM dimensions k_D
        taylor_orders: Taylor orders k_T
        studies: subset of ('rpe-only', 'two-param')
        n_snapshots: DEIM snapshot count
        scan_n: error-scan grid resolution per parameter
        horizon: samples per trajectory
        alpha_ch: held choroid value in the rpe-only study
        alpha0: Taylor expansion point (default reference mean, alpha_ch held in rpe-only)
        options: IrkaOptions
        threads: worker threads for snapshot IRKA runs and reference simulations

    Returns:
        MorComparison: one ErrorTable per method and study plus snapshot spectra
    """
    domain = domain or ParameterDomain()
    tables, spectra = [], {}
    for study in studies:
        logger.info(f"compare_mor: {study} study, d={list(dims)}")
        params = snapshot_params(domain, study, n_snapshots, alpha_ch)
        grid = scan_params(domain, study, scan_n, alpha_ch)
        snapshots = collect_snapshots(model, params)
        spectra[study] = snapshots
        references = reference_runs(model, grid, horizon, threads=threads)

        deim_table = ErrorTable(method='deim_gb', study=study, orders=list(deim_orders), dims=list(dims))
        basis_params = default_basis_params(params)
        for d in dims:
            try:
                basis = global_basis(model, basis_params, d, d, options, threads)
            except (ReductionError, ValueError, np.linalg.LinAlgError) as e:
                logger.warning(f"Global basis d={d} failed in {study} study: {e}")
                deim_table.cells.update({(k, d): None for k in deim_orders})
                continue
            for k in deim_orders:
                try:
                    rom = build_deim_gb_rom(model, params, d, k, basis=basis, snapshots=snapshots, domain=domain)
                    deim_table.cells[(k, d)] = error_scan(rom, model, grid, horizon, references=references)
                except Exception:
                    logger.exception(f"DEIM cell k={k}, d={d} failed in {study} study")
                    deim_table.cells[(k, d)] = None

        expansion = alpha0 or REFERENCE_MEAN
        if study == 'rpe-only':
            expansion = AbsorptionScale(rpe=expansion.rpe, ch=alpha_ch)
        taylor_table = ErrorTable(method='taylor', study=study, orders=list(taylor_orders), dims=list(dims))
        for order in taylor_orders:
            for d in dims:
                try:
                    rom = build_taylor_rom(model, expansion, order, d, mode=study, domain=domain, options=options)
                    taylor_table.cells[(order, d)] = error_scan(rom, model, grid, horizon, references=references)
                except Exception:
                    logger.exception(f"Taylor cell k={order}, d={d} failed in {study} study")
                    taylor_table.cells[(order, d)] = None
        tables.extend([deim_table, taylor_table])
    return MorComparison(tables=tables, snapshots=spectra)
