"""
Reduction package.
IRKA, global bases, DEIM and the two parametric reduced models with their error analysis.
"""
from retina.reduction.irka import (
    IrkaOptions,
    IrkaResult,
    ProjectionPair,
    ReductionError,
    balanced_truncation,
    biorthonormalize,
    h2_error,
    h2_norm,
    irka,
)
from retina.reduction.deim import DeimOperator, build_deim, cumulative_energy, deim_select, snapshot_basis
from retina.reduction.global_basis import default_basis_params, galerkin_pair, global_basis
from retina.reduction.rom import (
    DeimROM,
    ParametricROM,
    TaylorROM,
    load_rom,
    rom_instantiate,
    save_rom,
)
from retina.reduction.builders import (
    STUDIES,
    DeimSnapshots,
    build_deim_gb_rom,
    build_taylor_rom,
    collect_snapshots,
    scan_params,
    snapshot_params,
    taylor_orders,
)
from retina.reduction.error_scan import (
    FAILED,
    ErrorTable,
    MorComparison,
    ScanResult,
    compare_mor,
    error_scan,
    reference_runs,
    relative_errors,
)

__all__ = [
    'IrkaOptions', 'IrkaResult', 'ProjectionPair', 'ReductionError', 'balanced_truncation',
    'biorthonormalize', 'h2_error', 'h2_norm', 'irka',
    'DeimOperator', 'build_deim', 'cumulative_energy', 'deim_select', 'snapshot_basis',
    'default_basis_params', 'galerkin_pair', 'global_basis',
    'DeimROM', 'ParametricROM', 'TaylorROM', 'load_rom', 'rom_instantiate', 'save_rom',
    'STUDIES', 'DeimSnapshots', 'build_deim_gb_rom', 'build_taylor_rom', 'collect_snapshots',
    'scan_params', 'snapshot_params', 'taylor_orders',
    'FAILED', 'ErrorTable', 'MorComparison', 'ScanResult', 'compare_mor', 'error_scan',
    'reference_runs', 'relative_errors',
]
