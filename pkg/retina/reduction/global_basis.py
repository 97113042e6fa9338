"""
Global projection basis from local IRKA bases at snapshot parameters, merged into one
Galerkin pair in the mass-weighted inner product under which the diffusion operator is symmetric.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from retina.model import AbsorptionScale, FullOrderModel, assemble_input, assemble_outputs
from retina.reduction.irka import IrkaOptions, ProjectionPair, ReductionError, irka

# Set up global logger for global-basis construction
logger = logging.getLogger(__name__)


def default_basis_params(snapshot_params: Sequence[AbsorptionScale]) -> List[AbsorptionScale]:
    """
    3 x 3 grid over the bounding box of `snapshot_params`, or 5 points along alpha_RPE when all
    snapshots share one alpha_ch.
    """
    rpe = [a.rpe for a in snapshot_params]
    ch = [a.ch for a in snapshot_params]
    if min(ch) == max(ch):
        return [AbsorptionScale(rpe=float(a), ch=ch[0]) for a in np.linspace(min(rpe), max(rpe), 5)]
    return [AbsorptionScale(rpe=float(a), ch=float(b))
            for a in np.linspace(min(rpe), max(rpe), 3)
            for b in np.linspace(min(ch), max(ch), 3)]


def galerkin_pair(model: FullOrderModel, blocks: Sequence[np.ndarray], d: int) -> ProjectionPair:
    """
    Order-d Galerkin pair in the inner product of model.mass from the span of `blocks`.

    Every block is orthonormalized on its own before stacking so that each local reduction
    weighs equally in the SVD. With V^T M V = I and W = M V, the reduced A_r = V^T M A V is
    symmetric negative definite and the projected implicit Euler matrix has real poles in (0, 1).

    Returns:
        ProjectionPair: with the singular values of the weighted stack in `info`
    """
    root = np.sqrt(model.mass)[:, None]
    weighted = [linalg.qr(root * block, mode='economic')[0] for block in blocks]
    U, singular_values, _ = np.linalg.svd(np.hstack(weighted), full_matrices=False)
    if d > len(singular_values) or singular_values[d - 1] <= singular_values[0] * np.finfo(float).eps * U.shape[0]:
        raise ReductionError(f"merged local bases span fewer than {d} directions")
    V = U[:, :d] / root
    return ProjectionPair(V=V, W=model.mass[:, None] * V, info={'singular_values': singular_values})


def global_basis(model: FullOrderModel, snapshot_params: Sequence[AbsorptionScale], d_local: int, d: int,
                 options: Optional[IrkaOptions] = None, threads: int = 1) -> ProjectionPair:
    """
    Merge local IRKA bases into one projection pair of order d.

    The trial space is spanned by the local V and by M^{-1} W, the state directions behind the
    local left bases (A is self-adjoint in the mass-weighted inner product, so A^T = M A M^{-1}).

    Args:
        model: FullOrderModel
        snapshot_params: parameters of the local reductions
        d_local: order of every local reduction
        d: order of the global basis
        options: IrkaOptions for the local runs
        threads: concurrent local reductions

    Returns:
        ProjectionPair: Galerkin pair with W^T V = I

    Raises:
        ReductionError: if too few local reductions succeed
    """
    if not snapshot_params:
        raise ValueError("at least one snapshot parameter is required")
    logger.info(f"Building global basis of order {d} from {len(snapshot_params)} snapshots (d_local={d_local})")

    def local(alpha: AbsorptionScale) -> dict:
        try:
            result = irka(model.A, assemble_input(model, alpha), assemble_outputs(model, alpha), d_local, options)
            return {'alpha': alpha, 'success': True, 'result': result}
        except (ReductionError, ValueError, np.linalg.LinAlgError) as e:
            logger.warning(f"Local IRKA at alpha={alpha} failed, skipping snapshot: {e}")
            return {'alpha': alpha, 'success': False, 'error': str(e)}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        runs = list(pool.map(local, snapshot_params))

    survivors = [run['result'] for run in runs if run['success']]
    required = min(2, len(snapshot_params))
    if len(survivors) < required:
        raise ReductionError(f"only {len(survivors)} of {len(snapshot_params)} local reductions succeeded")
    if d > 2 * d_local * len(survivors):
        raise ValueError(f"d={d} exceeds the {2 * d_local * len(survivors)} available local basis vectors")

    blocks = [r.pair.V for r in survivors] + [r.pair.W / model.mass[:, None] for r in survivors]
    pair = galerkin_pair(model, blocks, d)
    pair.info.update({
        'snapshots_used': len(survivors),
        'local_converged': sum(r.converged for r in survivors),
    })
    logger.info(f"Global basis ready: d={d}, biorth error {pair.biorth_error():.2e}")
    return pair
