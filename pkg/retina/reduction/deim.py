"""
Discrete empirical interpolation of the parameter-dependent input and output operators.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

# Set up global logger for DEIM
logger = logging.getLogger(__name__)

# Interpolation matrices worse than this are reported
DEIM_COND_WARNING = 1e12


def snapshot_basis(snapshots: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Leading left singular vectors of a snapshot matrix.

    Args:
        snapshots: n x n_s matrix, one snapshot per column
        k: number of basis vectors

    Returns:
        tuple: (U with k orthonormal columns, all singular values, cumulative energy)
    """
    U, singular_values, _ = np.linalg.svd(snapshots, full_matrices=False)
    if not 1 <= k <= len(singular_values):
        raise ValueError(f"k must lie in [1, {len(singular_values)}], got {k}")
    return U[:, :k], singular_values, cumulative_energy(singular_values)


def cumulative_energy(singular_values: np.ndarray) -> np.ndarray:
    """sum_{i<=j} sigma_i^2 / sum_i sigma_i^2 for every j"""
    squares = np.asarray(singular_values, dtype=float) ** 2
    total = squares.sum()
    if total == 0:
        raise ValueError("snapshot matrix is zero")
    return np.cumsum(squares) / total


def deim_select(U: np.ndarray) -> np.ndarray:
    """
    Greedy DEIM interpolation indices of an orthonormal basis.

    Args:
        U: n x k basis with orthonormal columns

    Returns:
        np.ndarray: k distinct row indices in selection order

    Raises:
        ValueError: if a residual vanishes before k indices are chosen
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] > U.shape[0]:
        raise ValueError(f"expected an n x k basis with k <= n, got shape {U.shape}")
    n, k = U.shape
    tolerance = 10 * n * np.finfo(float).eps

    first = int(np.argmax(np.abs(U[:, 0])))
    if abs(U[first, 0]) <= tolerance:
        raise ValueError("first basis vector is zero")
    indices = [first]
    for column in range(1, k):
        coefficients = np.linalg.solve(U[indices, :column], U[indices, column])
        residual = U[:, column] - U[:, :column] @ coefficients
        index = int(np.argmax(np.abs(residual)))
        if abs(residual[index]) <= tolerance * max(1.0, np.linalg.norm(U[:, column])):
            raise ValueError(f"basis is rank deficient: zero DEIM residual at column {column}")
        indices.append(index)
    logger.debug(f"DEIM indices: {indices}")
    return np.array(indices, dtype=int)


@dataclass
class DeimOperator:
    """Basis U, interpolation indices and M = (P^T U)^{-1}"""
    basis: np.ndarray
    indices: np.ndarray
    interpolation: np.ndarray
    condition: float

    @property
    def k(self) -> int:
        return len(self.indices)

    def coefficients(self, sampled: np.ndarray) -> np.ndarray:
        """Coefficients M f[indices] of the interpolant U M f[indices]"""
        return self.interpolation @ sampled

    def interpolate(self, full: np.ndarray) -> np.ndarray:
        """U M P^T f for a full vector (or matrix with rows indexed by state)"""
        return self.basis @ self.coefficients(np.asarray(full)[self.indices])


def build_deim(U: np.ndarray) -> DeimOperator:
    indices = deim_select(U)
    sampled = U[indices, :]
    condition = float(np.linalg.cond(sampled))
    if condition > DEIM_COND_WARNING:
        logger.warning(f"DEIM interpolation matrix is ill-conditioned (cond={condition:.3e})")
    return DeimOperator(basis=U, indices=indices, interpolation=np.linalg.inv(sampled), condition=condition)
