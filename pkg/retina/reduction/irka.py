"""
Tangential iterative rational Krylov algorithm (IRKA) for sparse stable LTI systems

    x' = A x + B u,    y = C x

plus small dense helpers (H2 norm, balanced truncation) used as reference reductions.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg, sparse
from scipy.sparse.linalg import splu

# Set up global logger for IRKA
logger = logging.getLogger(__name__)

# Condition limit of W^T V during bi-orthonormalization
BIORTH_COND_LIMIT = 1e12

# Relative imaginary part below which a shift counts as real
_REAL_SHIFT_TOL = 1e-12


class ReductionError(RuntimeError):
    """A projection could not be constructed"""


class IrkaOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    max_iter: int = Field(50, ge=1)
    tol: float = Field(1e-4, gt=0, description='relative change of the sorted shifts')
    shift_range: Tuple[float, float] = (1e-1, 1e4)
    perturbation: float = Field(1e-8, gt=0, description='relative shift perturbation after a singular solve')


@dataclass
class ProjectionPair:
    """Projection bases with W^T V = I; Galerkin in the mass inner product when W = M V"""
    V: np.ndarray
    W: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.V.shape[1]

    def biorth_error(self) -> float:
        return float(np.linalg.norm(self.W.T @ self.V - np.eye(self.d)))

    def project(self, A, B, C) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Reduced triple (W^T A V, W^T B, C V)"""
        return self.W.T @ (A @ self.V), self.W.T @ _as_matrix(B, column=True), _as_matrix(C) @ self.V


@dataclass
class IrkaResult:
    pair: ProjectionPair
    A_r: np.ndarray
    B_r: np.ndarray
    C_r: np.ndarray
    shifts: np.ndarray
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


def _as_matrix(M, column: bool = False) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim == 1:
        return M.reshape(-1, 1) if column else M.reshape(1, -1)
    return M


def biorthonormalize(V: np.ndarray, W: np.ndarray) -> ProjectionPair:
    """
    Orthonormalize both bases, then rescale W so that W^T V = I.

    Raises:
        ReductionError: if W^T V is numerically singular
    """
    if V.shape != W.shape:
        raise ValueError(f"V has shape {V.shape} but W has shape {W.shape}")
    V, _ = linalg.qr(V, mode='economic')
    W, _ = linalg.qr(W, mode='economic')
    gram = W.T @ V
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > BIORTH_COND_LIMIT:
        raise ReductionError(f"W^T V is singular to working precision (cond={condition:.3e})")
    W = W @ np.linalg.inv(gram).T
    return ProjectionPair(V=V, W=W, info={'biorth_cond': float(condition)})


def _factor(A: sparse.csc_matrix, sigma: complex, perturbation: float):
    identity = sparse.identity(A.shape[0], format='csc')
    for attempt in range(2):
        try:
            return splu((sigma * identity - A).tocsc())
        except RuntimeError as e:
            if attempt:
                raise ReductionError(f"shifted system singular at sigma={sigma}") from e
            logger.warning(f"Shifted solve singular at sigma={sigma}, perturbing shift")
            sigma = sigma + perturbation * max(1.0, abs(sigma))


def _tangential_bases(A, B, C, shifts, b_dirs, c_dirs, options: IrkaOptions):
    """Real bases spanning (sigma I - A)^{-1} B b and (sigma I - A)^{-T} C^T c per shift"""
    v_cols, w_cols = [], []
    for sigma, b, c in zip(shifts, b_dirs, c_dirs):
        real = abs(sigma.imag) <= _REAL_SHIFT_TOL * abs(sigma)
        if not real and sigma.imag < 0:
            continue
        if real:
            lu = _factor(A, float(sigma.real), options.perturbation)
            v = lu.solve(B @ b.real)
            w = lu.solve(C.T @ c.real, trans='T')
            v_cols.append(v)
            w_cols.append(w)
        else:
            lu = _factor(A, complex(sigma), options.perturbation)
            v = lu.solve((B @ b).astype(complex))
            w = lu.solve((C.T @ c).astype(complex), trans='T')
            v_cols.extend([v.real, v.imag])
            w_cols.extend([w.real, w.imag])
    return np.column_stack(v_cols), np.column_stack(w_cols)


def _sorted(shifts, b_dirs, c_dirs):
    order = np.lexsort((shifts.imag, shifts.real))
    return shifts[order], b_dirs[order], c_dirs[order]


def irka(A, B, C, d: int, options: Optional[IrkaOptions] = None) -> IrkaResult:
    """
    Reduce (A, B, C) to order d by tangential IRKA.

    Args:
        A: n x n sparse or dense stable matrix
        B: n x m input matrix (a vector is taken as one column)
        C: l x n output matrix (a vector is taken as one row)
        d: reduced order
        options: IrkaOptions

    Returns:
        IrkaResult: the last successful iterate; `converged` is False if the shift
        iteration stopped early or hit the iteration limit
    """
    options = options or IrkaOptions()
    A = sparse.csc_matrix(A)
    B = _as_matrix(B, column=True).astype(float)
    C = _as_matrix(C).astype(float)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
        raise ValueError(f"incompatible shapes A{A.shape}, B{B.shape}, C{C.shape}")
    if not 1 <= d <= n:
        raise ValueError(f"reduced order must lie in [1, {n}], got {d}")

    low, high = options.shift_range
    shifts = np.logspace(np.log10(low), np.log10(high), d).astype(complex)
    b_lead = linalg.svd(B, full_matrices=False)[2][0]
    c_lead = linalg.svd(C, full_matrices=False)[0][:, 0]
    b_dirs = np.tile(b_lead.astype(complex), (d, 1))
    c_dirs = np.tile(c_lead.astype(complex), (d, 1))
    logger.debug(f"IRKA started: n={n}, m={B.shape[1]}, l={C.shape[0]}, d={d}")

    best = None
    history = []
    converged = False
    iteration = 0
    for iteration in range(1, options.max_iter + 1):
        try:
            V, W = _tangential_bases(A, B, C, shifts, b_dirs, c_dirs, options)
            pair = biorthonormalize(V, W)
        except ReductionError:
            if best is None:
                raise
            logger.warning(f"IRKA iteration {iteration} failed, returning previous iterate")
            break

        A_r, B_r, C_r = pair.project(A, B, C)
        best = IrkaResult(pair=pair, A_r=A_r, B_r=B_r, C_r=C_r, shifts=shifts.copy(),
                          iterations=iteration, converged=False, history=history)

        poles, X = linalg.eig(A_r)
        new_shifts = np.abs(poles.real) + 1j * poles.imag
        new_b = linalg.solve(X, B_r.astype(complex))
        new_c = (C_r @ X).T
        new_shifts, new_b, new_c = _sorted(new_shifts, new_b, new_c)

        change = float(np.linalg.norm(new_shifts - shifts) / np.linalg.norm(shifts))
        history.append(change)
        logger.debug(f"IRKA iteration {iteration}: relative shift change {change:.3e}")
        shifts, b_dirs, c_dirs = new_shifts, new_b, new_c
        if change <= options.tol:
            converged = True
            break

    best.converged = converged
    if converged:
        logger.debug(f"IRKA converged in {best.iterations} iterations (d={d})")
    else:
        logger.warning(f"IRKA stopped without convergence after {iteration} iterations (d={d})")
    return best


def h2_norm(A, B, C) -> float:
    """H2 norm of a small dense stable system from the controllability Gramian"""
    A = np.asarray(A.toarray() if sparse.issparse(A) else A, dtype=float)
    B = _as_matrix(B, column=True)
    C = _as_matrix(C)
    gramian = linalg.solve_continuous_lyapunov(A, -B @ B.T)
    return float(np.sqrt(max(np.trace(C @ gramian @ C.T), 0.0)))


def h2_error(full: Tuple, reduced: Tuple) -> float:
    """H2 norm of the error system between two (A, B, C) triples"""
    A, B, C = (np.asarray(M.toarray() if sparse.issparse(M) else M, dtype=float) for M in full)
    A_r, B_r, C_r = (np.asarray(M, dtype=float) for M in reduced)
    A_e = linalg.block_diag(A, A_r)
    B_e = np.vstack([_as_matrix(B, column=True), _as_matrix(B_r, column=True)])
    C_e = np.hstack([_as_matrix(C), -_as_matrix(C_r)])
    return h2_norm(A_e, B_e, C_e)


def _gramian_factor(gramian: np.ndarray) -> np.ndarray:
    values, vectors = linalg.eigh(0.5 * (gramian + gramian.T))
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def balanced_truncation(A, B, C, d: int) -> ProjectionPair:
    """Square-root balanced truncation of a small dense stable system"""
    A = np.asarray(A.toarray() if sparse.issparse(A) else A, dtype=float)
    B = _as_matrix(B, column=True)
    C = _as_matrix(C)
    controllability = _gramian_factor(linalg.solve_continuous_lyapunov(A, -B @ B.T))
    observability = _gramian_factor(linalg.solve_continuous_lyapunov(A.T, -C.T @ C))
    U, hankel, Vt = linalg.svd(observability.T @ controllability)
    if hankel[d - 1] <= 0:
        raise ReductionError(f"system has fewer than {d} nonzero Hankel singular values")
    scale = 1.0 / np.sqrt(hankel[:d])
    V = controllability @ Vt[:d].T * scale
    W = observability @ U[:, :d] * scale
    return ProjectionPair(V=V, W=W, info={'hankel_singular_values': hankel})
