"""
Solution of the condensed QPs with a persistent OSQP workspace.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import osqp
from scipy import linalg, sparse

from retina.control.ocp import CondensedQP

# Set up global logger for QP solves
logger = logging.getLogger(__name__)

# Bounds beyond this magnitude are treated as absent by OSQP
QP_INFINITY = 1e30

_STATUS = {
    'solved': 'solved',
    'solved inaccurate': 'inaccurate',
    'maximum iterations reached': 'inaccurate',
    'run time limit reached': 'inaccurate',
    'primal infeasible': 'infeasible',
    'primal infeasible inaccurate': 'infeasible',
}


@dataclass
class QpSolution:
    u: np.ndarray
    iterations: int
    status: str
    dual: Optional[np.ndarray] = None

    @property
    def usable(self) -> bool:
        return self.status in ('solved', 'inaccurate') and self.u is not None and np.all(np.isfinite(self.u))


class QpSolver:
    """
    OSQP workspace for one Hessian and constraint matrix. Only the gradient and the bounds change
    between solves.
    """

    def __init__(self, qp: CondensedQP, eps: float = 1e-7, max_iter: int = 20000, warm_start: bool = True,
                 polish: bool = True):
        self.warm_start = warm_start
        self._problem = osqp.OSQP()
        self._problem.setup(
            P=sparse.triu(sparse.csc_matrix(qp.H), format='csc'),
            q=qp.q,
            A=sparse.csc_matrix(qp.G),
            l=np.clip(qp.lower, -QP_INFINITY, QP_INFINITY),
            u=np.clip(qp.upper, -QP_INFINITY, QP_INFINITY),
            eps_abs=eps,
            eps_rel=eps,
            max_iter=max_iter,
            polish=polish,
            polish_refine_iter=5,
            adaptive_rho_interval=25,
            warm_start=warm_start,
            verbose=False,
        )

    def solve(self, qp: CondensedQP, warm_u: Optional[np.ndarray] = None,
              warm_dual: Optional[np.ndarray] = None) -> QpSolution:
        """
        Args:
            qp: CondensedQP sharing H and G with the setup problem
            warm_u: primal start (ignored when the workspace is cold)
            warm_dual: dual start for the rows of G

        Returns:
            QpSolution: status is 'solved', 'inaccurate', 'infeasible' or 'failed'
        """
        if qp.infeasible:
            return QpSolution(u=None, iterations=0, status='infeasible')
        self._problem.update(q=qp.q, l=np.clip(qp.lower, -QP_INFINITY, QP_INFINITY),
                             u=np.clip(qp.upper, -QP_INFINITY, QP_INFINITY))
        if self.warm_start and warm_u is not None:
            if warm_dual is not None:
                self._problem.warm_start(x=warm_u, y=warm_dual)
            else:
                self._problem.warm_start(x=warm_u)
        result = self._problem.solve()
        status = _STATUS.get(result.info.status, 'failed')
        if status != 'solved':
            logger.debug(f"OSQP returned '{result.info.status}' after {result.info.iter} iterations")
        usable = status in ('solved', 'inaccurate')
        return QpSolution(u=np.asarray(result.x) if usable else None, iterations=int(result.info.iter),
                          status=status, dual=np.asarray(result.y) if usable else None)


def _unconstrained(qp: CondensedQP) -> bool:
    return bool(np.all(np.isneginf(qp.lower)) and np.all(np.isposinf(qp.upper)))


def solve_qp(qp: CondensedQP, warm_start: Optional[np.ndarray] = None, solver: Optional[QpSolver] = None,
             warm_dual: Optional[np.ndarray] = None) -> QpSolution:
    """
    Minimize the condensed QP.

    Args:
        qp: CondensedQP
        warm_start: primal start vector
        solver: persistent QpSolver (a fresh one is created if omitted)
        warm_dual: dual start vector

    Returns:
        QpSolution
    """
    if qp.infeasible:
        return QpSolution(u=None, iterations=0, status='infeasible')
    if _unconstrained(qp):
        u = linalg.cho_solve(linalg.cho_factor(qp.H), -qp.q)
        return QpSolution(u=u, iterations=0, status='solved', dual=np.zeros(len(qp.lower)))
    solver = solver or QpSolver(qp)
    return solver.solve(qp, warm_start, warm_dual)


def kkt_residuals(qp: CondensedQP, u: np.ndarray, dual: Optional[np.ndarray] = None) -> dict:
    """
    Optimality residuals with the OSQP sign convention (positive multipliers on upper bounds).

    Returns:
        dict: 'primal' (max bound violation), 'dual' (stationarity scaled by the data size),
        'dual_abs' (unscaled stationarity) and 'complementarity'
    """
    u = np.asarray(u, dtype=float)
    dual = np.zeros(len(qp.lower)) if dual is None else np.asarray(dual, dtype=float)
    rows = qp.G @ u
    primal = float(max(np.max(rows - qp.upper, initial=0.0), np.max(qp.lower - rows, initial=0.0)))

    terms = (qp.H @ u, qp.q, qp.G.T @ dual)
    scale = max(1.0, *(np.max(np.abs(t)) for t in terms))
    dual_abs = float(np.max(np.abs(sum(terms))))

    upper_gap = np.where(np.isfinite(qp.upper), rows - qp.upper, 0.0)
    lower_gap = np.where(np.isfinite(qp.lower), rows - qp.lower, 0.0)
    complementarity = float(np.max(np.abs(np.maximum(dual, 0.0) * upper_gap)
                                   + np.abs(np.minimum(dual, 0.0) * lower_gap), initial=0.0))
    return {'primal': primal, 'dual': dual_abs / scale, 'dual_abs': dual_abs,
            'complementarity': complementarity}
