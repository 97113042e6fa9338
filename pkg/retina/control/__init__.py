"""
Control package.
Condensed tracking QPs on the reduced model, OSQP solves and closed-loop runs.
"""
from retina.control.ocp import CondensedQP, Condenser, OcpSpec, condense
from retina.control.qp import QpSolution, QpSolver, kkt_residuals, solve_qp
from retina.control.closed_loop import (
    PLANTS,
    ClosedLoopResult,
    horizon_sweep,
    run_closed_loop,
    timing_summary,
)

__all__ = [
    'CondensedQP', 'Condenser', 'OcpSpec', 'condense',
    'QpSolution', 'QpSolver', 'kkt_residuals', 'solve_qp',
    'PLANTS', 'ClosedLoopResult', 'horizon_sweep', 'run_closed_loop', 'timing_summary',
]
