"""
Receding-horizon control of the reduced or the full heat model.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from retina.control.ocp import Condenser, OcpSpec
from retina.control.qp import QpSolution, QpSolver, solve_qp
from retina.model import AbsorptionScale, FullOrderModel, assemble_input, assemble_output_peak, assemble_output_vol
from retina.reduction import ParametricROM
from retina.simulation import make_stepper

# Set up global logger for closed-loop runs
logger = logging.getLogger(__name__)

PLANTS = ('reduced', 'full')


@dataclass
class ClosedLoopResult:
    """Plant outputs y_k, applied inputs u_k and QP statistics for k = 0..steps-1"""
    t: np.ndarray
    u: np.ndarray
    y_vol: np.ndarray
    y_peak: np.ndarray
    qp_iters: np.ndarray
    solve_time: np.ndarray
    status: List[str] = field(default_factory=list)
    flagged: List[int] = field(default_factory=list)
    horizon: int = 0
    u_max: float = 0.0

    @property
    def max_input_violation(self) -> float:
        return float(max(np.max(-self.u, initial=0.0), np.max(self.u - self.u_max, initial=0.0)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.t, 'u': self.u, 'y_vol': self.y_vol, 'y_peak': self.y_peak,
            'qp_iters': self.qp_iters, 'solve_ms': 1e3 * self.solve_time,
        })

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.12g')

    def summary(self) -> dict:
        return {
            'horizon': self.horizon,
            'steps': len(self.u),
            'avg_ms': float(1e3 * np.mean(self.solve_time)),
            'max_ms': float(1e3 * np.max(self.solve_time)),
            'avg_iters': float(np.mean(self.qp_iters)),
            'max_y_peak': float(np.max(self.y_peak)),
            'flagged_steps': len(self.flagged),
        }


class _ReducedPlant:
    def __init__(self, rom: ParametricROM, alpha: AbsorptionScale, x0: Optional[np.ndarray]):
        self.A, self.b, self.C = rom.discrete(alpha)
        self.x = np.zeros(rom.d) if x0 is None else np.asarray(x0, dtype=float)

    def outputs(self):
        y = self.C @ self.x
        return float(y[0]), float(y[1])

    def observe(self) -> np.ndarray:
        return self.x

    def step(self, u: float) -> None:
        self.x = self.A @ self.x + self.b * u


class _FullPlant:
    """Full model with the state projected by W^T for the controller"""

    def __init__(self, model: FullOrderModel, rom: ParametricROM, alpha: AbsorptionScale, x0: Optional[np.ndarray]):
        self.stepper = make_stepper(model, rom.delta)
        self.source = rom.delta * assemble_input(model, alpha)
        self.c_vol = assemble_output_vol(model, alpha)
        self.c_peak = assemble_output_peak(model)
        self.W = rom.pair.W
        self.x = np.zeros(model.n) if x0 is None else np.asarray(x0, dtype=float)

    def outputs(self):
        return float(self.c_vol @ self.x), float(self.c_peak @ self.x)

    def observe(self) -> np.ndarray:
        return self.W.T @ self.x

    def step(self, u: float) -> None:
        self.x = self.stepper.advance(self.x, self.source * u)


def _shift(vector: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
    """Shift each block of a stacked vector by one sample, repeating its last entry"""
    parts, start = [], 0
    for size in blocks:
        block = vector[start:start + size]
        parts.append(np.r_[block[1:], block[-1:]] if size else block)
        start += size
    return np.concatenate(parts)


def run_closed_loop(spec: OcpSpec, rom: ParametricROM, steps: int = 20, plant: str = 'reduced',
                    model: Optional[FullOrderModel] = None, plant_alpha: Optional[AbsorptionScale] = None,
                    warm_start: bool = True, seed_first: bool = True, x0: Optional[np.ndarray] = None) -> ClosedLoopResult:
    """
    Apply the first input of each condensed QP to the plant for `steps` samples.

    Args:
        spec: OcpSpec; spec.alpha parameterizes the prediction model
        rom: ParametricROM used for prediction
        steps: closed-loop length
        plant: 'reduced' or 'full'
        model: FullOrderModel, required for the full plant
        plant_alpha: true plant parameters (default spec.alpha)
        warm_start: shift the previous solution into the next solve
        seed_first: start the first solve from u = u_ref
        x0: initial plant state (default zero)

    Returns:
        ClosedLoopResult

    Raises:
        ValueError: on an unknown plant, a missing model or an unstable ROM
    """
    if plant not in PLANTS:
        raise ValueError(f"plant must be one of {PLANTS}, got '{plant}'")
    if plant == 'full' and model is None:
        raise ValueError("the full plant requires the FullOrderModel")
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    if not rom.stable:
        raise ValueError(f"{rom.variant} ROM of order {rom.d} is unstable; refusing to close the loop on it")
    if model is not None and not np.isclose(model.grid.dt, rom.delta):
        logger.warning(f"Plant period {model.grid.dt} differs from ROM period {rom.delta}")
    plant_alpha = plant_alpha or spec.alpha
    system = _FullPlant(model, rom, plant_alpha, x0) if plant == 'full' else _ReducedPlant(rom, plant_alpha, x0)

    condenser = Condenser.from_rom(spec, rom)
    N = spec.horizon
    logger.info(f"Closed loop: plant={plant}, N={N}, steps={steps}, u_ref={condenser.u_ref:.6g} W, "
                f"warm_start={warm_start}")

    solver: Optional[QpSolver] = None
    previous: Optional[QpSolution] = None
    applied = 0.0
    u = np.empty(steps)
    y_vol = np.empty(steps)
    y_peak = np.empty(steps)
    iterations = np.zeros(steps, dtype=int)
    timing = np.empty(steps)
    statuses, flagged = [], []
    for k in range(steps):
        y_vol[k], y_peak[k] = system.outputs()
        reduced_state = system.observe()

        started = time.perf_counter()
        qp = condenser.condense(reduced_state)
        if solver is None and not qp.infeasible:
            solver = QpSolver(qp, warm_start=warm_start)
        warm_u = warm_dual = None
        if warm_start and previous is not None and previous.usable:
            warm_u = _shift(previous.u, [N])
            warm_dual = _shift(previous.dual, [N, N - 1])
        elif seed_first and previous is None:
            warm_u = np.full(N, condenser.u_ref)
        solution = solve_qp(qp, warm_u, solver, warm_dual)
        timing[k] = time.perf_counter() - started

        iterations[k] = solution.iterations
        statuses.append(solution.status)
        if solution.usable:
            applied = float(np.clip(solution.u[0], 0.0, spec.u_max))
            previous = solution
        elif solution.status == 'infeasible':
            logger.warning(f"Step {k}: peak temperature above y_max, switching the laser off")
            applied = 0.0
            flagged.append(k)
        else:
            logger.warning(f"Step {k}: QP {solution.status}, holding previous input {applied:.6g} W")
            flagged.append(k)
        u[k] = applied
        system.step(applied)

    result = ClosedLoopResult(t=rom.delta * np.arange(steps), u=u, y_vol=y_vol, y_peak=y_peak,
                              qp_iters=iterations, solve_time=timing, status=statuses, flagged=flagged,
                              horizon=N, u_max=spec.u_max)
    logger.info(f"Closed loop finished: final y_peak={y_peak[-1]:.4f} K, "
                f"avg solve {result.summary()['avg_ms']:.3f} ms, {len(flagged)} flagged steps")
    return result


def horizon_sweep(spec: OcpSpec, rom: ParametricROM, horizons: Sequence[int], steps: int = 20,
                  threads: int = 1, **kwargs) -> Dict[int, ClosedLoopResult]:
    """Independent closed loops for several prediction horizons"""
    def run(horizon: int) -> ClosedLoopResult:
        return run_closed_loop(spec.model_copy(update={'horizon': horizon}), rom, steps, **kwargs)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return dict(zip(horizons, pool.map(run, horizons)))


def timing_summary(results: Dict[int, ClosedLoopResult]) -> pd.DataFrame:
    """Average and maximum condense+solve time (ms) per horizon"""
    rows = [{'N': horizon, 'avg_ms': r.summary()['avg_ms'], 'max_ms': r.summary()['max_ms'],
             'avg_iters': r.summary()['avg_iters']}
            for horizon, r in sorted(results.items())]
    return pd.DataFrame(rows, columns=['N', 'avg_ms', 'max_ms', 'avg_iters'])
