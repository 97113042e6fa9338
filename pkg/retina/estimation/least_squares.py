"""
Least-squares identification of the absorption prefactors from volume-temperature data.

The residual is F_i = y_meas[i-1] - C_vol(alpha) x_{i-1}(alpha), i = 1..N, with x_0 = 0. Its
Jacobian comes from the forward sensitivity recursion
    s_{k+1} = (I - delta A_c)^{-1} (s_k + delta dB/dalpha_j u_k)
run alongside the state with the same factorization.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from retina.estimation.measurements import MeasurementSet
from retina.model import AbsorptionScale, FullOrderModel, assemble_input, assemble_output_vol
from retina.simulation import Stepper, make_stepper

# Set up global logger for parameter estimation
logger = logging.getLogger(__name__)

MODES = ('two-param', 'rpe-only')

_FREE_PARAMETERS = {
    'two-param': ('rpe', 'ch'),
    'rpe-only': ('rpe',),
}

_DERIVATIVES = {'rpe': 'd_rpe', 'ch': 'd_ch'}


class FitOptions(BaseModel):
    """Levenberg-Marquardt settings"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    max_iter: int = Field(100, ge=1)
    grad_tol: float = Field(1e-8, gt=0)
    step_tol: float = Field(1e-10, gt=0)
    lambda0: float = Field(1e-3, gt=0, description='initial damping relative to max diag(J^T J)')
    alpha_floor: float = Field(1e-6, gt=0, description='lower bound of every fitted prefactor')
    p_level: float = Field(0.95, gt=0, lt=1)
    scale_covariance: bool = Field(False, description='multiply Cov by ||F||^2/(N-q)')
    singular_cond: float = Field(1e14, gt=1)


def free_parameters(mode: str) -> Tuple[str, ...]:
    if mode not in _FREE_PARAMETERS:
        raise ValueError(f"mode must be one of {MODES}, got '{mode}'")
    return _FREE_PARAMETERS[mode]


@dataclass
class ConfidenceIntervals:
    level: float
    gamma: float
    half_widths: np.ndarray
    low: np.ndarray
    high: np.ndarray


@dataclass
class EstimationResult:
    """Outcome of one fit; cov and half_widths refer to the free parameters of `mode`"""
    alpha: AbsorptionScale
    mode: str
    resnorm: float
    iterations: int
    converged: bool
    cov: np.ndarray
    half_widths: np.ndarray
    p_level: float
    singular: bool = False
    message: str = ''
    history: list = field(default_factory=list)

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return free_parameters(self.mode)

    @property
    def estimate(self) -> np.ndarray:
        return np.array([getattr(self.alpha, name) for name in self.parameter_names])

    def to_dict(self) -> dict:
        names = self.parameter_names
        estimate = self.estimate
        return {
            'mode': self.mode,
            'alpha': {name: float(v) for name, v in zip(names, estimate)},
            'alpha_ch_fixed': self.alpha.ch if self.mode == 'rpe-only' else None,
            'cov': self.cov.tolist(),
            'p_level': self.p_level,
            'ci_low': {name: float(v) for name, v in zip(names, estimate - self.half_widths)},
            'ci_high': {name: float(v) for name, v in zip(names, estimate + self.half_widths)},
            'resnorm': self.resnorm,
            'iters': self.iterations,
            'converged': self.converged,
            'singular': self.singular,
            'message': self.message,
        }


def _compose(values: np.ndarray, names: Sequence[str], template: AbsorptionScale) -> AbsorptionScale:
    update = {name: float(v) for name, v in zip(names, values)}
    return AbsorptionScale(rpe=update.get('rpe', template.rpe), ch=update.get('ch', template.ch))


def _stepper_for(model: FullOrderModel, data: MeasurementSet, stepper: Optional[Stepper]) -> Stepper:
    if stepper is not None and stepper.model is model and np.isclose(stepper.delta, data.delta, rtol=1e-12):
        return stepper
    return make_stepper(model, data.delta)


def _forward(stepper: Stepper, alpha: AbsorptionScale, data: MeasurementSet, derivs: Sequence[str]):
    """State and sensitivity recursion; returns F and J (J has len(derivs) columns)"""
    model = stepper.model
    columns = [assemble_input(model, alpha)] + [assemble_input(model, alpha, d) for d in derivs]
    sources = stepper.delta * np.column_stack(columns)
    c_vol = assemble_output_vol(model, alpha)
    c_derivs = np.array([assemble_output_vol(model, alpha, d) for d in derivs]).reshape(len(derivs), model.n)

    states = np.zeros((model.n, 1 + len(derivs)))
    F = np.empty(data.N)
    J = np.empty((data.N, len(derivs)))
    for k in range(data.N):
        outputs = c_vol @ states
        F[k] = data.y_meas[k] - outputs[0]
        J[k] = -(c_derivs @ states[:, 0] + outputs[1:])
        if k < data.N - 1:
            states = stepper.advance(states, sources * data.u[k])
    return F, J


def residual_jacobian(model: FullOrderModel, alpha: AbsorptionScale, data: MeasurementSet,
                      mode: str = 'two-param', stepper: Optional[Stepper] = None):
    """
    Residual vector and analytic Jacobian.

    Args:
        model: FullOrderModel
        alpha: parameters; in rpe-only mode alpha.ch is the held choroid value
        data: MeasurementSet
        mode: 'two-param' or 'rpe-only'
        stepper: optional Stepper matching data.delta

    Returns:
        tuple: (F of length N, J of shape (N, q))
    """
    names = free_parameters(mode)
    stepper = _stepper_for(model, data, stepper)
    return _forward(stepper, alpha, data, [_DERIVATIVES[name] for name in names])


def covariance_from_jacobian(J: np.ndarray, singular_cond: float = 1e14) -> Tuple[np.ndarray, bool]:
    """
    Cov = (J^T J)^{-1}. A pseudo-inverse is returned and the flag set when the condition
    number of J^T J exceeds `singular_cond`.
    """
    normal = J.T @ J
    condition = np.linalg.cond(normal) if np.any(normal) else np.inf
    singular = not np.isfinite(condition) or condition > singular_cond
    cov = np.linalg.pinv(normal) if singular else np.linalg.inv(normal)
    return 0.5 * (cov + cov.T), bool(singular)


def chi2_quantile(p: float, dof: int) -> float:
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return float(stats.chi2.ppf(p, dof))


def half_widths_from_covariance(cov: np.ndarray, p: float) -> np.ndarray:
    """sqrt(gamma(p) Cov_ii) with gamma the chi-square quantile for q = dim(Cov)"""
    gamma = chi2_quantile(p, cov.shape[0])
    return np.sqrt(gamma * np.clip(np.diag(cov), 0.0, None))


def confidence_intervals(result: EstimationResult, p: float) -> ConfidenceIntervals:
    """
    Confidence intervals [alpha_i - sqrt(gamma Cov_ii), alpha_i + sqrt(gamma Cov_ii)].

    Args:
        result: EstimationResult carrying cov
        p: confidence level in (0, 1)

    Returns:
        ConfidenceIntervals: per free parameter, in the order of result.parameter_names
    """
    gamma = chi2_quantile(p, result.cov.shape[0])
    half = half_widths_from_covariance(result.cov, p)
    estimate = result.estimate
    return ConfidenceIntervals(level=p, gamma=gamma, half_widths=half, low=estimate - half, high=estimate + half)


def fit(model: FullOrderModel, data: MeasurementSet, alpha0: AbsorptionScale, mode: str = 'two-param',
        options: Optional[FitOptions] = None, alpha_ch_fixed: Optional[float] = None,
        stepper: Optional[Stepper] = None) -> EstimationResult:
    """
    Levenberg-Marquardt fit of alpha to the measured volume temperature.

    Args:
        model: FullOrderModel
        data: MeasurementSet
        alpha0: start value
        mode: 'two-param' or 'rpe-only'
        options: FitOptions
        alpha_ch_fixed: choroid value held in rpe-only mode (default alpha0.ch)
        stepper: optional Stepper matching data.delta

    Returns:
        EstimationResult: non-convergence is reported by the flag, not raised
    """
    options = options or FitOptions()
    names = free_parameters(mode)
    derivs = [_DERIVATIVES[name] for name in names]
    template = alpha0 if alpha_ch_fixed is None else AbsorptionScale(rpe=alpha0.rpe, ch=alpha_ch_fixed)
    if mode == 'rpe-only':
        logger.info(f"fit called in rpe-only mode, alpha_ch fixed at {template.ch:.6g}, N={data.N}")
    else:
        logger.info(f"fit called in two-param mode from alpha0={alpha0}, N={data.N}")

    stepper = _stepper_for(model, data, stepper)
    x = np.maximum(np.array([getattr(template, name) for name in names]), options.alpha_floor)
    F, J = _forward(stepper, _compose(x, names, template), data, derivs)
    cost = float(F @ F)

    damping = None
    growth = 2.0
    converged = False
    message = 'iteration limit reached'
    iterations = 0
    history = []
    for iterations in range(options.max_iter + 1):
        gradient = J.T @ F
        if np.max(np.abs(gradient)) <= options.grad_tol * max(1.0, np.sqrt(cost)):
            converged, message = True, 'gradient tolerance reached'
            break
        if iterations == options.max_iter:
            break

        normal = J.T @ J
        if damping is None:
            damping = options.lambda0 * max(float(np.max(np.diag(normal))), np.finfo(float).tiny)
        step = np.linalg.solve(normal + damping * np.eye(len(x)), -gradient)
        candidate = np.maximum(x + step, options.alpha_floor)
        step = candidate - x
        if np.linalg.norm(step) <= options.step_tol:
            converged, message = True, 'step tolerance reached'
            break

        F_trial, _ = _forward(stepper, _compose(candidate, names, template), data, [])
        cost_trial = float(F_trial @ F_trial)
        predicted = cost - float(np.sum((F + J @ step) ** 2))
        gain = (cost - cost_trial) / predicted if predicted > 0 else -1.0
        logger.debug(f"LM iteration {iterations + 1}: cost={cost:.6e}, trial={cost_trial:.6e}, "
                     f"gain={gain:.3f}, lambda={damping:.3e}")
        history.append({'iteration': iterations + 1, 'cost': cost, 'trial_cost': cost_trial,
                        'damping': damping, 'accepted': gain > 0})

        if gain > 0:
            x = candidate
            F, J = _forward(stepper, _compose(x, names, template), data, derivs)
            cost = float(F @ F)
            damping *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            growth = 2.0
        else:
            damping *= growth
            growth *= 2.0

    cov, singular = covariance_from_jacobian(J, options.singular_cond)
    if options.scale_covariance and data.N > len(x):
        cov = cov * cost / (data.N - len(x))
    if singular:
        logger.warning(f"J^T J is numerically singular at alpha={_compose(x, names, template)}")

    result = EstimationResult(
        alpha=_compose(x, names, template),
        mode=mode,
        resnorm=float(np.sqrt(cost)),
        iterations=iterations,
        converged=converged,
        cov=cov,
        half_widths=half_widths_from_covariance(cov, options.p_level),
        p_level=options.p_level,
        singular=singular,
        message=message,
        history=history,
    )
    if converged:
        logger.info(f"Fit converged after {iterations} iterations: alpha={result.alpha}, "
                    f"resnorm={result.resnorm:.4e}")
    else:
        logger.warning(f"Fit did not converge ({message}): alpha={result.alpha}")
    return result
