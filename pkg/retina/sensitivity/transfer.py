"""
Input-output sensitivities: derivatives of the DC gains and time-domain perturbation runs.

With G = -C A_c^{-1} B the product rule gives
    dG_vol = -(dC_vol A_c^{-1} B + C_vol A_c^{-1} dB),   dG_peak = -C_peak A_c^{-1} dB.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from retina.model import (
    AbsorptionScale,
    FullOrderModel,
    assemble_input,
    assemble_output_peak,
    assemble_output_vol,
)
from retina.simulation import Stepper, make_stepper, simulate, steady_state_control

# Set up global logger for input-output sensitivities
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DcSensitivities:
    """Partial derivatives of the DC gains in K/W per unit alpha"""
    vol_rpe: float
    vol_ch: float
    peak_rpe: float
    peak_ch: float

    def scaled(self, sigma: AbsorptionScale, u: float = 1.0) -> 'DcSensitivities':
        """Each derivative multiplied by its parameter's sigma and by the input power u"""
        return DcSensitivities(
            vol_rpe=self.vol_rpe * sigma.rpe * u,
            vol_ch=self.vol_ch * sigma.ch * u,
            peak_rpe=self.peak_rpe * sigma.rpe * u,
            peak_ch=self.peak_ch * sigma.ch * u,
        )

    def as_dict(self) -> dict:
        return {'vol_rpe': self.vol_rpe, 'vol_ch': self.vol_ch, 'peak_rpe': self.peak_rpe, 'peak_ch': self.peak_ch}


def dc_sensitivities(model: FullOrderModel, alpha: AbsorptionScale) -> DcSensitivities:
    """
    Product-rule derivatives of (G_vol, G_peak) with respect to (alpha_RPE, alpha_ch).

    Args:
        model: FullOrderModel
        alpha: evaluation point

    Returns:
        DcSensitivities: same sign convention as dc_gain
    """
    rhs = np.column_stack([
        assemble_input(model, alpha),
        assemble_input(model, alpha, 'd_rpe'),
        assemble_input(model, alpha, 'd_ch'),
    ])
    solved = model.steady_lu.solve(rhs)
    if not np.all(np.isfinite(solved)):
        raise RuntimeError(f"steady-state solve failed at alpha={alpha}")

    c_vol = assemble_output_vol(model, alpha)
    c_peak = assemble_output_peak(model)
    x, x_rpe, x_ch = solved.T
    result = DcSensitivities(
        vol_rpe=-float(assemble_output_vol(model, alpha, 'd_rpe') @ x + c_vol @ x_rpe),
        vol_ch=-float(assemble_output_vol(model, alpha, 'd_ch') @ x + c_vol @ x_ch),
        peak_rpe=-float(c_peak @ x_rpe),
        peak_ch=-float(c_peak @ x_ch),
    )
    logger.debug(f"dc_sensitivities at alpha={alpha}: {result.as_dict()}")
    return result


@dataclass
class PerturbationResult:
    t: np.ndarray
    err_vol: np.ndarray
    err_peak: np.ndarray

    @property
    def asymptotic(self) -> tuple:
        """Errors at the last sample: (vol, peak)"""
        return float(self.err_vol[-1]), float(self.err_peak[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t': self.t, 'err_vol': self.err_vol, 'err_peak': self.err_peak})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.12g')


def perturbation_experiment(model: FullOrderModel, alpha_bar: AbsorptionScale,
                            d_alpha: Union[AbsorptionScale, Sequence[float]],
                            horizon: int, u_policy: Optional[Union[float, np.ndarray]] = None,
                            stepper: Optional[Stepper] = None) -> PerturbationResult:
    """
    Absolute output deviation caused by shifting alpha_bar by d_alpha.

    Args:
        model: FullOrderModel
        alpha_bar: nominal parameters
        d_alpha: offset (d_rpe, d_ch); components may be zero or negative as long as
            alpha_bar + d_alpha stays admissible
        horizon: number of samples
        u_policy: constant power or power sequence (default: steady control at alpha_bar)
        stepper: optional Stepper

    Returns:
        PerturbationResult: |y(alpha_bar + d_alpha) - y(alpha_bar)| per sample

    Raises:
        ValueError: if alpha_bar + d_alpha has a negative component
    """
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if u_policy is None:
        u_policy = steady_state_control(model, alpha_bar)
    u = np.full(horizon, float(u_policy)) if np.ndim(u_policy) == 0 else np.asarray(u_policy, dtype=float)
    if len(u) != horizon:
        raise ValueError(f"input sequence has {len(u)} samples, expected {horizon}")

    offset = d_alpha.as_array() if isinstance(d_alpha, AbsorptionScale) else np.asarray(d_alpha, dtype=float)
    if offset.shape != (2,):
        raise ValueError(f"d_alpha must hold (d_rpe, d_ch), got shape {offset.shape}")
    perturbed = alpha_bar.shifted(d_rpe=float(offset[0]), d_ch=float(offset[1]))
    stepper = stepper or make_stepper(model)
    nominal_run = simulate(stepper, alpha_bar, u)
    perturbed_run = simulate(stepper, perturbed, u)
    result = PerturbationResult(
        t=nominal_run.t,
        err_vol=np.abs(perturbed_run.y_vol - nominal_run.y_vol),
        err_peak=np.abs(perturbed_run.y_peak - nominal_run.y_peak),
    )
    logger.info(f"Perturbation {offset.tolist()} at {alpha_bar}: final errors vol={result.asymptotic[0]:.4g} K, "
                f"peak={result.asymptotic[1]:.4g} K")
    return result
