"""
Summary of all sensitivity quantities at one parameter point.
"""
import logging
from dataclasses import dataclass

import pandas as pd

from retina.model import REFERENCE_MEAN, REFERENCE_STD, AbsorptionScale, FullOrderModel
from retina.sensitivity.g_norms import g_partial_norm
from retina.sensitivity.transfer import DcSensitivities, dc_sensitivities

# Set up global logger for sensitivity reports
logger = logging.getLogger(__name__)


@dataclass
class SensitivityReport:
    alpha: AbsorptionScale
    sigma: AbsorptionScale
    power: float
    g_norm_micron: dict
    g_norm_si: dict
    g_scaled: dict
    dc: DcSensitivities
    dc_scaled: DcSensitivities
    dc_scaled_power: DcSensitivities

    def to_dict(self) -> dict:
        return {
            'alpha': {'rpe': self.alpha.rpe, 'ch': self.alpha.ch},
            'sigma': {'rpe': self.sigma.rpe, 'ch': self.sigma.ch},
            'power': self.power,
            'g_norm_micron': self.g_norm_micron,
            'g_norm_si': self.g_norm_si,
            'g_scaled': self.g_scaled,
            'dc': self.dc.as_dict(),
            'dc_scaled': self.dc_scaled.as_dict(),
            'dc_scaled_power': self.dc_scaled_power.as_dict(),
        }

    def to_row(self) -> dict:
        """Flat record for one CSV row per alpha"""
        row = {'alpha_rpe': self.alpha.rpe, 'alpha_ch': self.alpha.ch}
        for which in ('rpe', 'ch'):
            row[f'g_norm_{which}_micron'] = self.g_norm_micron[which]
            row[f'g_norm_{which}_si'] = self.g_norm_si[which]
            row[f'g_scaled_{which}'] = self.g_scaled[which]
        for prefix, values in (('dG', self.dc), ('dG_sigma', self.dc_scaled), ('dG_sigma_u', self.dc_scaled_power)):
            for key, value in values.as_dict().items():
                row[f'{prefix}_{key}'] = value
        return row


def sensitivity_report(model: FullOrderModel, alpha: AbsorptionScale = REFERENCE_MEAN,
                       sigma: AbsorptionScale = REFERENCE_STD, power: float = 0.03) -> SensitivityReport:
    """
    Attenuation norms and DC sensitivities at alpha.

    Args:
        model: FullOrderModel
        alpha: evaluation point
        sigma: per-parameter standard deviation used for scaling
        power: constant laser power (W) for the input-scaled row

    Returns:
        SensitivityReport
    """
    logger.info(f"Computing sensitivity report at alpha={alpha}")
    micron = {which: g_partial_norm(model.layers, alpha, which, 'micron') for which in ('rpe', 'ch')}
    si = {which: g_partial_norm(model.layers, alpha, which, 'si') for which in ('rpe', 'ch')}
    dc = dc_sensitivities(model, alpha)
    return SensitivityReport(
        alpha=alpha,
        sigma=sigma,
        power=power,
        g_norm_micron=micron,
        g_norm_si=si,
        g_scaled={'rpe': micron['rpe'] * sigma.rpe, 'ch': micron['ch'] * sigma.ch},
        dc=dc,
        dc_scaled=dc.scaled(sigma),
        dc_scaled_power=dc.scaled(sigma, power),
    )


def reports_frame(reports) -> pd.DataFrame:
    return pd.DataFrame([report.to_row() for report in reports])
