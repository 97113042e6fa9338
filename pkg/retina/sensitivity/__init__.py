"""
Sensitivity package.
Attenuation-profile norms, DC-gain derivatives and time-domain perturbation runs.
"""
from retina.sensitivity.g_norms import UNITS, g_partial_norm, scaled_g_sensitivities
from retina.sensitivity.transfer import (
    DcSensitivities,
    PerturbationResult,
    dc_sensitivities,
    perturbation_experiment,
)
from retina.sensitivity.report import SensitivityReport, reports_frame, sensitivity_report

__all__ = [
    'UNITS', 'g_partial_norm', 'scaled_g_sensitivities',
    'DcSensitivities', 'PerturbationResult', 'dc_sensitivities', 'perturbation_experiment',
    'SensitivityReport', 'reports_frame', 'sensitivity_report',
]
