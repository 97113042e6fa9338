"""
Estimation package.
Least-squares identification of the absorption prefactors, confidence intervals and cohort studies.
"""
from retina.estimation.measurements import MeasurementSet, synth_measurements
from retina.estimation.least_squares import (
    MODES,
    ConfidenceIntervals,
    EstimationResult,
    FitOptions,
    chi2_quantile,
    confidence_intervals,
    covariance_from_jacobian,
    fit,
    free_parameters,
    half_widths_from_covariance,
    residual_jacobian,
)
from retina.estimation.cohort import CohortStats, cohort_stats, draw_alpha, horizon_study, synth_cohort

__all__ = [
    'MeasurementSet', 'synth_measurements',
    'MODES', 'ConfidenceIntervals', 'EstimationResult', 'FitOptions', 'chi2_quantile',
    'confidence_intervals', 'covariance_from_jacobian', 'fit', 'free_parameters',
    'half_widths_from_covariance', 'residual_jacobian',
    'CohortStats', 'cohort_stats', 'draw_alpha', 'horizon_study', 'synth_cohort',
]
