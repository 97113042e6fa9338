"""
Cohort statistics, synthetic cohorts and identification-horizon studies.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from retina.estimation.least_squares import FitOptions, fit, free_parameters
from retina.estimation.measurements import MeasurementSet, synth_measurements
from retina.model import REFERENCE_MEAN, REFERENCE_STD, AbsorptionScale, FullOrderModel
from retina.simulation import make_stepper

# Set up global logger for cohort studies
logger = logging.getLogger(__name__)


@dataclass
class CohortStats:
    names: tuple
    mean: np.ndarray
    std: np.ndarray
    cv: np.ndarray
    size: int

    def to_dict(self) -> Dict[str, dict]:
        return {
            name: {'mean': float(m), 'std': float(s), 'cv': float(c)}
            for name, m, s, c in zip(self.names, self.mean, self.std, self.cv)
        }


def cohort_stats(fits: Sequence[AbsorptionScale], parameters: Sequence[str] = ('rpe', 'ch')) -> CohortStats:
    """
    Empirical mean, (n-1)-normalized standard deviation and coefficient of variation.

    Args:
        fits: fitted prefactors, one per spot
        parameters: which components to summarize

    Returns:
        CohortStats
    """
    if len(fits) < 2:
        raise ValueError(f"cohort statistics need at least 2 fits, got {len(fits)}")
    values = np.array([[getattr(alpha, name) for name in parameters] for alpha in fits], dtype=float)
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        cv = np.where(mean != 0, std / np.where(mean != 0, mean, 1.0), np.nan)
    return CohortStats(names=tuple(parameters), mean=mean, std=std, cv=cv, size=len(fits))


def draw_alpha(rng: np.random.Generator, mean: AbsorptionScale = REFERENCE_MEAN,
               std: AbsorptionScale = REFERENCE_STD, floor: float = 1e-3) -> AbsorptionScale:
    """Gaussian draw per component, redrawn until every component exceeds `floor`"""
    while True:
        rpe, ch = rng.normal([mean.rpe, mean.ch], [std.rpe, std.ch])
        if rpe > floor and ch > floor:
            return AbsorptionScale(rpe=float(rpe), ch=float(ch))


def synth_cohort(model: FullOrderModel, size: int, u_seq, noise_std: float, seed: int = 0,
                 mode: str = 'two-param', alpha0: Optional[AbsorptionScale] = None,
                 options: Optional[FitOptions] = None, mean: AbsorptionScale = REFERENCE_MEAN,
                 std: AbsorptionScale = REFERENCE_STD, threads: int = 1) -> List[dict]:
    """
    Fit a synthetic cohort of spots.

    Every spot draws its true alpha and its noise from its own generator seeded by (seed, spot),
    so results do not depend on the thread count.

    Returns:
        list: one record per spot with 'success', 'alpha_true' and, on success, the fit result
    """
    if size < 1:
        raise ValueError(f"cohort size must be positive, got {size}")
    alpha0 = alpha0 or mean
    logger.info(f"Fitting synthetic cohort of {size} spots ({mode}, noise_std={noise_std}, threads={threads})")

    def fit_spot(spot: int) -> dict:
        rng = np.random.default_rng([seed, spot])
        alpha_true = draw_alpha(rng, mean, std)
        record = {'spot': spot, 'alpha_true': alpha_true}
        stepper = make_stepper(model)
        try:
            data = synth_measurements(model, alpha_true, u_seq, noise_std,
                                      seed=int(rng.integers(2 ** 31)), stepper=stepper)
            result = fit(model, data, alpha0, mode=mode, options=options, stepper=stepper)
            record.update({'success': True, 'result': result})
        except Exception as e:
            logger.exception(f"Fit of spot {spot} failed")
            record.update({'success': False, 'error': str(e)})
        return record

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        records = list(pool.map(fit_spot, range(size)))

    failures = sum(not r['success'] for r in records)
    if failures:
        logger.warning(f"{failures} of {size} cohort fits failed")
    return records


def horizon_study(model: FullOrderModel, data: MeasurementSet, horizons: Sequence[int],
                  alpha0: Optional[AbsorptionScale] = None, mode: str = 'two-param',
                  options: Optional[FitOptions] = None, alpha_ch_fixed: Optional[float] = None) -> List[dict]:
    """
    Relative deviation of prefix fits from the full-horizon fit.

    Args:
        model: FullOrderModel
        data: full MeasurementSet
        horizons: prefix lengths N
        alpha0: start value (default cohort mean)
        mode: 'two-param' or 'rpe-only'
        options: FitOptions
        alpha_ch_fixed: held choroid value in rpe-only mode

    Returns:
        list: per horizon {'horizon', 'success', 'relative_error': {name: value}, 'converged'}
        or {'horizon', 'success': False, 'error'}
    """
    alpha0 = alpha0 or REFERENCE_MEAN
    names = free_parameters(mode)
    stepper = make_stepper(model, data.delta)
    try:
        reference = fit(model, data, alpha0, mode=mode, options=options,
                        alpha_ch_fixed=alpha_ch_fixed, stepper=stepper)
    except Exception as e:
        logger.exception("Full-horizon reference fit failed; no horizon can be compared")
        return [{'horizon': int(h), 'success': False, 'error': str(e)} for h in horizons]
    logger.info(f"Horizon study over {list(horizons)} against full-horizon fit {reference.alpha}")

    rows = []
    for horizon in horizons:
        try:
            if horizon == data.N:
                result = reference
            else:
                result = fit(model, data.truncated(horizon), alpha0, mode=mode, options=options,
                             alpha_ch_fixed=alpha_ch_fixed, stepper=stepper)
            errors = np.abs(result.estimate - reference.estimate) / np.abs(reference.estimate)
            rows.append({
                'horizon': int(horizon),
                'success': True,
                'relative_error': {name: float(e) for name, e in zip(names, errors)},
                'converged': result.converged,
            })
        except Exception as e:
            logger.exception(f"Fit at horizon {horizon} failed")
            rows.append({'horizon': int(horizon), 'success': False, 'error': str(e)})
    return rows
