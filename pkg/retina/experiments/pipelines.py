"""
One pipeline per CLI subcommand. Each pipeline writes its outputs below the run directory and
returns a one-line summary.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd

from retina.control import OcpSpec, horizon_sweep, timing_summary
from retina.estimation import (
    FitOptions,
    MeasurementSet,
    cohort_stats,
    fit,
    horizon_study,
    synth_cohort,
    synth_measurements,
)
from retina.experiments.settings import ExperimentConfig
from retina.model import REFERENCE_MEAN, REFERENCE_STD, AbsorptionScale, FullOrderModel, build_model
from retina.reduction import (
    IrkaOptions,
    ParametricROM,
    build_deim_gb_rom,
    build_taylor_rom,
    compare_mor,
    save_rom,
    snapshot_params,
)
from retina.sensitivity import perturbation_experiment, sensitivity_report
from retina.simulation import constant_input, dc_gain, make_stepper, piecewise_constant_input, simulate

# Set up global logger for experiment pipelines
logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = '%.12g'


@dataclass
class RunContext:
    """Resolved configuration plus command-line overrides"""
    config: ExperimentConfig
    out_dir: Path
    threads: int = 1
    seed: Optional[int] = None
    emit_plot_data: bool = False
    mode: Optional[str] = None
    alpha_ch_fixed: Optional[float] = None
    p_level: Optional[float] = None
    data: Optional[Path] = None

    @property
    def estimation_seed(self) -> int:
        return self.config.estimation.seed if self.seed is None else self.seed

    @property
    def estimation_mode(self) -> str:
        return self.mode or self.config.estimation.mode

    def path(self, name: str) -> Path:
        return self.out_dir / name


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n')


def _write_csv(path: Path, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def _model(ctx: RunContext) -> FullOrderModel:
    return build_model(ctx.config.layer_stack, ctx.config.grid)


def excitation_signal(ctx: RunContext) -> np.ndarray:
    settings = ctx.config.excitation
    if settings.kind == 'piecewise':
        return piecewise_constant_input(settings.levels, settings.durations)
    return constant_input(settings.power, settings.steps)


def _fit_options(ctx: RunContext) -> FitOptions:
    settings = ctx.config.estimation
    return FitOptions(max_iter=settings.max_iter, p_level=ctx.p_level or settings.p_level)


def _irka_options(ctx: RunContext) -> IrkaOptions:
    return IrkaOptions(max_iter=ctx.config.mor.irka_max_iter, tol=ctx.config.mor.irka_tol)


def run_model_info(ctx: RunContext) -> str:
    model = _model(ctx)
    g_vol, g_peak = dc_gain(model, REFERENCE_MEAN)
    info = model.summary()
    info.update({'dc_gain_vol': g_vol, 'dc_gain_peak': g_peak, 'alpha': REFERENCE_MEAN.model_dump()})
    _write_json(ctx.path('model_info.json'), info)
    return f"model-info: n={model.n}, G_vol={g_vol:.6g} K/W, G_peak={g_peak:.6g} K/W"


def run_simulate(ctx: RunContext) -> str:
    model = _model(ctx)
    alpha = ctx.config.estimation.alpha_true
    trajectory = simulate(make_stepper(model), alpha, excitation_signal(ctx))
    trajectory.to_csv(ctx.path('trajectory.csv'))
    return f"simulate: {len(trajectory)} steps at alpha={alpha}, final y_peak={trajectory.y_peak[-1]:.4f} K"


def _synthetic_data(ctx: RunContext, model: FullOrderModel) -> MeasurementSet:
    settings = ctx.config.estimation
    return synth_measurements(model, settings.alpha_true, excitation_signal(ctx), settings.noise_std,
                              seed=ctx.estimation_seed)


def run_synth_data(ctx: RunContext) -> str:
    data = _synthetic_data(ctx, _model(ctx))
    data.to_csv(ctx.path('measurements.csv'))
    return f"synth-data: {data.N} samples, noise_std={ctx.config.estimation.noise_std} K"


def run_estimate(ctx: RunContext) -> str:
    model = _model(ctx)
    settings = ctx.config.estimation
    data = MeasurementSet.from_csv(ctx.data) if ctx.data else _synthetic_data(ctx, model)
    alpha_ch_fixed = ctx.alpha_ch_fixed if ctx.alpha_ch_fixed is not None else settings.alpha_ch_fixed
    if ctx.estimation_mode == 'rpe-only' and alpha_ch_fixed is None:
        alpha_ch_fixed = REFERENCE_MEAN.ch
    options = _fit_options(ctx)

    result = fit(model, data, settings.alpha0, mode=ctx.estimation_mode, options=options,
                 alpha_ch_fixed=alpha_ch_fixed)
    _write_json(ctx.path('estimate.json'), result.to_dict())
    if settings.horizons:
        rows = horizon_study(model, data, settings.horizons, settings.alpha0, ctx.estimation_mode,
                             options, alpha_ch_fixed)
        frame = pd.DataFrame([{'horizon': r['horizon'], 'success': r['success'],
                               **{f'rel_err_{k}': v for k, v in r.get('relative_error', {}).items()}}
                              for r in rows])
        _write_csv(ctx.path('horizon_study.csv'), frame)
    if ctx.emit_plot_data:
        fitted = simulate(make_stepper(model, data.delta), result.alpha, data.u)
        frame = data.to_frame()
        frame['y_fit'] = fitted.y_vol
        _write_csv(ctx.path('fit_trajectory.csv'), frame)
    return (f"estimate ({ctx.estimation_mode}): alpha={result.alpha}, resnorm={result.resnorm:.4e}, "
            f"converged={result.converged}")


def run_cohort(ctx: RunContext) -> str:
    model = _model(ctx)
    settings = ctx.config.estimation
    records = synth_cohort(model, settings.cohort_size, excitation_signal(ctx), settings.noise_std,
                           seed=ctx.estimation_seed, mode=ctx.estimation_mode, options=_fit_options(ctx),
                           threads=ctx.threads)
    rows, fits = [], []
    for record in records:
        row = {'spot': record['spot'], 'alpha_true_rpe': record['alpha_true'].rpe,
               'alpha_true_ch': record['alpha_true'].ch, 'success': record['success']}
        if record['success']:
            result = record['result']
            fits.append(result.alpha)
            row.update({'alpha_rpe': result.alpha.rpe, 'alpha_ch': result.alpha.ch,
                        'converged': result.converged, 'resnorm': result.resnorm})
        rows.append(row)
    _write_csv(ctx.path('cohort.csv'), pd.DataFrame(rows))
    stats = cohort_stats(fits, ('rpe', 'ch') if ctx.estimation_mode == 'two-param' else ('rpe',))
    _write_json(ctx.path('cohort_stats.json'), stats.to_dict())
    return f"cohort: {len(fits)}/{len(records)} fits, mean={stats.mean.round(6).tolist()}"


def run_sensitivity(ctx: RunContext) -> str:
    model = _model(ctx)
    settings = ctx.config.sensitivity
    report = sensitivity_report(model, REFERENCE_MEAN, REFERENCE_STD, settings.power)
    _write_json(ctx.path('sensitivity.json'), report.to_dict())
    _write_csv(ctx.path('sensitivity.csv'), pd.DataFrame([report.to_row()]))
    if ctx.emit_plot_data:
        stepper = make_stepper(model)
        for name, shift in (('rpe', (REFERENCE_STD.rpe, 0.0)),
                            ('ch', (0.0, REFERENCE_STD.ch))):
            perturbation_experiment(model, REFERENCE_MEAN, shift, settings.perturbation_steps,
                                    stepper=stepper).to_csv(ctx.path(f'perturbation_{name}.csv'))
    return (f"sensitivity: |dg/da_rpe|={report.g_norm_micron['rpe']:.4f}, "
            f"|dg/da_ch|={report.g_norm_micron['ch']:.4f} (micron units)")


def build_rom(ctx: RunContext, model: FullOrderModel) -> ParametricROM:
    """ROM selected by the [mor] section"""
    settings = ctx.config.mor
    domain = ctx.config.alpha_domain
    if settings.method == 'taylor':
        alpha0 = REFERENCE_MEAN if settings.study == 'two-param' else AbsorptionScale(rpe=REFERENCE_MEAN.rpe,
                                                                                      ch=settings.alpha_ch)
        return build_taylor_rom(model, alpha0, settings.k, settings.d, mode=settings.study, domain=domain,
                                options=_irka_options(ctx))
    params = snapshot_params(domain, settings.study, settings.n_snapshots, settings.alpha_ch)
    return build_deim_gb_rom(model, params, settings.d, settings.k, domain=domain,
                             options=_irka_options(ctx), threads=ctx.threads)


def run_reduce(ctx: RunContext) -> str:
    model = _model(ctx)
    rom = build_rom(ctx, model)
    save_rom(rom, ctx.path('rom'))
    if ctx.emit_plot_data and rom.variant == 'deim_gb':
        frame = pd.DataFrame({
            'index': np.arange(1, len(rom.metadata['input_singular_values']) + 1),
            'sigma_B': rom.metadata['input_singular_values'],
            'sigma_C': rom.metadata['output_singular_values'][:len(rom.metadata['input_singular_values'])],
        })
        _write_csv(ctx.path('singular_values.csv'), frame)
    return f"reduce: {rom.variant} ROM with d={rom.d}, stable={rom.stable}"


def run_compare_mor(ctx: RunContext) -> str:
    model = _model(ctx)
    settings = ctx.config.mor
    comparison = compare_mor(
        model, ctx.config.alpha_domain, dims=settings.dims, deim_orders=settings.deim_orders,
        taylor_orders=settings.taylor_orders, studies=settings.studies, n_snapshots=settings.n_snapshots,
        scan_n=settings.scan_n, horizon=settings.scan_horizon, alpha_ch=settings.alpha_ch,
        options=_irka_options(ctx), threads=ctx.threads,
    )
    comparison.error_frame('err_inf').to_csv(ctx.path('err_inf.csv'), index=False)
    comparison.error_frame('err_l2').to_csv(ctx.path('err_l2.csv'), index=False)
    _write_csv(ctx.path('singular_values.csv'), comparison.singular_values_frame())
    failed = sum(cell is None or cell.failed for table in comparison.tables for cell in table.cells.values())
    cells = sum(len(table.cells) for table in comparison.tables)
    return f"compare-mor: {cells} cells, {failed} marked failed"


def run_mpc(ctx: RunContext) -> str:
    model = _model(ctx)
    settings = ctx.config.mpc
    rom = build_rom(ctx, model)
    alpha = ctx.config.estimation.alpha_true
    if ctx.config.mor.study == 'rpe-only':
        alpha = AbsorptionScale(rpe=alpha.rpe, ch=ctx.config.mor.alpha_ch)
    spec = OcpSpec(horizon=settings.horizon, y_ref=settings.y_ref, y_max=settings.y_max, u_max=settings.u_max,
                   rho=settings.rho, u_ref=settings.u_ref, alpha=alpha)

    options = {'plant': settings.plant, 'model': model, 'seed_first': settings.seed_first}
    results = horizon_sweep(spec, rom, settings.horizons, settings.steps, warm_start=settings.warm_start, **options)
    timing = timing_summary(results)
    if settings.compare_cold:
        cold = horizon_sweep(spec, rom, settings.horizons, settings.steps, warm_start=False, **options)
        timing['cold_avg_iters'] = [cold[n].summary()['avg_iters'] for n in timing['N']]
    _write_csv(ctx.path('timing.csv'), timing)
    if ctx.emit_plot_data:
        for horizon, result in results.items():
            result.to_csv(ctx.path(f'closed_loop_N{horizon}.csv'))
    worst = max(result.summary()['max_y_peak'] for result in results.values())
    return f"mpc: horizons {list(results)}, max y_peak={worst:.4f} K, avg ms={timing['avg_ms'].round(4).tolist()}"


PIPELINES: Dict[str, Callable[[RunContext], str]] = {
    'model-info': run_model_info,
    'simulate': run_simulate,
    'synth-data': run_synth_data,
    'estimate': run_estimate,
    'cohort': run_cohort,
    'sensitivity': run_sensitivity,
    'reduce': run_reduce,
    'compare-mor': run_compare_mor,
    'mpc': run_mpc,
}
