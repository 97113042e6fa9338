"""
Tests for measurement records, the Levenberg-Marquardt fit, confidence intervals and cohort studies.
"""
import numpy as np
import pytest

from retina.estimation import (
    EstimationResult,
    FitOptions,
    MeasurementSet,
    chi2_quantile,
    cohort_stats,
    confidence_intervals,
    covariance_from_jacobian,
    draw_alpha,
    fit,
    free_parameters,
    half_widths_from_covariance,
    horizon_study,
    residual_jacobian,
    synth_cohort,
    synth_measurements,
)
from retina.model import REFERENCE_MEAN, REFERENCE_STD, AbsorptionScale
from retina.simulation import constant_input, make_stepper, piecewise_constant_input, simulate

EXCITATION = piecewise_constant_input([0.03, 0.045, 0.02], [100, 100, 100])


@pytest.fixture(scope='module')
def clean_data(tiny_model):
    return synth_measurements(tiny_model, REFERENCE_MEAN, EXCITATION, noise_std=0.0)


class TestMeasurements:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            MeasurementSet(u=np.zeros(5), y_meas=np.zeros(4), delta=1e-3)

    def test_truncated(self, clean_data):
        prefix = clean_data.truncated(50)
        assert prefix.N == 50
        np.testing.assert_array_equal(prefix.y_meas, clean_data.y_meas[:50])
        with pytest.raises(ValueError):
            clean_data.truncated(1)

    def test_csv_period_inferred_from_time_column(self, clean_data, tmp_path):
        path = tmp_path / 'measurements.csv'
        clean_data.to_csv(path)
        loaded = MeasurementSet.from_csv(path)
        assert loaded.delta == pytest.approx(1e-3, rel=1e-9)
        assert loaded.N == clean_data.N

    def test_csv_non_uniform_time_rejected(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text('t,u,y_meas\n0,0.03,0\n0.001,0.03,1\n0.003,0.03,2\n')
        with pytest.raises(ValueError, match='uniform'):
            MeasurementSet.from_csv(path)

    def test_synthetic_noise_is_seeded(self, tiny_model):
        first = synth_measurements(tiny_model, REFERENCE_MEAN, EXCITATION, 0.01, seed=4)
        second = synth_measurements(tiny_model, REFERENCE_MEAN, EXCITATION, 0.01, seed=4)
        np.testing.assert_array_equal(first.y_meas, second.y_meas)


class TestLeastSquares:
    def test_free_parameters(self):
        assert free_parameters('two-param') == ('rpe', 'ch')
        assert free_parameters('rpe-only') == ('rpe',)
        with pytest.raises(ValueError):
            free_parameters('choroid-only')

    def test_jacobian_matches_finite_differences(self, tiny_model, clean_data):
        alpha = AbsorptionScale(rpe=0.9, ch=0.12)
        F, J = residual_jacobian(tiny_model, alpha, clean_data)
        assert F.shape == (clean_data.N,) and J.shape == (clean_data.N, 2)
        h = 1e-6
        for column, name in enumerate(('rpe', 'ch')):
            plus, _ = residual_jacobian(tiny_model, alpha.shifted(**{f'd_{name}': h}), clean_data)
            minus, _ = residual_jacobian(tiny_model, alpha.shifted(**{f'd_{name}': -h}), clean_data)
            numeric = (plus - minus) / (2 * h)
            assert np.linalg.norm(J[:, column] - numeric) <= 1e-5 * np.linalg.norm(numeric)

    def test_noiseless_two_parameter_recovery(self, tiny_model, clean_data):
        result = fit(tiny_model, clean_data, AbsorptionScale(rpe=1.0, ch=1.0))
        assert result.converged
        assert result.alpha.rpe == pytest.approx(REFERENCE_MEAN.rpe, rel=1e-4)
        assert result.alpha.ch == pytest.approx(REFERENCE_MEAN.ch, rel=1e-4)
        assert result.resnorm < 1e-6
        assert result.cov.shape == (2, 2)

    def test_rpe_only_holds_choroid_fixed(self, tiny_model, clean_data):
        result = fit(tiny_model, clean_data, AbsorptionScale(rpe=1.0, ch=1.0), mode='rpe-only',
                     alpha_ch_fixed=REFERENCE_MEAN.ch)
        assert result.alpha.ch == REFERENCE_MEAN.ch
        assert result.alpha.rpe == pytest.approx(REFERENCE_MEAN.rpe, rel=1e-4)
        assert result.cov.shape == (1, 1)
        report = result.to_dict()
        assert set(report['alpha']) == {'rpe'}
        assert report['alpha_ch_fixed'] == REFERENCE_MEAN.ch

    def test_iteration_limit_reported_not_raised(self, tiny_model, clean_data):
        result = fit(tiny_model, clean_data, AbsorptionScale(rpe=1.0, ch=1.0), options=FitOptions(max_iter=1))
        assert not result.converged
        assert result.iterations == 1
        assert result.message == 'iteration limit reached'

    def test_result_dict_keys(self, tiny_model, clean_data):
        report = fit(tiny_model, clean_data, REFERENCE_MEAN).to_dict()
        assert {'alpha', 'cov', 'ci_low', 'ci_high', 'resnorm', 'iters', 'converged', 'mode'} <= set(report)
        assert report['ci_low']['rpe'] <= report['alpha']['rpe'] <= report['ci_high']['rpe']

    def test_rpe_only_on_two_parameter_data(self, tiny_model):
        # true choroid one standard deviation away from the held value
        alpha_true = REFERENCE_MEAN.shifted(d_ch=REFERENCE_STD.ch)
        u = constant_input(0.03, 720)
        data = synth_measurements(tiny_model, alpha_true, u, noise_std=0.0)
        result = fit(tiny_model, data, REFERENCE_MEAN, mode='rpe-only', alpha_ch_fixed=REFERENCE_MEAN.ch)
        fitted = simulate(make_stepper(tiny_model), result.alpha, u)
        assert np.max(np.abs(fitted.y_vol - data.y_meas)) <= 1.0


class TestConfidenceIntervals:
    def test_chi2_quantile(self):
        assert chi2_quantile(0.95, 2) == pytest.approx(5.991, rel=1e-3)
        with pytest.raises(ValueError):
            chi2_quantile(1.0, 2)

    def test_identity_covariance_half_widths(self):
        np.testing.assert_allclose(half_widths_from_covariance(np.eye(2), 0.95), [2.4477, 2.4477], rtol=1e-4)

    def test_singular_jacobian_flagged(self):
        J = np.column_stack([np.arange(1.0, 6.0), 2 * np.arange(1.0, 6.0)])
        cov, singular = covariance_from_jacobian(J)
        assert singular
        assert np.all(np.isfinite(cov))

    def test_half_widths_halve_when_input_doubles(self, tiny_model):
        u = constant_input(0.03, 200)
        single = MeasurementSet(u=u, y_meas=np.zeros(200), delta=1e-3)
        double = MeasurementSet(u=2 * u, y_meas=np.zeros(200), delta=1e-3)
        _, J1 = residual_jacobian(tiny_model, REFERENCE_MEAN, single)
        _, J2 = residual_jacobian(tiny_model, REFERENCE_MEAN, double)
        w1 = half_widths_from_covariance(covariance_from_jacobian(J1)[0], 0.95)
        w2 = half_widths_from_covariance(covariance_from_jacobian(J2)[0], 0.95)
        np.testing.assert_allclose(w2, 0.5 * w1, rtol=1e-9)

    def test_confidence_intervals_at_other_level(self):
        result = EstimationResult(alpha=REFERENCE_MEAN, mode='two-param', resnorm=0.0, iterations=0,
                                  converged=True, cov=np.diag([1e-4, 4e-6]), half_widths=np.zeros(2),
                                  p_level=0.95)
        intervals = confidence_intervals(result, 0.99)
        gamma = chi2_quantile(0.99, 2)
        np.testing.assert_allclose(intervals.half_widths, np.sqrt(gamma * np.array([1e-4, 4e-6])))
        np.testing.assert_allclose(intervals.low, result.estimate - intervals.half_widths)


class TestCohort:
    def test_two_spot_statistics(self):
        fits = [AbsorptionScale(rpe=0.5, ch=0.1), AbsorptionScale(rpe=1.0, ch=0.1)]
        stats = cohort_stats(fits, ('rpe',))
        assert stats.mean[0] == pytest.approx(0.75)
        assert stats.std[0] == pytest.approx(0.35355, rel=1e-4)
        assert stats.cv[0] == pytest.approx(0.4714, rel=1e-4)
        assert stats.to_dict()['rpe']['mean'] == pytest.approx(0.75)

    def test_single_fit_rejected(self):
        with pytest.raises(ValueError):
            cohort_stats([REFERENCE_MEAN])

    def test_draws_are_positive(self):
        rng = np.random.default_rng(1)
        draws = [draw_alpha(rng, std=AbsorptionScale(rpe=1.0, ch=0.2)) for _ in range(200)]
        assert all(a.rpe > 1e-3 and a.ch > 1e-3 for a in draws)

    def test_cohort_independent_of_thread_count(self, tiny_model):
        u = constant_input(0.03, 100)
        serial = synth_cohort(tiny_model, 3, u, 0.01, seed=7, threads=1)
        pooled = synth_cohort(tiny_model, 3, u, 0.01, seed=7, threads=3)
        assert all(record['success'] for record in serial + pooled)
        for a, b in zip(serial, pooled):
            assert a['alpha_true'] == b['alpha_true']
            assert a['result'].alpha.rpe == pytest.approx(b['result'].alpha.rpe, rel=1e-12)

    def test_horizon_study_against_full_horizon(self, tiny_model, clean_data):
        rows = horizon_study(tiny_model, clean_data, [150, clean_data.N])
        assert [row['horizon'] for row in rows] == [150, clean_data.N]
        assert all(row['success'] for row in rows)
        assert rows[1]['relative_error'] == {'rpe': 0.0, 'ch': 0.0}
        assert rows[0]['relative_error']['rpe'] < 1e-3

    def test_horizon_study_reference_failure(self, monkeypatch, tiny_model, clean_data):
        def broken_fit(*args, **kwargs):
            raise RuntimeError("simulation produced non-finite outputs")

        monkeypatch.setattr('retina.estimation.cohort.fit', broken_fit)
        rows = horizon_study(tiny_model, clean_data, [150, clean_data.N])
        assert [row['horizon'] for row in rows] == [150, clean_data.N]
        assert all(row['success'] is False for row in rows)
        assert all('non-finite' in row['error'] for row in rows)


@pytest.mark.slow
def test_true_parameters_inside_confidence_region(tiny_model):
    clean = synth_measurements(tiny_model, REFERENCE_MEAN, EXCITATION, noise_std=0.0)
    noise_std = 0.01 * float(np.mean(np.abs(clean.y_meas)))
    stepper = make_stepper(tiny_model)
    options = FitOptions(scale_covariance=True)
    covered = 0
    for seed in range(100):
        data = synth_measurements(tiny_model, REFERENCE_MEAN, EXCITATION, noise_std, seed=seed, stepper=stepper)
        result = fit(tiny_model, data, AbsorptionScale(rpe=1.0, ch=1.0), options=options, stepper=stepper)
        inside = np.abs(result.estimate - REFERENCE_MEAN.as_array()) <= result.half_widths
        covered += bool(np.all(inside))
    assert covered >= 80
