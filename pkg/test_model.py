"""
Tests for the heat model: geometry settings, attenuation profile, finite-difference operator and
the parameter-dependent input/output operators.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from retina.model import (
    REFERENCE_MEAN,
    AbsorptionScale,
    GridConfig,
    LayerStack,
    OperatorSampler,
    ParameterDomain,
    absorption_profile,
    assemble_input,
    assemble_output_peak,
    assemble_output_vol,
    assemble_outputs,
    build_model,
    g_profile,
    input_coefficient,
)
from retina.model.absorption import RPE


def dense_stencil(model):
    """Independent node-by-node assembly of A_c"""
    r, z = model.r, model.z
    kappa = model.layers.material.diffusivity
    h = r[1] - r[0]
    n_rad = len(r) - 1
    A = np.zeros((model.n, model.n))
    for j in range(1, len(z) - 1):
        h_minus, h_plus = z[j] - z[j - 1], z[j + 1] - z[j]
        for i in range(n_rad):
            k = (j - 1) * n_rad + i
            if i == 0:
                A[k, k] += -4.0 / h ** 2
                A[k, k + 1] += 4.0 / h ** 2
            else:
                A[k, k] += -2.0 / h ** 2
                A[k, k - 1] += 1.0 / h ** 2 - 1.0 / (2.0 * r[i] * h)
                if i + 1 < n_rad:
                    A[k, k + 1] += 1.0 / h ** 2 + 1.0 / (2.0 * r[i] * h)
            A[k, k] += -2.0 / (h_minus * h_plus)
            if j > 1:
                A[k, k - n_rad] += 2.0 / (h_minus * (h_minus + h_plus))
            if j < len(z) - 2:
                A[k, k + n_rad] += 2.0 / (h_plus * (h_minus + h_plus))
    return kappa * A


class TestSettings:
    def test_default_layer_stack(self):
        layers = LayerStack()
        assert layers.total_thickness == pytest.approx(739e-6)
        assert layers.rpe_center == pytest.approx(193e-6)
        assert layers.choroid_top == pytest.approx(200e-6)
        names = [name for name, _, _ in layers.interfaces()]
        assert names == ['retina', 'rpe', 'unpigmented', 'choroid', 'sclera']

    def test_odd_rpe_intervals_rejected(self):
        with pytest.raises(ValidationError):
            GridConfig(rpe_intervals=3)

    def test_beam_wider_than_cylinder_rejected(self):
        with pytest.raises(ValidationError):
            GridConfig(beam_radius=2e-3)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            GridConfig(n_theta=4)

    def test_negative_absorption_rejected(self):
        with pytest.raises(ValidationError):
            AbsorptionScale(rpe=-0.1, ch=0.1)

    def test_domain_bounds_must_be_ordered(self):
        with pytest.raises(ValidationError):
            ParameterDomain(rpe=(1.0, 0.5))

    def test_domain_samplers(self):
        domain = ParameterDomain()
        grid = domain.grid(5, 5)
        assert len(grid) == 25
        assert grid[0] == AbsorptionScale(rpe=0.3821, ch=0.0424)
        assert grid[-1] == AbsorptionScale(rpe=1.1451, ch=0.1549)
        line = domain.line(9, REFERENCE_MEAN.ch)
        assert len(line) == 9
        assert all(a.ch == REFERENCE_MEAN.ch for a in line)
        assert domain.contains(REFERENCE_MEAN)
        assert not domain.contains(AbsorptionScale(rpe=2.0, ch=0.1))
        assert len(domain.corners()) == 4


class TestAbsorption:
    def test_profile_values(self, layers):
        alpha = AbsorptionScale(rpe=1.0, ch=1.0)
        assert absorption_profile(layers, alpha, layers.rpe_center) == pytest.approx(layers.mu_rpe)
        assert absorption_profile(layers, alpha, layers.choroid_top + 1e-6) == pytest.approx(layers.mu_choroid)
        assert absorption_profile(layers, alpha, 50e-6) == 0.0
        assert absorption_profile(layers, alpha, -10e-6) == 0.0

    def test_g_profile_is_continuous_attenuation(self, layers):
        alpha = REFERENCE_MEAN
        a = alpha.rpe * layers.mu_rpe
        c = alpha.ch * layers.mu_choroid
        assert g_profile(layers, alpha, layers.rpe_top) == pytest.approx(a)
        assert g_profile(layers, alpha, layers.choroid_top) == pytest.approx(c * np.exp(-a * layers.rpe))
        assert g_profile(layers, alpha, layers.retina - 1e-6) == 0.0

    def test_unknown_derivative_rejected(self, layers):
        with pytest.raises(ValueError):
            g_profile(layers, REFERENCE_MEAN, layers.rpe_center, deriv='d_sclera')

    @pytest.mark.parametrize('layer', ['rpe', 'choroid'])
    def test_g_profile_decreases_inside_absorbing_layers(self, layers, layer):
        top = layers.rpe_top if layer == 'rpe' else layers.choroid_top
        bottom = layers.rpe_top + layers.rpe if layer == 'rpe' else layers.choroid_bottom
        z = np.linspace(top, bottom, 50)[1:-1]
        values = g_profile(layers, REFERENCE_MEAN, z)
        assert np.all(values > 0)
        assert np.all(np.diff(values) < 0)


class TestDiscretization:
    def test_default_dimension(self, desk_model):
        assert desk_model.n == 3160
        assert desk_model.state_shape == (79, 40)

    def test_state_index_ordering(self, tiny_model):
        assert tiny_model.index(0, 1) == 0
        assert tiny_model.index(3, 2) == tiny_model.n_radial + 3
        assert tiny_model.node_of(tiny_model.index(4, 7)) == (4, 7)
        with pytest.raises(ValueError):
            tiny_model.index(0, 0)

    def test_operator_matches_dense_stencil(self, tiny_model):
        dense = dense_stencil(tiny_model)
        np.testing.assert_allclose(tiny_model.A.toarray(), dense, rtol=1e-10, atol=1e-10 * np.abs(dense).max())

    def test_operator_is_stable(self, tiny_model):
        assert np.max(np.linalg.eigvals(tiny_model.A.toarray()).real) < 0

    def test_mass_symmetrizes_operator(self, tiny_model):
        assert np.all(tiny_model.mass > 0)
        weighted = tiny_model.mass[:, None] * tiny_model.A.toarray()
        np.testing.assert_allclose(weighted, weighted.T, rtol=0, atol=1e-12 * np.abs(weighted).max())
        assert np.max(np.linalg.eigvalsh(weighted)) < 0

    def test_layer_interfaces_are_nodes(self, small_model, layers):
        for _, top, bottom in layers.interfaces():
            assert np.min(np.abs(small_model.z - top)) < 1e-12
            assert np.min(np.abs(small_model.z - bottom)) < 1e-12

    def test_peak_node_is_rpe_center_on_axis(self, tiny_model, layers):
        i_r, j_z = tiny_model.node_of(tiny_model.peak_index)
        assert i_r == 0
        assert tiny_model.z[j_z] == pytest.approx(layers.rpe_center, abs=1e-12)

    def test_too_few_axial_nodes(self, layers):
        with pytest.raises(ValueError, match='leaves a layer without mesh nodes'):
            build_model(layers, GridConfig(n_z=8))

    def test_summary(self, tiny_model):
        summary = tiny_model.summary()
        assert summary['n'] == 190
        assert summary['segment_intervals']['rpe'] == 2


class TestOperators:
    def test_input_at_rpe_top(self, tiny_model, layers):
        j = int(np.argmin(np.abs(tiny_model.z - layers.rpe_top)))
        B = assemble_input(tiny_model, AbsorptionScale(rpe=1.0, ch=1.0))
        expected = layers.mu_rpe / (layers.material.volumetric_heat_capacity * np.pi * 1e-4 ** 2)
        assert B[tiny_model.index(0, j)] == pytest.approx(expected, rel=1e-12)

    def test_input_vanishes_outside_beam(self, tiny_model):
        B = assemble_input(tiny_model, REFERENCE_MEAN).reshape(tiny_model.state_shape)
        outside = tiny_model.r[:-1] > tiny_model.grid.beam_radius * (1 + 1e-9)
        assert np.all(B[:, outside] == 0.0)

    @pytest.mark.parametrize('deriv, component', [('d_rpe', 'rpe'), ('d_ch', 'ch')])
    def test_input_derivative_matches_finite_difference(self, tiny_model, deriv, component):
        h = 1e-6
        plus = REFERENCE_MEAN.shifted(**{f'd_{component}': h})
        minus = REFERENCE_MEAN.shifted(**{f'd_{component}': -h})
        numeric = (assemble_input(tiny_model, plus) - assemble_input(tiny_model, minus)) / (2 * h)
        analytic = assemble_input(tiny_model, REFERENCE_MEAN, deriv)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6 * np.abs(analytic).max())

    @pytest.mark.parametrize('deriv, component', [('d_rpe', 'rpe'), ('d_ch', 'ch')])
    def test_output_derivative_matches_finite_difference(self, tiny_model, deriv, component):
        h = 1e-6
        plus = REFERENCE_MEAN.shifted(**{f'd_{component}': h})
        minus = REFERENCE_MEAN.shifted(**{f'd_{component}': -h})
        numeric = (assemble_output_vol(tiny_model, plus) - assemble_output_vol(tiny_model, minus)) / (2 * h)
        analytic = assemble_output_vol(tiny_model, REFERENCE_MEAN, deriv)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6 * np.abs(analytic).max())

    def test_input_flat_across_beam_inside_rpe(self, tiny_model):
        B = assemble_input(tiny_model, REFERENCE_MEAN).reshape(tiny_model.state_shape)
        inside = tiny_model.r[:-1] <= tiny_model.grid.beam_radius
        rows = np.flatnonzero(tiny_model.node_layer[1:-1] == RPE)
        assert len(rows) > 0 and inside.sum() > 1
        for j in rows:
            np.testing.assert_allclose(B[j, inside], B[j, 0], rtol=1e-14)
            assert B[j, 0] > 0

    @pytest.mark.parametrize('alpha', ParameterDomain().grid(5, 5), ids=str)
    def test_derivatives_match_finite_differences_over_domain(self, tiny_model, alpha):
        h = 1e-6
        for component in ('rpe', 'ch'):
            plus = alpha.shifted(**{f'd_{component}': h})
            minus = alpha.shifted(**{f'd_{component}': -h})
            for assemble in (assemble_input, assemble_output_vol):
                numeric = (assemble(tiny_model, plus) - assemble(tiny_model, minus)) / (2 * h)
                analytic = assemble(tiny_model, alpha, f'd_{component}')
                np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-5 * np.abs(analytic).max())

    def test_second_order_taylor_coefficient(self, tiny_model):
        h = 1e-5
        plus = assemble_input(tiny_model, REFERENCE_MEAN.shifted(d_rpe=h), 'd_rpe')
        minus = assemble_input(tiny_model, REFERENCE_MEAN.shifted(d_rpe=-h), 'd_rpe')
        expected = (plus - minus) / (2 * h) / 2.0
        coefficient = input_coefficient(tiny_model, REFERENCE_MEAN, 2, 0)
        np.testing.assert_allclose(coefficient, expected, rtol=1e-5, atol=1e-5 * np.abs(expected).max())

    def test_beam_average_of_uniform_field(self, tiny_model):
        assert tiny_model.radial_weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_volume_output_integrates_absorbed_fraction(self, tiny_model, layers):
        alpha = REFERENCE_MEAN
        optical_depth = alpha.rpe * layers.mu_rpe * layers.rpe + alpha.ch * layers.mu_choroid * layers.choroid
        C_vol = assemble_output_vol(tiny_model, alpha)
        assert C_vol @ np.ones(tiny_model.n) == pytest.approx(1.0 - np.exp(-optical_depth), rel=1e-9)

    def test_peak_output_selects_one_node(self, tiny_model):
        C_peak = assemble_output_peak(tiny_model)
        assert C_peak.sum() == 1.0
        assert C_peak[tiny_model.peak_index] == 1.0
        assert assemble_outputs(tiny_model, REFERENCE_MEAN).shape == (2, tiny_model.n)

    @pytest.mark.parametrize('orders', [(0, 0), (1, 0), (0, 1), (1, 1)])
    def test_sampler_matches_full_assembly(self, tiny_model, orders):
        rng = np.random.default_rng(3)
        indices = np.r_[rng.choice(tiny_model.n, 12, replace=False), tiny_model.peak_index]
        sampler = OperatorSampler(tiny_model, indices)
        alpha = AbsorptionScale(rpe=0.9, ch=0.12)
        np.testing.assert_allclose(sampler.input_entries(alpha, orders),
                                   assemble_input(tiny_model, alpha, orders)[indices], rtol=1e-13)
        full = np.vstack([assemble_output_vol(tiny_model, alpha, orders),
                          assemble_output_peak(tiny_model) if orders == (0, 0) else np.zeros(tiny_model.n)])
        np.testing.assert_allclose(sampler.output_entries(alpha, orders), full[:, indices],
                                   rtol=1e-12, atol=1e-14 * np.abs(full).max())

    def test_sampler_rejects_out_of_range_indices(self, tiny_model):
        with pytest.raises(ValueError):
            OperatorSampler(tiny_model, [tiny_model.n])
