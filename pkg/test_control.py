"""
Tests for the condensed tracking QP, the OSQP solves and receding-horizon runs.
"""
import dataclasses
import itertools

import numpy as np
import pytest
from pydantic import ValidationError

from retina.control import (
    CondensedQP,
    Condenser,
    OcpSpec,
    QpSolver,
    horizon_sweep,
    kkt_residuals,
    run_closed_loop,
    solve_qp,
    timing_summary,
)
from retina.model import REFERENCE_MEAN
from retina.reduction import build_deim_gb_rom, snapshot_params


def box_qp(H, q, upper):
    """Input-box QP without output rows"""
    n = len(q)
    return CondensedQP(H=H, q=q, constant=0.0, G=np.eye(n), lower=np.zeros(n), upper=np.asarray(upper, dtype=float),
                       free_response=np.zeros(n), gamma=np.zeros((n, n)))


def brute_force_box(H, q, upper):
    """Best feasible face-restricted stationary point over every active-set pattern"""
    n = len(q)
    best, best_cost = None, np.inf
    for pattern in itertools.product((None, 'lower', 'upper'), repeat=n):
        u = np.zeros(n)
        fixed = [i for i, p in enumerate(pattern) if p is not None]
        free = [i for i, p in enumerate(pattern) if p is None]
        for i in fixed:
            u[i] = 0.0 if pattern[i] == 'lower' else upper[i]
        if free:
            rhs = -q[free] - H[np.ix_(free, fixed)] @ u[fixed]
            u[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
        if np.any(u < -1e-12) or np.any(u > upper + 1e-12):
            continue
        cost = 0.5 * u @ H @ u + q @ u
        if cost < best_cost:
            best, best_cost = u, cost
    return best


def random_stable_system(rng, d=4):
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    A = Q @ np.diag(rng.uniform(0.2, 0.9, size=d)) @ Q.T
    return A, rng.normal(size=d), rng.normal(size=d)


class TestQpSolves:
    def test_unconstrained_solution(self):
        H = np.array([[4.0, 1.0], [1.0, 3.0]])
        q = np.array([1.0, -2.0])
        qp = CondensedQP(H=H, q=q, constant=0.0, G=np.eye(2), lower=np.full(2, -np.inf),
                         upper=np.full(2, np.inf), free_response=np.zeros(2), gamma=np.zeros((2, 2)))
        solution = solve_qp(qp)
        assert solution.status == 'solved'
        np.testing.assert_allclose(solution.u, -np.linalg.solve(H, q), rtol=1e-12)

    @pytest.mark.parametrize('seed', range(100))
    def test_box_qp_matches_active_set_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        M = rng.normal(size=(5, 5))
        H = M @ M.T + np.eye(5)
        q = 3.0 * rng.normal(size=5)
        upper = rng.uniform(0.2, 1.0, size=5)
        qp = box_qp(H, q, upper)
        solution = solve_qp(qp)
        assert solution.usable
        np.testing.assert_allclose(solution.u, brute_force_box(H, q, upper), atol=1e-6)
        residuals = kkt_residuals(qp, solution.u, solution.dual)
        assert residuals['primal'] <= 1e-6
        assert residuals['dual_abs'] <= 1e-6
        assert residuals['complementarity'] <= 1e-6

    def test_infeasible_problem_not_solved(self):
        qp = box_qp(np.eye(2), np.zeros(2), [1.0, 1.0])
        qp.infeasible = True
        solution = solve_qp(qp)
        assert solution.status == 'infeasible'
        assert not solution.usable

    def test_residuals_of_known_optimum(self):
        H = np.diag([2.0, 2.0])
        q = np.array([-4.0, 1.0])
        qp = box_qp(H, q, [1.0, 1.0])
        # optimum u = (1, 0): upper bound active on u_0 with multiplier 2, lower on u_1 with -1
        exact = kkt_residuals(qp, np.array([1.0, 0.0]), np.array([2.0, -1.0]))
        assert exact == {'primal': 0.0, 'dual': 0.0, 'dual_abs': 0.0, 'complementarity': 0.0}
        off = kkt_residuals(qp, np.array([1.0, 0.0]), np.array([2.0, 0.0]))
        assert off['dual_abs'] == pytest.approx(1.0)
        assert off['dual'] == pytest.approx(0.25)

    def test_condensed_qps_along_closed_loop_satisfy_kkt(self, tiny_rom):
        spec = OcpSpec(horizon=10)
        condenser = Condenser.from_rom(spec, tiny_rom)
        x = np.zeros(tiny_rom.d)
        solver = None
        for _ in range(60):
            qp = condenser.condense(x)
            assert not qp.infeasible
            solver = solver or QpSolver(qp)
            solution = solver.solve(qp)
            assert solution.usable
            residuals = kkt_residuals(qp, solution.u, solution.dual)
            assert residuals['primal'] <= 1e-6
            assert residuals['dual'] <= 1e-6
            assert residuals['complementarity'] <= 1e-6 * max(1.0, np.max(np.abs(solution.dual)))
            x = condenser.A @ x + condenser.b * solution.u[0]


class TestCondensation:
    def test_predictions_and_cost_match_direct_simulation(self):
        rng = np.random.default_rng(3)
        A, b, c = random_stable_system(rng)
        spec = OcpSpec(horizon=6, y_ref=1.0, y_max=50.0, u_max=2.0, rho=0.5)
        condenser = Condenser(spec, A, b, c, u_ref=0.4)
        x0 = rng.normal(size=4)
        u = rng.uniform(0.0, 2.0, size=6)
        qp = condenser.condense(x0)

        x, outputs, cost = x0.copy(), [], 0.0
        for k in range(6):
            outputs.append(c @ x)
            cost += (c @ x - 1.0) ** 2 + 0.5 * (u[k] - 0.4) ** 2
            x = A @ x + b * u[k]
        np.testing.assert_allclose(qp.predicted_outputs(u), outputs, rtol=1e-10, atol=1e-12)
        assert qp.cost(u) == pytest.approx(cost, rel=1e-10)
        assert qp.G.shape == (11, 6)
        np.testing.assert_allclose(qp.upper[6:], 50.0 - qp.free_response[1:])

    def test_current_peak_above_limit_is_infeasible(self):
        A = np.diag([0.5, 0.8])
        spec = OcpSpec(horizon=4, y_ref=1.0, y_max=2.0, u_max=1.0)
        qp = Condenser(spec, A, np.ones(2), np.array([1.0, 0.0]), u_ref=0.1).condense(np.array([3.0, 0.0]))
        assert qp.infeasible

    def test_steady_input(self):
        spec = OcpSpec(horizon=3, y_ref=1.0, y_max=2.0, u_max=1.0)
        condenser = Condenser(spec, np.array([[0.5]]), np.array([1.0]), np.array([1.0]))
        assert condenser.u_ref == pytest.approx(0.5)

    def test_shapes_checked(self):
        with pytest.raises(ValueError):
            Condenser(OcpSpec(), np.eye(3), np.ones(2), np.ones(3))

    def test_from_rom_uses_peak_row(self, tiny_rom):
        spec = OcpSpec(horizon=5, alpha=REFERENCE_MEAN)
        condenser = Condenser.from_rom(spec, tiny_rom)
        np.testing.assert_allclose(condenser.c, tiny_rom.outputs(REFERENCE_MEAN)[1])
        assert 0.0 < condenser.u_ref <= spec.u_max


class TestSpec:
    def test_reference_above_limit(self):
        with pytest.raises(ValidationError):
            OcpSpec(y_ref=33.0, y_max=32.0)

    def test_horizon_too_short(self):
        with pytest.raises(ValidationError):
            OcpSpec(horizon=1)

    def test_reference_input_outside_box(self):
        with pytest.raises(ValidationError):
            OcpSpec(u_ref=0.2, u_max=0.1)

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            OcpSpec(horizon=5, weight=1.0)


class TestClosedLoop:
    def test_reduced_plant_tracks_reference(self, tiny_rom):
        spec = OcpSpec(horizon=20)
        result = run_closed_loop(spec, tiny_rom, steps=1500)
        assert np.max(result.y_peak) <= spec.y_max + 1e-3
        assert np.all(np.abs(result.y_peak[-100:] - spec.y_ref) <= 0.5)
        assert result.max_input_violation == 0.0
        assert len(result.status) == 1500

    def test_full_plant_run(self, tiny_rom, tiny_model):
        result = run_closed_loop(OcpSpec(horizon=10), tiny_rom, steps=30, plant='full', model=tiny_model)
        assert np.all(np.isfinite(result.y_peak)) and np.all(np.isfinite(result.y_vol))
        assert result.max_input_violation == 0.0
        assert list(result.to_frame().columns) == ['t', 'u', 'y_vol', 'y_peak', 'qp_iters', 'solve_ms']

    def test_full_plant_needs_model(self, tiny_rom):
        with pytest.raises(ValueError):
            run_closed_loop(OcpSpec(), tiny_rom, plant='full')
        with pytest.raises(ValueError):
            run_closed_loop(OcpSpec(), tiny_rom, plant='hybrid')

    def test_horizon_sweep_timing(self, tiny_rom):
        results = horizon_sweep(OcpSpec(), tiny_rom, [2, 5], steps=10, threads=2)
        assert set(results) == {2, 5}
        assert results[5].horizon == 5
        frame = timing_summary(results)
        assert list(frame.columns) == ['N', 'avg_ms', 'max_ms', 'avg_iters']
        assert list(frame['N']) == [2, 5]
        assert np.all(frame['max_ms'] >= frame['avg_ms'])

    def test_unstable_rom_rejected(self, tiny_rom):
        flipped = dataclasses.replace(tiny_rom, A_r=-tiny_rom.A_r, A_d=2.0 * tiny_rom.A_d)
        assert not flipped.stable
        with pytest.raises(ValueError):
            run_closed_loop(OcpSpec(), flipped, steps=5)


@pytest.mark.slow
def test_desk_grid_tracking_with_default_rom(desk_model, domain):
    rom = build_deim_gb_rom(desk_model, snapshot_params(domain, 'rpe-only', 20, REFERENCE_MEAN.ch), d=6, k=3,
                            domain=domain)
    assert rom.stable
    spec = OcpSpec(horizon=20)
    reduced = run_closed_loop(spec, rom, steps=3000)
    assert np.max(reduced.y_peak) <= 32.0 + 1e-6
    assert np.all((reduced.y_peak[-100:] >= 29.5) & (reduced.y_peak[-100:] <= 30.5))
    assert reduced.summary()['avg_ms'] < 5.0

    full = run_closed_loop(spec, rom, steps=3000, plant='full', model=desk_model)
    assert np.all((full.y_peak[-100:] >= 29.5) & (full.y_peak[-100:] <= 30.5))
