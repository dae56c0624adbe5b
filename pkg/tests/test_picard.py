import io
import math

import numpy as np
import pytest

from sfode.picard import (
    cauchy_diagnostic,
    g1_quadrature,
    g2_stochastic_convolution,
    picard_iterate,
    write_distance_csv,
)
from sfode.solver import SolverConfig, Trajectory, solve
from sfode.special import gamma, mittag_leffler
from sfode.stochastic import SeedSpec, generate_path, make_grid
from sfode.systems import LorenzParams, SystemModel, linear_test, lorenz, newton_leipnik


def constant_drift_model(value: float) -> SystemModel:
    return SystemModel(
        name="const",
        dim=1,
        noise_dim=1,
        drift=lambda t, y: np.array([value]),
        diffusion=lambda t, y: np.zeros((1, 1)),
        y0=np.array([0.0]),
        params={},
    )


def ramp_drift_model() -> SystemModel:
    # f(t, y) = t, independent of the state
    return SystemModel(
        name="ramp",
        dim=1,
        noise_dim=1,
        drift=lambda t, y: np.array([t]),
        diffusion=lambda t, y: np.zeros((1, 1)),
        y0=np.array([0.0]),
        params={},
    )


def zero_trajectory(grid) -> Trajectory:
    return Trajectory(grid=grid, states=np.zeros((1, grid.num_nodes)))


class TestG1:
    def test_zero_drift_gives_zero(self):
        grid = make_grid(1.0, 0.125)
        traj = zero_trajectory(grid)
        model = constant_drift_model(0.0)
        for n in (0, 3, grid.num_steps):
            np.testing.assert_array_equal(g1_quadrature(traj, model, 0.8, n), 0.0)

    @pytest.mark.parametrize("alpha", [0.6, 0.8, 1.0])
    def test_constant_drift_integrated_exactly(self, alpha):
        # the product rule integrates the kernel exactly against constants:
        # result must equal t**alpha / Gamma(alpha + 1) at every node
        grid = make_grid(1.0, 0.05)
        traj = zero_trajectory(grid)
        model = constant_drift_model(1.0)
        t = grid.nodes()
        for n in range(1, grid.num_nodes):
            got = g1_quadrature(traj, model, alpha, n)[0]
            assert got == pytest.approx(t[n] ** alpha / gamma(alpha + 1.0), rel=1e-13)

    def test_ramp_drift_converges_to_closed_form(self):
        # fractional integral of f(s) = s at order 1/2 is
        # Gamma(2)/Gamma(2.5) * t**1.5; the rectangle rule converges as h -> 0
        alpha = 0.51  # operators require alpha > 1/2
        expected = gamma(2.0) / gamma(2.0 + alpha)
        errs = []
        for steps in (64, 256):
            grid = make_grid(1.0, 1.0 / steps)
            got = g1_quadrature(zero_trajectory(grid), ramp_drift_model(), alpha, steps)[0]
            errs.append(abs(got - expected))
        assert errs[1] < errs[0]
        assert errs[1] <= 5e-3

    def test_alpha_half_closed_form_reference_value(self):
        # frozen value of Gamma(2)/Gamma(2.5): the target of the previous test
        assert gamma(2.0) / gamma(2.5) == pytest.approx(0.75225277806367504, rel=1e-12)

    def test_rejects_small_alpha(self):
        grid = make_grid(1.0, 0.25)
        with pytest.raises(ValueError):
            g1_quadrature(zero_trajectory(grid), constant_drift_model(1.0), 0.4, 2)


class TestG2:
    def test_zero_diffusion_gives_zero(self):
        grid = make_grid(1.0, 0.125)
        model = constant_drift_model(1.0)  # diffusion is zero
        path = generate_path(SeedSpec(0), grid)
        out = g2_stochastic_convolution(zero_trajectory(grid), model, 0.8, path, 4)
        np.testing.assert_array_equal(out, 0.0)

    def test_unit_diffusion_alpha_one_recovers_path(self):
        grid = make_grid(1.0, 1.0 / 64)
        model = linear_test(lam=0.0, sigma0=1.0, y0=0.0)
        path = generate_path(SeedSpec(13), grid)
        traj = zero_trajectory(grid)
        for n in (1, 10, 64):
            got = g2_stochastic_convolution(traj, model, 1.0, path, n)[0]
            assert got == pytest.approx(path.cumulative[0, n], abs=1e-15)

    def test_variance_law(self):
        # terminal variance of the noise convolution for sigma = 1 must match
        # T**(2a-1) / ((2a-1) * Gamma(a)**2) within 10% at M = 2000
        alpha, steps, M = 0.75, 256, 2000
        grid = make_grid(1.0, 1.0 / steps)
        model = linear_test(lam=0.0, sigma0=1.0, y0=0.0)
        traj = zero_trajectory(grid)
        vals = np.empty(M)
        for i in range(M):
            path = generate_path(SeedSpec(314, i, 0), grid)
            vals[i] = g2_stochastic_convolution(traj, model, alpha, path, steps)[0]
        expected = 1.0 / ((2 * alpha - 1) * gamma(alpha) ** 2)
        assert abs(np.var(vals) - expected) / expected <= 0.10


class TestPicardIterate:
    def test_zero_system_fixed_point(self):
        model = linear_test(lam=0.0, sigma0=0.0, y0=2.0)
        grid = make_grid(1.0, 0.125)
        seq = picard_iterate(model, 0.8, grid, None, K=3)
        assert len(seq.iterates) == 4
        for it in seq.iterates:
            np.testing.assert_array_equal(it.states, 2.0)
        np.testing.assert_array_equal(seq.terminal_gaps(), 0.0)

    def test_sweep_matches_node_operators(self):
        # the vectorized sweep must agree with the per-node quadratures
        model = newton_leipnik()
        grid = make_grid(0.25, 1.0 / 40)
        path = generate_path(SeedSpec(5), grid, num_channels=3)
        seq = picard_iterate(model, 0.93, grid, path, K=2)
        prev, curr = seq.iterates[1], seq.iterates[2]
        for n in (0, 1, 7, grid.num_steps):
            expected = (
                model.y0
                + g1_quadrature(prev, model, 0.93, n)
                + g2_stochastic_convolution(prev, model, 0.93, path, n)
            )
            np.testing.assert_allclose(curr.states[:, n], expected, atol=1e-12)

    def test_linear_problem_approaches_oracle(self):
        model = linear_test(lam=1.0)
        grid = make_grid(1.0, 1.0 / 128)
        exact = np.array([mittag_leffler(0.8, -(t**0.8)) for t in grid.nodes()])
        seq = picard_iterate(model, 0.8, grid, None, K=8)
        errs = [np.max(np.abs(it.states[0] - exact)) for it in seq.iterates]
        assert all(errs[k + 1] < errs[k] for k in range(5))
        assert errs[-1] <= 0.05

    def test_agrees_with_time_stepper(self):
        # shared grid, deterministic linear problem: the fixed point and the
        # predictor-corrector answer must land within 5% of each other
        model = linear_test(lam=1.0)
        grid = make_grid(1.0, 1.0 / 256)
        seq = picard_iterate(model, 0.8, grid, None, K=10)
        stepper = solve(model, SolverConfig(alpha=0.8, grid=grid))
        picard_T = seq.iterates[-1].terminal()[0]
        solver_T = stepper.terminal()[0]
        assert abs(picard_T - solver_T) / abs(solver_T) <= 0.05

    def test_validation(self):
        model = linear_test()
        grid = make_grid(1.0, 0.25)
        with pytest.raises(ValueError):
            picard_iterate(model, 0.4, grid, None, K=2)
        with pytest.raises(ValueError):
            picard_iterate(model, 0.8, grid, None, K=0)
        wrong = generate_path(SeedSpec(0), make_grid(1.0, 0.5))
        with pytest.raises(ValueError):
            picard_iterate(model, 0.8, grid, wrong, K=2)


class TestCauchyDiagnostic:
    def test_zero_system_all_zero(self):
        model = linear_test(lam=0.0, sigma0=0.0)
        report = cauchy_diagnostic(model, 0.8, make_grid(0.5, 0.05), 0, M=100, K=4)
        np.testing.assert_array_equal(report.distances, 0.0)
        assert report.converged

    def test_deterministic_contraction(self):
        model = linear_test(lam=1.0)
        report = cauchy_diagnostic(model, 0.8, make_grid(0.5, 0.025), 0, M=100, K=6)
        assert np.all(np.diff(report.distances) < 0)

    def test_lorenz_distances_decreasing(self):
        # the Lorenz drift's stiffness (Lipschitz ~30) means the sweeps only
        # contract from the start on a short horizon; longer horizons need
        # more sweeps before the factorial decay wins
        model = lorenz(LorenzParams(mu=0.1))
        grid = make_grid(0.1, 1.0 / 200)
        report = cauchy_diagnostic(model, 0.99, grid, 42, M=200, K=6)
        assert np.all(np.diff(report.distances) < 0)
        assert report.max_terminal_l2 < 1e6

    def test_requires_enough_paths(self):
        with pytest.raises(ValueError):
            cauchy_diagnostic(linear_test(), 0.8, make_grid(0.5, 0.05), 0, M=10, K=4)

    def test_sup_mode_dominates_terminal_mode(self):
        model = newton_leipnik()
        grid = make_grid(0.25, 1.0 / 40)
        term = cauchy_diagnostic(model, 0.93, grid, 3, M=100, K=4)
        sup = cauchy_diagnostic(model, 0.93, grid, 3, M=100, K=4, sup_mode=True)
        assert np.all(sup.distances >= term.distances)


def test_write_distance_csv():
    model = linear_test(lam=1.0)
    report = cauchy_diagnostic(model, 0.8, make_grid(0.5, 0.05), 0, M=100, K=4)
    buf = io.StringIO()
    write_distance_csv(report, buf, {"note": "demo"})
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "# note=demo"
    assert lines[1] == "k,d_k"
    assert len(lines) == 2 + len(report.distances)
