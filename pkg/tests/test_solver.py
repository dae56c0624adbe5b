import io
import math

import numpy as np
import pytest

from sfode.solver import (
    DivergenceError,
    NoiseHistory,
    SolverConfig,
    Trajectory,
    correct,
    predict,
    solve,
    write_trajectory_csv,
)
from sfode.special import gamma, mittag_leffler
from sfode.stochastic import SeedSpec, generate_path, make_grid
from sfode.systems import LorenzParams, SystemModel, linear_test, lorenz, newton_leipnik


def constant_diffusion_model(sigma0: float, y0: float = 0.0) -> SystemModel:
    return linear_test(lam=0.0, sigma0=sigma0, y0=y0)


class TestConfig:
    def test_alpha_range(self):
        grid = make_grid(1.0, 0.5)
        with pytest.raises(ValueError):
            SolverConfig(alpha=0.0, grid=grid)
        with pytest.raises(ValueError):
            SolverConfig(alpha=1.2, grid=grid)

    def test_stochastic_needs_alpha_above_half(self):
        grid = make_grid(1.0, 0.5)
        with pytest.raises(ValueError):
            SolverConfig(alpha=0.3, grid=grid, stochastic=True)
        SolverConfig(alpha=0.3, grid=grid)  # deterministic is fine

    def test_path_presence(self):
        grid = make_grid(1.0, 0.25)
        cfg = SolverConfig(alpha=0.8, grid=grid, stochastic=True)
        with pytest.raises(ValueError):
            solve(constant_diffusion_model(1.0), cfg)
        wrong_grid = generate_path(SeedSpec(0), make_grid(1.0, 0.5))
        with pytest.raises(ValueError):
            solve(constant_diffusion_model(1.0), cfg, wrong_grid)
        wrong_channels = generate_path(SeedSpec(0), grid, num_channels=2)
        with pytest.raises(ValueError):
            solve(constant_diffusion_model(1.0), cfg, wrong_channels)


class TestDeterministic:
    def test_zero_system_stays_put(self):
        model = linear_test(lam=0.0, sigma0=0.0, y0=1.5)
        cfg = SolverConfig(alpha=0.6, grid=make_grid(1.0, 0.05))
        traj = solve(model, cfg)
        np.testing.assert_array_equal(traj.states, 1.5)

    def test_initial_state_recorded(self):
        model = newton_leipnik()
        cfg = SolverConfig(alpha=0.93, grid=make_grid(0.1, 0.005))
        traj = solve(model, cfg)
        np.testing.assert_array_equal(traj.states[:, 0], model.y0)

    def test_mittag_leffler_oracle(self):
        model = linear_test(lam=1.0)
        grid = make_grid(1.0, 1.0 / 200)
        traj = solve(model, SolverConfig(alpha=0.8, grid=grid))
        exact = np.array([mittag_leffler(0.8, -(t**0.8)) for t in grid.nodes()])
        assert np.max(np.abs(traj.states[0] - exact)) <= 1e-3

    def test_classical_limit(self):
        model = linear_test(lam=1.0)
        traj = solve(model, SolverConfig(alpha=1.0, grid=make_grid(1.0, 0.01)))
        assert abs(traj.states[0, -1] - math.exp(-1.0)) <= 1e-4

    def test_alpha_one_matches_directly_coded_scheme(self):
        # independent comparator: rectangle-rule predictor plus trapezoid
        # corrector over the full history, written as plain loops
        lam, h, steps = 1.3, 0.02, 50
        model = linear_test(lam=lam, y0=1.0)
        grid = make_grid(steps * h, h)
        traj = solve(model, SolverConfig(alpha=1.0, grid=grid))

        f = lambda y: -lam * y
        y = np.empty(steps + 1)
        y[0] = 1.0
        fs = [f(y[0])]
        for n in range(steps):
            yp = y[0] + h * sum(fs)
            hist = fs[0] + 2.0 * sum(fs[1:]) if n >= 1 else fs[0]
            y[n + 1] = y[0] + (h / 2.0) * (f(yp) + hist)
            fs.append(f(y[n + 1]))
        np.testing.assert_allclose(traj.states[0], y, atol=1e-12)

    def test_order_at_least_one(self):
        model = linear_test(lam=1.0)
        errs = []
        for steps in (50, 100, 200):
            grid = make_grid(1.0, 1.0 / steps)
            traj = solve(model, SolverConfig(alpha=0.8, grid=grid))
            exact = np.array([mittag_leffler(0.8, -(t**0.8)) for t in grid.nodes()])
            errs.append(np.max(np.abs(traj.states[0] - exact)))
        assert math.log2(errs[0] / errs[1]) >= 1.0
        assert math.log2(errs[1] / errs[2]) >= 1.0

    def test_manufactured_polynomial_solution(self):
        # y(t) = t**2 solves D^alpha y = 2 t**(2-alpha)/Gamma(3-alpha) once a
        # vanishing (y - t**2) coupling is added; independent of the
        # Mittag-Leffler oracle and exercises a time-dependent drift
        alpha = 0.6

        def drift(t, y):
            forcing = 2.0 * t ** (2.0 - alpha) / gamma(3.0 - alpha)
            return np.array([forcing + (y[0] - t * t)])

        model = SystemModel(
            name="poly", dim=1, noise_dim=1, drift=drift,
            diffusion=lambda t, y: np.zeros((1, 1)), y0=np.array([0.0]),
        )
        errs = []
        for steps in (100, 200):
            grid = make_grid(1.0, 1.0 / steps)
            traj = solve(model, SolverConfig(alpha=alpha, grid=grid))
            errs.append(np.max(np.abs(traj.states[0] - grid.nodes() ** 2)))
        assert errs[-1] <= 5e-4
        assert math.log2(errs[0] / errs[1]) >= 1.0

    def test_newton_leipnik_first_step_consistency(self):
        model = newton_leipnik()
        h = 0.005
        cfg = SolverConfig(alpha=0.93, grid=make_grid(1.0, h))
        traj = solve(model, cfg)
        step = np.linalg.norm(traj.states[:, 1] - model.y0)
        assert np.all(np.isfinite(traj.states[:, 1]))
        assert step <= 10.0 * h * np.linalg.norm(model.drift(0.0, model.y0))


class TestPredictCorrect:
    def test_predictor_first_step_constant_diffusion(self):
        alpha, h, sigma0 = 0.7, 0.125, 2.5
        grid = make_grid(1.0, h)
        model = constant_diffusion_model(sigma0, y0=1.0)
        cfg = SolverConfig(alpha=alpha, grid=grid, stochastic=True)
        path = generate_path(SeedSpec(4), grid)
        history = np.array([[1.0]])
        yp = predict(history, path, model, cfg, 0)
        expected = 1.0 + (h**alpha / alpha) * sigma0 * path.increments[0, 0] / (gamma(alpha) * h)
        assert yp[0] == pytest.approx(expected, rel=1e-14)

    def test_predictor_alpha_one_is_euler_history_sum(self):
        lam, h = 0.9, 0.1
        model = linear_test(lam=lam, y0=1.0)
        grid = make_grid(1.0, h)
        cfg = SolverConfig(alpha=1.0, grid=grid)
        traj = solve(model, cfg)
        n = 5
        yp = predict(traj, None, model, cfg, n)
        history_sum = 1.0 + h * sum(-lam * traj.states[0, j] for j in range(n + 1))
        assert yp[0] == pytest.approx(history_sum, rel=1e-13)

    @pytest.mark.parametrize("mode", list(NoiseHistory))
    def test_step_functions_reproduce_solve(self, mode):
        model = newton_leipnik()
        grid = make_grid(0.5, 0.025)
        cfg = SolverConfig(alpha=0.9, grid=grid, stochastic=True, noise_history=mode)
        path = generate_path(SeedSpec(21), grid, num_channels=3)
        traj = solve(model, cfg, path)
        for n in (0, 3, grid.num_steps - 1):
            yp = predict(traj, path, model, cfg, n)
            yc = correct(traj, yp, path, model, cfg, n)
            np.testing.assert_array_equal(yc, traj.states[:, n + 1])

    def test_zero_system_correction_stays_at_start(self):
        model = linear_test(lam=0.0, sigma0=0.0, y0=2.0)
        grid = make_grid(1.0, 0.25)
        cfg = SolverConfig(alpha=0.8, grid=grid)
        history = np.full((1, 1), 2.0)
        yp = predict(history, None, model, cfg, 0)
        yc = correct(history, yp, None, model, cfg, 0)
        assert yp[0] == 2.0 and yc[0] == 2.0


class TestStochastic:
    def test_noise_off_ignores_path(self):
        model = newton_leipnik()
        cfg = SolverConfig(alpha=0.93, grid=make_grid(0.5, 0.01))
        path_a = generate_path(SeedSpec(1), cfg.grid, num_channels=3)
        path_b = generate_path(SeedSpec(2), cfg.grid, num_channels=3)
        np.testing.assert_array_equal(
            solve(model, cfg, path_a).states, solve(model, cfg, path_b).states
        )

    def test_seed_determinism(self):
        model = lorenz(LorenzParams(mu=0.01))
        cfg = SolverConfig(alpha=0.95, grid=make_grid(1.0, 0.01), stochastic=True)
        a = solve(model, cfg, generate_path(SeedSpec(123), cfg.grid, 3))
        b = solve(model, cfg, generate_path(SeedSpec(123), cfg.grid, 3))
        np.testing.assert_array_equal(a.states, b.states)

    def test_noise_history_modes_differ(self):
        model = constant_diffusion_model(1.0)
        grid = make_grid(1.0, 0.125)
        path = generate_path(SeedSpec(8), grid)
        runs = {}
        for mode in NoiseHistory:
            cfg = SolverConfig(alpha=0.75, grid=grid, stochastic=True, noise_history=mode)
            runs[mode] = solve(model, cfg, path).states
        assert not np.array_equal(runs[NoiseHistory.PER_STEP], runs[NoiseHistory.LAST_INCREMENT])

    def test_divergence_raises(self):
        model = lorenz(LorenzParams(mu=50.0))
        cfg = SolverConfig(alpha=0.9, grid=make_grid(5.0, 0.005), stochastic=True)
        path = generate_path(SeedSpec(0), cfg.grid, 3)
        with pytest.raises(DivergenceError) as err:
            solve(model, cfg, path)
        assert err.value.step is not None

    def test_blowup_bound_configurable(self):
        model = linear_test(lam=-3.0, y0=1.0)  # grows without noise
        cfg = SolverConfig(alpha=1.0, grid=make_grid(5.0, 0.05), blowup=10.0)
        with pytest.raises(DivergenceError):
            solve(model, cfg)


class TestTrajectoryExport:
    def test_csv_round_trip(self):
        model = newton_leipnik()
        cfg = SolverConfig(alpha=0.93, grid=make_grid(0.1, 0.01))
        traj = solve(model, cfg)
        buf = io.StringIO()
        write_trajectory_csv(traj, buf, {"version": "test"})
        lines = buf.getvalue().strip().split("\n")
        comments = [l for l in lines if l.startswith("#")]
        data = [l for l in lines if not l.startswith("#")]
        assert any(l.startswith("# version=") for l in comments)
        assert data[0] == "t,y1,y2,y3"
        assert len(data) - 1 == traj.grid.num_nodes
        # 17 significant digits must round-trip exactly
        values = np.array([[float(x) for x in l.split(",")] for l in data[1:]])
        np.testing.assert_array_equal(values[:, 1:].T, traj.states)

    def test_meta_echoes_run_settings(self):
        model = linear_test()
        cfg = SolverConfig(alpha=0.8, grid=make_grid(1.0, 0.25))
        traj = solve(model, cfg)
        assert traj.meta["alpha"] == 0.8
        assert traj.meta["noise_history"] == "per_step"
        assert traj.meta["weight_mode"] == "standard"
        assert traj.meta["seed"] is None
