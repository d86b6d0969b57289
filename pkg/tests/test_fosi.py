"""
Tests for the FOSI update step, learning-rate scaling, refresh intervals and the run loop
"""

import math

import numpy as np
import pytest

from core.base_optimizers import Adam, GradientDescent, HeavyBall, OptimalLrForm
from core.exceptions import InvalidArgumentsError, NonFiniteError, OverheadTargetError
from core.fosi_optimizer import (
    FosiOptimizer,
    FosiState,
    base_optimize,
    compute_learning_rate_scaling,
    fosi_optimize,
    fosi_update_step,
    interval_T_heuristic,
    interval_T_measured,
    measure_overhead_timings,
    scale_learning_rate,
)
from core.problem_generator import gen_logistic, gen_spectrum_quadratic
from core.run_trace import STATUS_CONVERGED, STATUS_DIVERGED, STATUS_ESE_FAILED
from core.spectral import SpectrumEstimate
from models.experiment_models import FosiConfig, StoppingRule
from models.objective import BatchSchedule
from models.problem_models import QuadraticProblem


def exact_state(problem: QuadraticProblem, base, k: int, l: int = 0, alpha: float = 1.0) -> FosiState:
    state = FosiState.initial(problem.n, k, l, base, alpha)
    state.spectrum = SpectrumEstimate.from_eigenpairs(problem.spectrum, problem.eigenbasis, k, l)
    return state


def trace_without_timing(trace):
    return trace.to_dataframe(record_timing=False)


class TestUpdateStep:

    def test_empty_spectrum_reduces_to_gd(self):
        state = FosiState.initial(2, 1, 0, GradientDescent(0.1), alpha=1.0)
        theta, _ = fosi_update_step(np.array([1.0, 1.0]), np.array([2.0, 0.0]), state)
        np.testing.assert_allclose(theta, [0.8, 1.0])

    @pytest.mark.parametrize("eta", [0.01, 0.1, 0.3])
    def test_rotated_quadratic_hand_computation(self, rotated_quadratic, eta):
        state = exact_state(rotated_quadratic, GradientDescent(eta), k=1)
        theta0 = np.array([1.0, 0.0])
        g = rotated_quadratic.gradient(theta0)
        np.testing.assert_allclose(g, [2.5, 1.5])

        theta1, state = fosi_update_step(theta0, g, state)
        np.testing.assert_allclose(theta1, [0.5 - 0.5 * eta, -0.5 + 0.5 * eta], atol=1e-12)
        v = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert abs(v @ rotated_quadratic.gradient(theta1)) <= 1e-12
        assert state.t == 1

    def test_gradient_inside_subspace_is_pure_newton(self, rotated_quadratic):
        state = exact_state(rotated_quadratic, GradientDescent(0.1), k=1)
        g = np.array([1.0, 1.0])
        theta1, _ = fosi_update_step(np.zeros(2), g, state)
        np.testing.assert_allclose(theta1, -0.25 * g, atol=1e-14)

    def test_one_shot_newton_on_subspace(self):
        for seed in range(10):
            problem = gen_spectrum_quadratic(100, 200.0, seed=seed)
            state = exact_state(problem, GradientDescent(0.005), k=10)
            theta0 = problem.initial_point
            theta1, _ = fosi_update_step(theta0, problem.gradient(theta0), state)
            V = state.spectrum.v_hat
            assert np.linalg.norm(V.T @ problem.gradient(theta1)) <= 1e-8

    def test_branches_are_orthogonal(self, small_spectrum_quadratic, rng):
        problem = small_spectrum_quadratic
        state = exact_state(problem, Adam(0.01), k=4, l=2)
        V = state.spectrum.v_hat
        theta = problem.initial_point
        for _ in range(5):
            g = problem.gradient(theta)
            g1 = V @ (V.T @ g)
            g2 = g - g1
            assert abs(g1 @ g2) <= 1e-8 * (g @ g)
            theta_new, state = fosi_update_step(theta, g, state)
            d = theta_new - theta
            d1 = V @ (V.T @ d)
            d2 = d - d1
            assert abs(d1 @ d2) <= 1e-8 * np.linalg.norm(d1) * np.linalg.norm(d2)
            assert np.linalg.norm(V.T @ d2) <= 1e-10 * max(np.linalg.norm(d2), 1e-300)
            theta = theta_new

    def test_step_matches_effective_preconditioner(self, small_spectrum_quadratic):
        problem = small_spectrum_quadratic
        state = exact_state(problem, GradientDescent(0.02), k=3, alpha=0.5)
        fosi = FosiOptimizer(state.base, FosiConfig(k=3, alpha=0.5))
        theta = problem.initial_point
        g = problem.gradient(theta)
        P_inv = fosi.effective_inverse_preconditioner(state, g)
        theta1, _ = fosi_update_step(theta, g, state)
        np.testing.assert_allclose(theta1 - theta, -P_inv @ g, atol=1e-12)

    def test_hb_momentum_is_consistent_across_branches(self, small_spectrum_quadratic):
        problem = small_spectrum_quadratic
        base = HeavyBall(0.01, beta=0.9)
        state = exact_state(problem, base, k=5)
        V = state.spectrum.v_hat
        theta = problem.initial_point
        for _ in range(8):
            theta, state = fosi_update_step(theta, problem.gradient(theta), state)
            g_bar = state.momentum
            g_bar1 = V @ (V.T @ g_bar)
            np.testing.assert_allclose(g_bar1 + base.buffer, g_bar, atol=1e-10)

    def test_non_finite_gradient_names_branch(self, rotated_quadratic):
        state = exact_state(rotated_quadratic, GradientDescent(0.1), k=1)
        with pytest.raises(NonFiniteError) as excinfo:
            fosi_update_step(np.zeros(2), np.array([np.nan, 1.0]), state)
        assert excinfo.value.where == "gradient"

    def test_steps_go_through_the_module_function(self):
        assert not hasattr(FosiOptimizer, "update_step")


class TestLearningRateScaling:

    def spectrum(self, lam_hat, k, l, ritz_min=0.0):
        lam_hat = np.asarray(lam_hat, dtype=float)
        n = lam_hat.size
        return SpectrumEstimate(lam_hat=lam_hat, v_hat=np.eye(n), u=1.0 / np.abs(lam_hat),
                                k=k, l=l, ritz_min=ritz_min, ritz_max=float(lam_hat[0]))

    def test_clip_of_one_disables_scaling(self):
        estimate = self.spectrum([10.0, 0.1, 0.01], k=2, l=1)
        assert scale_learning_rate(0.05, OptimalLrForm.GD, estimate, c=1.0) == 0.05

    def test_gd_ratio(self):
        estimate = self.spectrum([10.0, 0.1, 0.01], k=2, l=1)
        eta2 = scale_learning_rate(1e-3, OptimalLrForm.GD, estimate, c=math.inf)
        assert eta2 / 1e-3 == pytest.approx(10.01 / 0.11)
        assert eta2 / 1e-3 == pytest.approx(91.0, rel=1e-3)

    def test_clip_caps_ratio(self):
        estimate = self.spectrum([10.0, 0.1, 0.01], k=2, l=1)
        assert scale_learning_rate(1e-3, OptimalLrForm.GD, estimate, c=3.0) == pytest.approx(3e-3)

    def test_hb_degenerate_head(self):
        estimate = self.spectrum([5.0], k=1, l=0, ritz_min=0.5)
        assert scale_learning_rate(0.2, OptimalLrForm.HB, estimate, c=math.inf) == pytest.approx(0.2)

    def test_never_below_base_rate(self):
        estimate = self.spectrum([1.0, 0.9, 0.8], k=3, l=0, ritz_min=0.5)
        assert scale_learning_rate(0.1, OptimalLrForm.GD, estimate, c=math.inf) >= 0.1

    def test_nonpositive_estimates_fall_back(self):
        estimate = self.spectrum([-1.0, -2.0], k=2, l=0, ritz_min=-3.0)
        scaling = compute_learning_rate_scaling(0.1, OptimalLrForm.GD, estimate, c=math.inf)
        assert scaling.fallback
        assert scaling.eta2 == 0.1

    def test_adam_is_never_scaled(self):
        estimate = self.spectrum([10.0, 0.1], k=2, l=0, ritz_min=0.01)
        assert scale_learning_rate(0.05, OptimalLrForm.NONE, estimate, c=math.inf) == 0.05

    def test_lambda_min_proxy_is_flagged(self):
        estimate = self.spectrum([10.0, 1.0], k=2, l=0, ritz_min=-0.01)
        scaling = compute_learning_rate_scaling(0.01, OptimalLrForm.GD, estimate, c=math.inf)
        assert any("Ritz" in note for note in scaling.notes)
        assert any("clipped" in note for note in scaling.notes)
        assert scaling.eta2 == pytest.approx(0.01 * 10.0 / 1.0)


class TestIntervals:

    @pytest.mark.parametrize("m,rho,expected", [(40, 1.1, 800), (40, 2.0, 80), (10, 1.05, 400)])
    def test_heuristic(self, m, rho, expected):
        assert interval_T_heuristic(m, rho) == expected

    def test_heuristic_requires_rho_above_one(self):
        with pytest.raises(InvalidArgumentsError):
            interval_T_heuristic(40, 1.0)

    def test_measured(self):
        assert interval_T_measured(1.0, 1.0, 80.0, 1.1) == 800

    def test_measured_unattainable(self):
        with pytest.raises(OverheadTargetError, match="unattainable"):
            interval_T_measured(1.0, 1.1, 80.0, 1.1)

    def test_measured_zero_ese_cost(self):
        assert interval_T_measured(1.0, 1.0, 0.0, 1.5) == 1

    def test_measure_overhead_timings(self, small_spectrum_quadratic):
        base = GradientDescent(0.01)
        timings = measure_overhead_timings(small_spectrum_quadratic, small_spectrum_quadratic.initial_point,
                                           FosiConfig(k=2), base, timing_iterations=3)
        assert timings.tau1 > 0 and timings.tau2 > 0 and timings.tau3 > 0
        assert base.iteration == 0


class TestFosiOptimize:

    @pytest.mark.parametrize("kind", ["gd", "hb", "adam"])
    def test_warmup_covering_run_matches_base(self, kind):
        make = {"gd": lambda: GradientDescent(0.004), "hb": lambda: HeavyBall(0.004, 0.9),
                "adam": lambda: Adam(0.01)}[kind]
        stop = StoppingRule(max_iterations=60)
        for seed in range(5):
            problem = gen_spectrum_quadratic(40, 200.0, seed=seed)
            fosi = fosi_optimize(problem, problem.initial_point, FosiConfig(k=5, W=60), make(), stop)
            plain = base_optimize(problem, problem.initial_point, make(), stop)
            assert fosi.ese_iterations == []
            assert trace_without_timing(fosi).equals(trace_without_timing(plain))

    def test_refresh_schedule(self, small_spectrum_quadratic):
        cfg = FosiConfig(k=3, T=7, W=5)
        trace = fosi_optimize(small_spectrum_quadratic, small_spectrum_quadratic.initial_point, cfg,
                              GradientDescent(0.01), StoppingRule(max_iterations=30))
        assert trace.ese_iterations == [5, 12, 19, 26]
        assert [row["iteration"] for row in trace.rows] == list(range(31))

    def test_scaled_rate_recorded(self, small_spectrum_quadratic):
        trace = fosi_optimize(small_spectrum_quadratic, small_spectrum_quadratic.initial_point,
                              FosiConfig(k=3, T=100), GradientDescent(0.01), StoppingRule(max_iterations=5))
        assert trace.rows[0]["eta_effective"] > 0.01
        assert any("Ritz" in note for note in trace.notes)

    def test_beats_gd_on_ill_conditioned_quadratic(self):
        problem = gen_spectrum_quadratic(100, 200.0, seed=1)
        lr = 2.0 / (problem.spectrum[0] + problem.spectrum[-1])
        stop = StoppingRule(max_iterations=200)
        fosi = fosi_optimize(problem, problem.initial_point, FosiConfig(k=10), GradientDescent(lr), stop)
        plain = base_optimize(problem, problem.initial_point, GradientDescent(lr), stop)
        assert fosi.status == plain.status == "completed"
        assert fosi.final_f < 0.1 * plain.final_f

    def test_on_step_hook(self, small_spectrum_quadratic):
        seen = []
        fosi_optimize(small_spectrum_quadratic, small_spectrum_quadratic.initial_point, FosiConfig(k=2, T=4),
                      HeavyBall(0.01), StoppingRule(max_iterations=10),
                      on_step=lambda t, state, theta: seen.append((t, state.t)))
        assert seen == [(t, t + 1) for t in range(10)]

    def test_divergence_is_flagged(self):
        problem = QuadraticProblem.from_matrix(np.diag([2.0, 1.0]), theta0=[1.0, 1.0])
        trace = base_optimize(problem, problem.initial_point, GradientDescent(1.5), StoppingRule(max_iterations=100))
        assert trace.status == STATUS_DIVERGED
        assert len(trace) < 100
        assert trace.divergence_index() == len(trace) - 1

    def test_ese_failure_keeps_partial_trace(self):
        problem = QuadraticProblem.from_matrix(np.diag(np.repeat([2.0, 1.0], 5)))
        trace = fosi_optimize(problem, problem.initial_point, FosiConfig(k=3, W=2, T=5),
                              GradientDescent(0.1), StoppingRule(max_iterations=20))
        assert trace.status == STATUS_ESE_FAILED
        assert len(trace) == 2
        assert "Krylov" in trace.message

    def test_gradient_tolerance(self):
        problem = QuadraticProblem.from_matrix(np.eye(2), theta0=[1.0, -2.0])
        trace = base_optimize(problem, problem.initial_point, GradientDescent(1.0),
                              StoppingRule(max_iterations=60, grad_tol=1e-12))
        assert trace.status == STATUS_CONVERGED
        assert trace.final_f <= 1e-20
        assert len(trace) == 2

    def test_block_larger_than_dimension(self, rotated_quadratic):
        with pytest.raises(InvalidArgumentsError):
            fosi_optimize(rotated_quadratic, rotated_quadratic.initial_point, FosiConfig(k=2, l=1),
                          GradientDescent(0.1), StoppingRule(max_iterations=3))


class TestStochastic:

    def test_default_alpha(self):
        assert FosiOptimizer(GradientDescent(0.1), FosiConfig(), stochastic=True).alpha == 0.01
        assert FosiOptimizer(GradientDescent(0.1), FosiConfig(), stochastic=False).alpha == 1.0

    def test_epoch_warmup_needs_schedule(self):
        fosi = FosiOptimizer(GradientDescent(0.1), FosiConfig(W="epoch"))
        with pytest.raises(InvalidArgumentsError):
            fosi.resolve_warmup(10, None)

    def test_logistic_run_with_dedicated_ese_batch(self, small_logistic):
        schedule = BatchSchedule(small_logistic.dataset_size, 50, seed=0, ese_batch_size=150)
        cfg = FosiConfig(k=3, T=6, W="epoch", c=3.0)
        trace = fosi_optimize(small_logistic, small_logistic.initial_point, cfg, HeavyBall(0.5, 0.9),
                              StoppingRule(epochs=4), schedule=schedule)
        assert trace.status == "completed"
        assert len(trace) == 4 * schedule.steps_per_epoch + 1
        assert trace.ese_iterations == [6, 12, 18]
        assert trace.final_f < trace.rows[0]["f_value"]

    def test_same_batch_seed_reproduces_trace(self, small_logistic):
        def run():
            schedule = BatchSchedule(small_logistic.dataset_size, 30, seed=5)
            return fosi_optimize(small_logistic, small_logistic.initial_point, FosiConfig(k=2, T=5),
                                 HeavyBall(0.3), StoppingRule(max_iterations=25),
                                 schedule=schedule)
        assert trace_without_timing(run()).equals(trace_without_timing(run()))

    def test_logistic_dataset_size(self):
        assert gen_logistic(m=20, d=3, seed=0).dataset_size == 20
