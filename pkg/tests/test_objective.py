"""
Tests for the objective abstraction, batch sampling and the derivative checker
"""

import numpy as np
import pytest

from core.derivative_checker import check_derivatives
from core.exceptions import InvalidArgumentsError
from core.problem_generator import (
    gen_fbzeta_quadratic,
    gen_logistic,
    gen_spectrum_quadratic,
    gen_two_cluster_quadratic,
)
from models.objective import BatchSchedule
from models.problem_models import LogisticProblem, QuadraticProblem


class TestQuadraticProblem:

    def test_rotated_quadratic_gradient_and_hvp(self, rotated_quadratic):
        theta = np.array([1.0, 0.0])
        np.testing.assert_allclose(rotated_quadratic.gradient(theta), [2.5, 1.5], atol=1e-12)
        np.testing.assert_allclose(rotated_quadratic.hvp(theta, [1.0, 0.0]), [2.5, 1.5], atol=1e-12)
        assert rotated_quadratic.value(theta) == pytest.approx(1.25)

    def test_spectrum_sorted_descending(self, rotated_quadratic):
        np.testing.assert_allclose(rotated_quadratic.spectrum, [4.0, 1.0], atol=1e-12)

    def test_factored_and_dense_forms_agree(self, small_spectrum_quadratic, rng):
        H = small_spectrum_quadratic.hessian()
        v = rng.standard_normal(small_spectrum_quadratic.n)
        np.testing.assert_allclose(small_spectrum_quadratic.hvp(np.zeros(50), v), H @ v, atol=1e-10)

    def test_arrays_are_read_only(self, small_spectrum_quadratic):
        with pytest.raises(ValueError):
            small_spectrum_quadratic.spectrum[0] = 0.0

    def test_initial_point_is_a_copy(self, rotated_quadratic):
        theta0 = rotated_quadratic.initial_point
        theta0[0] = 99.0
        assert rotated_quadratic.initial_point[0] == 1.0

    def test_caller_arrays_stay_writable(self):
        lam = np.array([1.0, 2.0])
        theta0 = np.array([1.0, 1.0])
        problem = QuadraticProblem(lam, np.eye(2), theta0)
        theta0[0] = 7.0
        assert theta0.flags.writeable
        assert problem.initial_point[0] == 1.0

    def test_rejects_asymmetric_matrix(self):
        with pytest.raises(InvalidArgumentsError):
            QuadraticProblem.from_matrix([[1.0, 2.0], [0.0, 1.0]])

    def test_has_no_batch_mode(self, rotated_quadratic):
        assert rotated_quadratic.dataset_size is None
        with pytest.raises(InvalidArgumentsError):
            rotated_quadratic.with_batch([0])


class TestLogisticProblem:

    def test_value_at_zero_is_log_two(self, small_logistic):
        assert small_logistic.value(np.zeros(small_logistic.n)) == pytest.approx(np.log(2.0))

    def test_rejects_non_binary_labels(self):
        with pytest.raises(InvalidArgumentsError):
            LogisticProblem(np.ones((3, 2)), np.array([0.0, 1.0, 2.0]))

    def test_rejects_negative_regularization(self):
        with pytest.raises(InvalidArgumentsError):
            LogisticProblem(np.ones((2, 2)), np.array([0.0, 1.0]), reg=-1.0)

    def test_with_batch_restricts_samples(self, small_logistic):
        batch = small_logistic.with_batch([0, 5, 7])
        assert batch.dataset_size == 3
        np.testing.assert_array_equal(batch.features, small_logistic.features[[0, 5, 7]])

    def test_full_batch_matches_problem(self, small_logistic, rng):
        theta = rng.standard_normal(small_logistic.n)
        batch = small_logistic.with_batch(np.arange(small_logistic.dataset_size))
        np.testing.assert_allclose(batch.gradient(theta), small_logistic.gradient(theta), atol=1e-14)

    def test_caller_arrays_stay_writable(self):
        X = np.ones((3, 2))
        y = np.array([0.0, 1.0, 1.0])
        theta0 = np.zeros(2)
        problem = LogisticProblem(X, y, theta0=theta0)
        X[0, 0] = 5.0
        y[0] = 1.0
        theta0[0] = 2.0
        assert problem.features[0, 0] == 1.0
        assert problem.labels[0] == 0.0
        assert problem.initial_point[0] == 0.0
        with pytest.raises(ValueError):
            problem.features[0, 0] = 3.0

    def test_extreme_margins_stay_finite(self):
        problem = LogisticProblem(np.array([[1000.0], [-1000.0]]), np.array([0.0, 1.0]))
        theta = np.array([5.0])
        assert np.isfinite(problem.value(theta))
        assert np.all(np.isfinite(problem.gradient(theta)))


class TestBatchSchedule:

    def test_same_seed_same_sequence(self):
        first = BatchSchedule(500, 32, seed=42)
        second = BatchSchedule(500, 32, seed=42)
        for _ in range(1000):
            np.testing.assert_array_equal(first.next_batch(), second.next_batch())

    def test_batches_are_distinct_and_in_range(self):
        schedule = BatchSchedule(100, 40, seed=3)
        for _ in range(50):
            batch = schedule.next_batch()
            assert batch.size == 40
            assert np.unique(batch).size == 40
            assert batch.min() >= 0 and batch.max() < 100

    def test_ese_stream_does_not_shift_training_batches(self):
        plain = BatchSchedule(200, 20, seed=9)
        with_ese = BatchSchedule(200, 20, seed=9, ese_batch_size=100)
        for step in range(20):
            if step % 5 == 0:
                assert with_ese.next_ese_batch().size == 100
            np.testing.assert_array_equal(plain.next_batch(), with_ese.next_batch())

    def test_no_ese_batch_means_reuse(self):
        assert BatchSchedule(10, 2, seed=0).next_ese_batch() is None

    def test_steps_per_epoch_rounds_up(self):
        assert BatchSchedule(2000, 200, seed=0).steps_per_epoch == 10
        assert BatchSchedule(2001, 200, seed=0).steps_per_epoch == 11

    @pytest.mark.parametrize("dataset_size,batch_size,ese", [(10, 0, None), (10, 11, None), (10, 2, 11)])
    def test_invalid_sizes(self, dataset_size, batch_size, ese):
        with pytest.raises(InvalidArgumentsError):
            BatchSchedule(dataset_size, batch_size, seed=0, ese_batch_size=ese)


class TestCheckDerivatives:

    def test_rotated_quadratic_is_exact(self, rotated_quadratic):
        report = check_derivatives(rotated_quadratic, np.array([1.0, 0.0]), trials=5)
        assert report.passed
        assert report.gradient_error <= 1e-10
        assert report.hvp_error <= 1e-10
        assert report.symmetry_error <= 1e-10
        assert report.linearity_error <= 1e-10

    def test_zero_function_has_zero_errors(self):
        problem = QuadraticProblem.from_matrix(np.zeros((3, 3)))
        report = check_derivatives(problem, np.array([0.3, -1.0, 2.0]), trials=4)
        assert report.gradient_error == 0.0
        assert report.hvp_error == 0.0
        assert report.symmetry_error == 0.0
        assert report.linearity_error == 0.0

    def test_small_logistic_dataset(self, rng):
        X = rng.standard_normal((10, 3))
        y = np.array([0, 1, 1, 0, 1, 0, 0, 1, 1, 0], dtype=float)
        problem = LogisticProblem(X, y)
        report = check_derivatives(problem, rng.standard_normal(3), trials=10, seed=1)
        assert report.gradient_error <= 1e-6
        assert report.hvp_error <= 1e-6
        assert report.passed

    @pytest.mark.parametrize("build", [
        lambda: gen_spectrum_quadratic(60, 200.0, seed=0),
        lambda: gen_fbzeta_quadratic(1.12, 50, seed=0),
        lambda: gen_two_cluster_quadratic(seed=0),
        lambda: gen_logistic(m=200, d=12, seed=0, reg=0.01),
    ])
    def test_every_shipped_problem_passes(self, build):
        problem = build()
        theta = np.random.default_rng(5).standard_normal(problem.n) / np.sqrt(problem.n)
        report = check_derivatives(problem, theta, trials=5, seed=2)
        assert report.passed, report.to_dict()

    def test_non_finite_input_is_reported(self, rotated_quadratic):
        report = check_derivatives(rotated_quadratic, np.array([np.nan, 0.0]))
        assert not report.passed
        assert "nan" in report.failures[0]

    def test_trials_must_be_positive(self, rotated_quadratic):
        with pytest.raises(InvalidArgumentsError):
            check_derivatives(rotated_quadratic, np.zeros(2), trials=0)
