"""
Shared fixtures for the FOSI optimizer lab test suite
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.problem_generator import gen_logistic, gen_spectrum_quadratic  # noqa: E402
from models.problem_models import QuadraticProblem  # noqa: E402


def assert_columns_match_up_to_sign(actual: np.ndarray, expected: np.ndarray, tol: float):
    """Every column of ``actual`` equals the matching column of ``expected`` up to sign"""
    assert actual.shape == expected.shape
    for j in range(expected.shape[1]):
        a, e = actual[:, j], expected[:, j]
        err = min(np.linalg.norm(a - e), np.linalg.norm(a + e))
        assert err <= tol, f"column {j}: error {err:.3e} exceeds {tol:.1e}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rotated_quadratic():
    """H = [[2.5, 1.5], [1.5, 2.5]]: eigenvalues 4 and 1, eigenvectors (1, 1)/sqrt2 and (1, -1)/sqrt2"""
    return QuadraticProblem.from_matrix([[2.5, 1.5], [1.5, 2.5]], theta0=[1.0, 0.0], name="rotated2")


@pytest.fixture
def small_spectrum_quadratic():
    return gen_spectrum_quadratic(50, 20.0, seed=7)


@pytest.fixture
def small_logistic():
    return gen_logistic(m=300, d=15, seed=11, reg=1e-3)


@pytest.fixture
def results_dir(tmp_path):
    path = tmp_path / "results"
    path.mkdir()
    return path
