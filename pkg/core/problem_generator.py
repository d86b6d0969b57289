#!/usr/bin/env python3
"""
Problem generator for the FOSI optimizer lab
Quadratic benchmark families with known spectra, logistic regression tasks and
the family registry used by experiment specs
"""

import csv
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from core.exceptions import DatasetFormatError, InvalidArgumentsError
from models.objective import ObjectiveProblem
from models.problem_models import LogisticProblem, QuadraticProblem, sigmoid

logger = logging.getLogger(__name__)

FBZETA_DIM = 100


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix"""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def random_spd_matrix(n: int, seed: int, low: float = 0.1,
                      high: float = 10.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Symmetric PD matrix with distinct eigenvalues drawn from U(low, high)

    Returns (H, eigenvalues descending, eigenvectors).
    """
    if n < 1 or not 0 < low < high:
        raise InvalidArgumentsError(f"Invalid SPD request n={n}, range=({low}, {high})")
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.uniform(low, high, size=n))[::-1]
    V = random_orthogonal(n, rng)
    H = (V * lam) @ V.T
    return 0.5 * (H + H.T), lam, V


def _eigen_start(basis: np.ndarray, weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unit-norm point whose eigen-coordinates are the weights with seeded random signs"""
    signs = rng.choice(np.array([-1.0, 1.0]), size=weights.size)
    coords = signs * weights
    return basis @ (coords / np.linalg.norm(coords))


def gen_spectrum_quadratic(n: int, lam1: float, seed: int) -> QuadraticProblem:
    """
    Quadratic with spectrum (lam1, 1.5^0, 1.5^-1, ..., 1.5^-(n-2))

    The eigenbasis comes from a seeded symmetric matrix with U(0, 1) entries.
    theta_0 has unit norm and equal weight 1/sqrt(n) on every eigenvector, with
    seeded random signs, so no part of the spectrum starts out favoured.
    """
    if n < 2:
        raise InvalidArgumentsError(f"n must be at least 2, got {n}")
    if not lam1 > 1:
        raise InvalidArgumentsError(f"lam1 must exceed 1, got {lam1}")

    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(n, n))
    _, basis = np.linalg.eigh(0.5 * (A + A.T))
    basis = basis[:, ::-1]

    lam = np.empty(n)
    lam[0] = lam1
    lam[1:] = 1.5 ** -np.arange(n - 1, dtype=np.float64)

    theta0 = _eigen_start(basis, np.ones(n), rng)
    return QuadraticProblem(lam, basis, theta0, name=f"spectrum(n={n},lam1={lam1:g})")


def gen_fbzeta_quadratic(b: float, zeta: int, seed: int, n: int = FBZETA_DIM) -> QuadraticProblem:
    """
    Quadratic with spectrum {0.001 b^i : i = 1..n}, diagonal except for a zeta x zeta
    block with a random orthogonal eigenbasis

    The block covers the consecutive indices starting at ceil((n - zeta) / 2). The
    starting point is R theta_base with R the eigenbasis, so f(theta_0) does not
    depend on zeta.
    """
    if not 1.1 <= b <= 1.17:
        raise InvalidArgumentsError(f"b must be in [1.1, 1.17], got {b}")
    if not 0 <= zeta <= n:
        raise InvalidArgumentsError(f"zeta must be in [0, {n}], got {zeta}")

    rng = np.random.default_rng(seed)
    theta_base = rng.standard_normal(n)

    lam = 0.001 * b ** np.arange(1, n + 1, dtype=np.float64)
    R = np.eye(n)
    if zeta > 0:
        start = math.ceil((n - zeta) / 2)
        block = slice(start, start + zeta)
        R[block, block] = random_orthogonal(zeta, rng)

    return QuadraticProblem(lam, R, R @ theta_base, name=f"fbzeta(b={b:g},zeta={zeta})")


def gen_two_cluster_quadratic(seed: int, n: int = 100) -> QuadraticProblem:
    """
    Quadratic whose 10 largest eigenvalues are equally spaced in [9, 10] and the
    remaining ones equally spaced in [0.01, 0.1], with a random orthonormal basis

    theta_0 has unit norm and eigen-coordinates proportional to the eigenvalues,
    with seeded random signs, so the initial error sits in the high-curvature
    cluster.
    """
    if n < 11:
        raise InvalidArgumentsError(f"n must be at least 11, got {n}")
    rng = np.random.default_rng(seed)
    lam = np.r_[np.linspace(10.0, 9.0, 10), np.linspace(0.1, 0.01, n - 10)]
    basis = random_orthogonal(n, rng)
    theta0 = _eigen_start(basis, lam, rng)
    return QuadraticProblem(lam, basis, theta0, name=f"two_cluster(n={n})")


def gen_explicit_quadratic(matrix, theta0=None) -> QuadraticProblem:
    """Quadratic from an explicit symmetric matrix"""
    return QuadraticProblem.from_matrix(matrix, theta0)


def gen_logistic(m: Optional[int] = None, d: Optional[int] = None, seed: int = 0,
                 path: Optional[Union[str, Path]] = None, reg: float = 0.0,
                 feature_decay: float = 1.0, signal: Optional[float] = None) -> LogisticProblem:
    """
    Binary logistic regression, synthetic or loaded from CSV

    Synthetic mode draws theta*, then X with column j scaled to standard deviation
    feature_decay^(j/2), then y ~ Bernoulli(sigmoid(X theta*)). By default theta* ~ N(0, I/d).
    With ``signal`` set, theta*_j = +-signal / scale_j, so every column carries the same
    share of the logit and the Hessian spectrum decays geometrically with feature_decay.
    """
    if path is not None:
        return load_logistic_csv(path, reg=reg)
    if m is None or d is None or m < 1 or d < 1:
        raise InvalidArgumentsError(f"Synthetic logistic data needs m, d >= 1, got m={m}, d={d}")
    if not 0.0 < feature_decay <= 1.0:
        raise InvalidArgumentsError(f"feature_decay must be in (0, 1], got {feature_decay}")
    if signal is not None and not signal > 0:
        raise InvalidArgumentsError(f"signal must be positive, got {signal}")

    rng = np.random.default_rng(seed)
    scales = feature_decay ** (np.arange(d, dtype=np.float64) / 2.0)
    if signal is None:
        theta_star = rng.standard_normal(d) / math.sqrt(d)
    else:
        theta_star = signal * rng.choice(np.array([-1.0, 1.0]), size=d) / scales
    X = rng.standard_normal((m, d)) * scales
    y = (rng.uniform(size=m) < sigmoid(X @ theta_star)).astype(np.float64)
    return LogisticProblem(X, y, reg=reg, name=f"logistic(m={m},d={d})")


def load_logistic_csv(path: Union[str, Path], reg: float = 0.0) -> LogisticProblem:
    """Load a header + d feature columns + 0/1 label column CSV file"""
    path = Path(path)
    rows, labels = [], []
    width = None
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise DatasetFormatError(f"{path}: empty file", line_number=1)
            width = len(header)
            if width < 2:
                raise DatasetFormatError(f"{path}: need at least one feature and a label column", line_number=1)

            for line_number, record in enumerate(reader, start=2):
                if not record:
                    continue
                if len(record) != width:
                    raise DatasetFormatError(
                        f"{path}:{line_number}: expected {width} columns, got {len(record)}",
                        line_number=line_number)
                try:
                    features = [float(value) for value in record[:-1]]
                except ValueError as e:
                    raise DatasetFormatError(f"{path}:{line_number}: {e}", line_number=line_number) from e
                label = record[-1].strip()
                if label not in ("0", "1"):
                    raise DatasetFormatError(
                        f"{path}:{line_number}: label must be 0 or 1, got '{label}'",
                        line_number=line_number)
                rows.append(features)
                labels.append(float(label))
    except OSError as e:
        raise DatasetFormatError(f"Cannot read dataset {path}: {e}") from e

    if not rows:
        raise DatasetFormatError(f"{path}: no data rows", line_number=2)
    logger.info(f"Loaded {len(rows)} samples with {width - 1} features from {path}")
    return LogisticProblem(np.array(rows), np.array(labels), reg=reg, name=path.stem)


class ProblemModelManager:
    """Registry of problem families available to experiment specs"""

    def __init__(self):
        self.families: Dict[str, Callable[..., ObjectiveProblem]] = {
            "spectrum": self._build_spectrum,
            "fbzeta": self._build_fbzeta,
            "two_cluster": self._build_two_cluster,
            "explicit": self._build_explicit,
            "logistic": self._build_logistic,
            "logistic_csv": self._build_logistic_csv,
        }
        self.logger = logging.getLogger(__name__)

    def get_family(self, family: str) -> Optional[Callable[..., ObjectiveProblem]]:
        """Get builder by family name"""
        return self.families.get(family)

    def get_all_families(self) -> Dict[str, Callable[..., ObjectiveProblem]]:
        return self.families.copy()

    def build(self, family: str, params: Dict[str, Any], seed: int = 0) -> ObjectiveProblem:
        builder = self.get_family(family)
        if builder is None:
            raise InvalidArgumentsError(
                f"Unknown problem family '{family}'. Available: {sorted(self.families)}")
        try:
            problem = builder(seed=seed, **params)
        except TypeError as e:
            raise InvalidArgumentsError(f"Bad parameters for family '{family}': {e}") from e
        self.logger.info(f"Built problem {problem.describe()}")
        return problem

    @staticmethod
    def _build_spectrum(seed: int, n: int, lam1: float) -> ObjectiveProblem:
        return gen_spectrum_quadratic(n, lam1, seed)

    @staticmethod
    def _build_fbzeta(seed: int, b: float, zeta: int) -> ObjectiveProblem:
        return gen_fbzeta_quadratic(b, zeta, seed)

    @staticmethod
    def _build_two_cluster(seed: int, n: int = 100) -> ObjectiveProblem:
        return gen_two_cluster_quadratic(seed, n=n)

    @staticmethod
    def _build_explicit(seed: int, matrix, theta0=None) -> ObjectiveProblem:
        return gen_explicit_quadratic(matrix, theta0)

    @staticmethod
    def _build_logistic(seed: int, m: int, d: int, reg: float = 0.0, feature_decay: float = 1.0,
                        signal: Optional[float] = None) -> ObjectiveProblem:
        return gen_logistic(m, d, seed, reg=reg, feature_decay=feature_decay, signal=signal)

    @staticmethod
    def _build_logistic_csv(seed: int, path: str, reg: float = 0.0) -> ObjectiveProblem:
        return load_logistic_csv(path, reg=reg)
