#!/usr/bin/env python3
"""
Problem models for the FOSI optimizer lab
Quadratic objectives with a known eigendecomposition and binary logistic regression
"""

from typing import Optional, Sequence

import numpy as np

from core.exceptions import InvalidArgumentsError
from models.objective import ObjectiveProblem


def _as_vector(x, n: int, label: str) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if arr.shape != (n,):
        raise InvalidArgumentsError(f"{label} must have shape ({n},), got {arr.shape}")
    return arr


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function"""
    return np.exp(-np.logaddexp(0.0, -z))


class QuadraticProblem(ObjectiveProblem):
    """f(theta) = 0.5 theta^T H theta with H = V diag(lam) V^T stored in factored form

    Eigenvalues are kept sorted descending with eigenvector columns aligned.
    """

    def __init__(self, eigenvalues: np.ndarray, eigenvectors: np.ndarray,
                 theta0: np.ndarray, name: str = "quadratic"):
        super().__init__()
        lam = np.asarray(eigenvalues, dtype=np.float64)
        basis = np.asarray(eigenvectors, dtype=np.float64)
        if lam.ndim != 1 or basis.shape != (lam.size, lam.size):
            raise InvalidArgumentsError(
                f"Eigenvector matrix shape {basis.shape} does not match {lam.size} eigenvalues")

        order = np.argsort(-lam, kind="stable")
        self._lam = lam[order]
        self._basis = basis[:, order]
        self._theta0 = _as_vector(theta0, lam.size, "theta0")
        self._name = name
        self._matrix: Optional[np.ndarray] = None

        self._lam.setflags(write=False)
        self._basis.setflags(write=False)
        self._theta0.setflags(write=False)

    @classmethod
    def from_matrix(cls, matrix, theta0=None, name: str = "explicit") -> "QuadraticProblem":
        """Build from an explicit symmetric matrix"""
        H = np.asarray(matrix, dtype=np.float64)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise InvalidArgumentsError(f"Hessian must be square, got shape {H.shape}")
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(H).max(initial=0.0))):
            raise InvalidArgumentsError("Hessian must be symmetric")
        lam, basis = np.linalg.eigh(H)
        if theta0 is None:
            theta0 = np.ones(H.shape[0])
        problem = cls(lam, basis, theta0, name=name)
        problem._matrix = H.copy()
        problem._matrix.setflags(write=False)
        return problem

    @property
    def name(self) -> str:
        return self._name

    @property
    def n(self) -> int:
        return self._lam.size

    @property
    def initial_point(self) -> np.ndarray:
        return self._theta0.copy()

    @property
    def spectrum(self) -> np.ndarray:
        """Eigenvalues, largest first"""
        return self._lam

    @property
    def eigenbasis(self) -> np.ndarray:
        """Orthonormal eigenvectors as columns, aligned with ``spectrum``"""
        return self._basis

    def hessian(self) -> np.ndarray:
        """Dense H; intended for analysis at desk-scale dimensions"""
        if self._matrix is not None:
            return self._matrix.copy()
        H = (self._basis * self._lam) @ self._basis.T
        return 0.5 * (H + H.T)

    def _apply(self, v: np.ndarray) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix @ v
        return self._basis @ (self._lam * (self._basis.T @ v))

    def value(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        return float(0.5 * theta @ self._apply(theta))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self._apply(np.asarray(theta, dtype=np.float64))

    def hvp(self, theta: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self._apply(np.asarray(v, dtype=np.float64))


class LogisticProblem(ObjectiveProblem):
    """Mean binary cross-entropy of a linear model with optional L2 term

    f(theta) = mean(log(1 + exp(x_i theta)) - y_i x_i theta) + 0.5 reg |theta|^2
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, reg: float = 0.0,
                 theta0: Optional[np.ndarray] = None, name: str = "logistic"):
        super().__init__()
        # private copies: the read-only flag must not leak to the caller's arrays
        X = np.array(X, dtype=np.float64)
        y = np.array(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidArgumentsError(f"Feature matrix must be m x d with m, d >= 1, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidArgumentsError(f"Labels must have shape ({X.shape[0]},), got {y.shape}")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise InvalidArgumentsError("Labels must be 0 or 1")
        if reg < 0:
            raise InvalidArgumentsError(f"L2 weight must be nonnegative, got {reg}")

        self._X = X
        self._y = y
        self._reg = float(reg)
        self._theta0 = np.zeros(X.shape[1]) if theta0 is None else _as_vector(theta0, X.shape[1], "theta0")
        self._name = name

        for arr in (self._X, self._y, self._theta0):
            arr.setflags(write=False)

    @property
    def name(self) -> str:
        return self._name

    @property
    def n(self) -> int:
        return self._X.shape[1]

    @property
    def initial_point(self) -> np.ndarray:
        return self._theta0.copy()

    @property
    def dataset_size(self) -> int:
        return self._X.shape[0]

    @property
    def features(self) -> np.ndarray:
        return self._X

    @property
    def labels(self) -> np.ndarray:
        return self._y

    @property
    def reg(self) -> float:
        return self._reg

    def with_batch(self, indices: Sequence[int]) -> "LogisticProblem":
        idx = np.asarray(indices, dtype=np.intp)
        return LogisticProblem(self._X[idx], self._y[idx], self._reg,
                               theta0=self._theta0, name=self._name)

    def value(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        z = self._X @ theta
        loss = np.mean(np.logaddexp(0.0, z) - self._y * z)
        return float(loss + 0.5 * self._reg * (theta @ theta))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        residual = sigmoid(self._X @ theta) - self._y
        return self._X.T @ residual / self._X.shape[0] + self._reg * theta

    def hvp(self, theta: np.ndarray, v: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        s = sigmoid(self._X @ theta)
        weights = s * (1.0 - s)
        return self._X.T @ (weights * (self._X @ v)) / self._X.shape[0] + self._reg * v
