#!/usr/bin/env python3
"""
Spectral estimation for the FOSI optimizer lab
Lanczos with full reorthogonalization, a symmetric tridiagonal eigensolver and
extreme spectrum estimation (ESE) of a Hessian through its vector product
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from core.exceptions import (
    ConvergenceError,
    InsufficientKrylovDimensionError,
    InvalidArgumentsError,
    LanczosError,
)
from models.objective import ObjectiveProblem
from utils.logger import log_performance

logger = logging.getLogger("spectral")

BREAKDOWN_TOL = 1e-12
EPS_DIV = 1e-8
REORTH_PASSES = 2


@dataclass
class LanczosFactorization:
    """Lanczos factorization U^T A U = T with T stored by its two diagonals"""

    basis: np.ndarray          # n x m, orthonormal columns
    alpha: np.ndarray          # diagonal of T, length m
    beta: np.ndarray           # off-diagonal of T, length m - 1
    breakdown: bool = False

    @property
    def m(self) -> int:
        return self.alpha.size

    def tridiagonal(self) -> np.ndarray:
        """Dense m x m copy of T"""
        return np.diag(self.alpha) + np.diag(self.beta, k=1) + np.diag(self.beta, k=-1)


@dataclass
class SpectrumEstimate:
    """k largest then l smallest eigenpair estimates

    ``lam_hat`` holds the top block (descending) followed by the bottom block
    (descending). ``ritz_min``/``ritz_max`` are the extreme Ritz values of the
    full tridiagonal and serve as free proxies for the ends of the spectrum.
    """

    lam_hat: np.ndarray
    v_hat: np.ndarray
    u: np.ndarray
    k: int
    l: int
    ritz_min: float = 0.0
    ritz_max: float = 0.0
    krylov_dim: int = 0
    breakdown: bool = False

    @classmethod
    def empty(cls, n: int, k: int, l: int) -> "SpectrumEstimate":
        """Placeholder used before the first ESE call: V = 0, u = 0"""
        return cls(
            lam_hat=np.zeros(k + l),
            v_hat=np.zeros((n, k + l)),
            u=np.zeros(k + l),
            k=k,
            l=l,
        )

    @classmethod
    def from_eigenpairs(cls, eigenvalues: np.ndarray, eigenvectors: np.ndarray,
                        k: int, l: int) -> "SpectrumEstimate":
        """Select exact extreme eigenpairs, e.g. from a dense decomposition"""
        lam = np.asarray(eigenvalues, dtype=np.float64)
        vecs = np.asarray(eigenvectors, dtype=np.float64)
        if k + l > lam.size:
            raise InvalidArgumentsError(f"k + l = {k + l} exceeds {lam.size} eigenpairs")
        order = np.argsort(-lam, kind="stable")
        lam, vecs = lam[order], vecs[:, order]
        idx = np.r_[np.arange(k), np.arange(lam.size - l, lam.size)].astype(np.intp)
        lam_hat = lam[idx]
        return cls(
            lam_hat=lam_hat,
            v_hat=vecs[:, idx],
            u=inverse_magnitudes(lam_hat),
            k=k,
            l=l,
            ritz_min=float(lam[-1]),
            ritz_max=float(lam[0]),
            krylov_dim=lam.size,
        )

    @property
    def is_empty(self) -> bool:
        return not np.any(self.u)

    @property
    def top(self) -> np.ndarray:
        return self.lam_hat[:self.k]

    @property
    def bottom(self) -> np.ndarray:
        return self.lam_hat[self.k:]

    def lambda_max(self) -> float:
        """Estimate of the largest eigenvalue"""
        if self.k > 0:
            return float(self.lam_hat[0])
        return self.ritz_max

    def lambda_min(self) -> float:
        """Estimate of the smallest eigenvalue (bottom block, or lowest Ritz value when l = 0)"""
        if self.l > 0:
            return float(self.lam_hat[-1])
        return self.ritz_min

    def head_edge(self) -> float:
        """Smallest of the top-k estimates, the available proxy for lambda_{k+1}"""
        if self.k > 0:
            return float(self.lam_hat[self.k - 1])
        return self.ritz_max

    def tail_edge(self) -> float:
        """Largest of the bottom-l estimates, the available proxy for lambda_{n-l}"""
        if self.l > 0:
            return float(self.lam_hat[self.k])
        return self.lambda_min()


def inverse_magnitudes(lam_hat: np.ndarray, eps_div: float = EPS_DIV) -> np.ndarray:
    """u = 1 / max(|lam|, eps_div)"""
    return 1.0 / np.maximum(np.abs(lam_hat), eps_div)


def heuristic_m(n: int, k: int, l: int) -> int:
    """Lanczos iteration count max(4(k + l), ceil(2 ln n)) clamped to n"""
    if n < 1 or k < 0 or l < 0 or k + l < 1:
        raise InvalidArgumentsError(f"Invalid dimensions n={n}, k={k}, l={l}")
    if k + l > n:
        raise InvalidArgumentsError(f"k + l = {k + l} exceeds the dimension n = {n}")
    return min(max(4 * (k + l), math.ceil(2.0 * math.log(n))), n)


def lanczos(apply_A: Callable[[np.ndarray], np.ndarray], n: int, m: int,
            seed: int) -> LanczosFactorization:
    """
    Run m Lanczos steps on a symmetric operator with full reorthogonalization

    The start vector is a normalized standard Gaussian draw from ``seed``. If the
    residual norm drops below BREAKDOWN_TOL before m steps, the factorization is
    truncated and flagged.
    """
    if not 1 <= m <= n:
        raise InvalidArgumentsError(f"Lanczos needs 1 <= m <= n, got m={m}, n={n}")

    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)

    basis = np.zeros((n, m))
    alphas = np.zeros(m)
    betas = np.zeros(max(m - 1, 0))
    basis[:, 0] = q

    for j in range(m):
        w = np.asarray(apply_A(basis[:, j]), dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise LanczosError(f"Operator returned non-finite values at Lanczos iteration {j}")

        alphas[j] = basis[:, j] @ w
        if j == m - 1:
            break

        w = w - alphas[j] * basis[:, j]
        if j > 0:
            w -= betas[j - 1] * basis[:, j - 1]

        # two passes of modified Gram-Schmidt against the whole basis
        for _ in range(REORTH_PASSES):
            for i in range(j + 1):
                w -= (basis[:, i] @ w) * basis[:, i]

        beta = np.linalg.norm(w)
        if beta < BREAKDOWN_TOL:
            logger.warning(f"Lanczos breakdown at iteration {j}: residual norm {beta:.3e}")
            return LanczosFactorization(
                basis=basis[:, :j + 1].copy(),
                alpha=alphas[:j + 1].copy(),
                beta=betas[:j].copy(),
                breakdown=True,
            )

        betas[j] = beta
        basis[:, j + 1] = w / beta

    return LanczosFactorization(basis=basis, alpha=alphas, beta=betas)


def tridiag_eigh(diagonal: np.ndarray, off_diagonal: np.ndarray,
                 max_sweeps: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a symmetric tridiagonal matrix by implicit QL with
    Wilkinson-type shifts, accumulating the rotations into Q

    Returns eigenvalues sorted largest first and Q with matching columns.
    """
    d = np.array(diagonal, dtype=np.float64)
    m = d.size
    if m < 1:
        raise InvalidArgumentsError("Tridiagonal matrix must have at least one row")
    off = np.asarray(off_diagonal, dtype=np.float64)
    if off.size != m - 1:
        raise InvalidArgumentsError(f"Expected {m - 1} off-diagonal entries, got {off.size}")

    e = np.zeros(m)
    e[:m - 1] = off
    z = np.eye(m)
    eps = np.finfo(np.float64).eps
    sweep_limit = 50 * m if max_sweeps is None else max_sweeps
    sweeps = 0

    for l in range(m):
        while True:
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= eps * dd:
                    break
                mm += 1
            if mm == l:
                break

            sweeps += 1
            if sweeps > sweep_limit:
                raise ConvergenceError(
                    f"Tridiagonal eigensolver did not converge within {sweep_limit} sweeps")

            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False

            for i in range(mm - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b

                col = z[:, i + 1].copy()
                z[:, i + 1] = s * z[:, i] + c * col
                z[:, i] = c * z[:, i] - s * col

            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[mm] = 0.0

    order = np.argsort(-d, kind="stable")
    return d[order], z[:, order]


@log_performance
def ese(problem: ObjectiveProblem, theta: np.ndarray, k: int, l: int,
        seed: int) -> SpectrumEstimate:
    """
    Extreme spectrum estimation of the Hessian of ``problem`` at ``theta``

    Runs Lanczos for heuristic_m(n, k, l) steps on theta -> hvp(theta, .) in double
    precision and keeps the first k and last l Ritz pairs.
    """
    n = problem.n
    m = heuristic_m(n, k, l)
    theta64 = np.asarray(theta, dtype=np.float64)

    def apply_hessian(v: np.ndarray) -> np.ndarray:
        return np.asarray(problem.hvp(theta64, v), dtype=np.float64)

    fact = lanczos(apply_hessian, n, m, seed)
    if fact.m < k + l:
        raise InsufficientKrylovDimensionError(
            f"Insufficient Krylov dimension: Lanczos stopped at {fact.m} < k + l = {k + l}")

    ritz_values, ritz_vectors = tridiag_eigh(fact.alpha, fact.beta)
    idx = np.r_[np.arange(k), np.arange(fact.m - l, fact.m)].astype(np.intp)
    lam_hat = ritz_values[idx]
    v_hat = fact.basis @ ritz_vectors[:, idx]

    estimate = SpectrumEstimate(
        lam_hat=lam_hat,
        v_hat=v_hat,
        u=inverse_magnitudes(lam_hat),
        k=k,
        l=l,
        ritz_min=float(ritz_values[-1]),
        ritz_max=float(ritz_values[0]),
        krylov_dim=fact.m,
        breakdown=fact.breakdown,
    )
    logger.debug(f"ESE on {problem.name}: m={fact.m}, lam_hat={np.array2string(lam_hat, precision=4)}")
    return estimate
