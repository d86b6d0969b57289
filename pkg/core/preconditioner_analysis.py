#!/usr/bin/env python3
"""
Preconditioner analysis for the FOSI optimizer lab
Builds FOSI's effective inverse preconditioner on explicit quadratics from exact
eigendecompositions and checks its spectral properties
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from core.base_optimizers import Adam
from core.exceptions import InvalidArgumentsError
from core.problem_generator import random_spd_matrix
from core.spectral import SpectrumEstimate
from utils.logger import log_performance

logger = logging.getLogger(__name__)

MAX_DENSE_N = 200
SPECTRUM_TOL = 1e-8


@dataclass
class ConditionNumberCase:
    """Classification of alpha against eta*lambda_{n-l} and eta*lambda_{k+1}"""

    case: int
    improved: bool
    kappa: float
    kappa_effective: float


@dataclass
class EffectivePreconditionerReport:
    label: str
    n: int
    k: int
    l: int
    alpha: float
    eta: float
    p_inv: np.ndarray
    p_inv_eigenvalues: np.ndarray
    effective_eigenvalues: np.ndarray
    symmetry_residual: float
    min_eigenvalue: float
    kappa: float
    kappa_effective: float
    case: Optional[int]
    alpha_residual: float
    spectrum_error: Optional[float] = None
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_row(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "n": self.n,
            "k": self.k,
            "l": self.l,
            "alpha": self.alpha,
            "eta": self.eta,
            "symmetry_residual": self.symmetry_residual,
            "min_eigenvalue": self.min_eigenvalue,
            "kappa": self.kappa,
            "kappa_effective": self.kappa_effective,
            "case": "none" if self.case is None else self.case,
            "alpha_residual": self.alpha_residual,
            "spectrum_error": np.nan if self.spectrum_error is None else self.spectrum_error,
            "passed": self.passed,
        }

    def to_text(self) -> str:
        lines = [
            f"[{'PASS' if self.passed else 'FAIL'}] {self.label} (n={self.n}, k={self.k}, l={self.l}, "
            f"alpha={self.alpha:g}, eta={self.eta:g})",
            f"  symmetry residual : {self.symmetry_residual:.3e}",
            f"  min eig of P^-1   : {self.min_eigenvalue:.3e}",
            f"  kappa / effective : {self.kappa:.4e} / {self.kappa_effective:.4e} "
            f"(case {'none' if self.case is None else self.case})",
            f"  alpha residual    : {self.alpha_residual:.3e}",
        ]
        if self.spectrum_error is not None:
            lines.append(f"  spectrum error    : {self.spectrum_error:.3e}")
        for name, ok in self.checks.items():
            lines.append(f"  {name:<18}: {'ok' if ok else 'violated'}")
        return "\n".join(lines)


def _validate_hessian(H: np.ndarray, k: int, l: int) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidArgumentsError(f"Hessian must be square, got shape {H.shape}")
    n = H.shape[0]
    if n > MAX_DENSE_N:
        raise InvalidArgumentsError(f"Dense analysis is limited to n <= {MAX_DENSE_N}, got {n}")
    if k < 0 or l < 0 or k + l < 1 or k + l > n:
        raise InvalidArgumentsError(f"Invalid block sizes k={k}, l={l} for n={n}")
    if np.abs(H - H.T).max() > 1e-10 * max(1.0, np.abs(H).max()):
        raise InvalidArgumentsError("Hessian must be symmetric")
    return H


def _exact_eigh(H: np.ndarray):
    """Dense eigendecomposition, largest eigenvalue first"""
    try:
        lam, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as e:
        raise InvalidArgumentsError(f"Eigendecomposition failed: {e}") from e
    return lam[::-1].copy(), V[:, ::-1].copy()


def _effective_spectrum(P_inv: np.ndarray, lam: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Eigenvalues of P^-1 H through the similar symmetric matrix H^1/2 P^-1 H^1/2"""
    root = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    M = root @ P_inv @ root
    return np.sort(np.linalg.eigvalsh(0.5 * (M + M.T)))[::-1]


def condition_number_cases(lam_1: float, lam_k1: float, lam_nl: float, lam_n: float,
                           alpha: float, eta: float) -> ConditionNumberCase:
    """
    Effective condition number of P^-1 H for the identity preconditioner

    Case 1: alpha < eta lam_{n-l}, kappa~ = eta lam_{k+1} / alpha
    Case 2: eta lam_{n-l} <= alpha <= eta lam_{k+1}, kappa~ = lam_{k+1} / lam_{n-l}
    Case 3: alpha > eta lam_{k+1}, kappa~ = alpha / (eta lam_{n-l})
    """
    if not (lam_1 >= lam_k1 >= lam_nl >= lam_n > 0):
        raise InvalidArgumentsError(
            f"Eigenvalues must satisfy lam_1 >= lam_k+1 >= lam_n-l >= lam_n > 0, "
            f"got ({lam_1}, {lam_k1}, {lam_nl}, {lam_n})")
    if not alpha > 0 or not eta > 0:
        raise InvalidArgumentsError(f"alpha and eta must be positive, got alpha={alpha}, eta={eta}")

    kappa = lam_1 / lam_n
    if alpha < eta * lam_nl:
        case, kappa_effective = 1, eta * lam_k1 / alpha
    elif alpha <= eta * lam_k1:
        case, kappa_effective = 2, lam_k1 / lam_nl
    else:
        case, kappa_effective = 3, alpha / (eta * lam_nl)
    return ConditionNumberCase(case=case, improved=kappa_effective <= kappa,
                               kappa=kappa, kappa_effective=kappa_effective)


def identity_preconditioner_spectral_form(H: np.ndarray, k: int, l: int, alpha: float,
                                          eta: float) -> np.ndarray:
    """P^-1 = V diag([alpha u, eta 1]) V^T with the full eigenbasis ordered top-k, bottom-l, rest"""
    H = _validate_hessian(H, k, l)
    lam, V = _exact_eigh(H)
    n = lam.size
    extreme = np.r_[np.arange(k), np.arange(n - l, n)].astype(np.intp)
    rest = np.arange(k, n - l, dtype=np.intp)
    order = np.r_[extreme, rest]
    u = SpectrumEstimate.from_eigenpairs(lam, V, k, l).u
    scales = np.r_[alpha * u, eta * np.ones(rest.size)]
    basis = V[:, order]
    return (basis * scales) @ basis.T


def _report(label: str, H: np.ndarray, P_inv: np.ndarray, spectrum: SpectrumEstimate,
            lam: np.ndarray, V: np.ndarray, k: int, l: int, alpha: float, eta: float) -> EffectivePreconditionerReport:
    n = lam.size
    p_eigs = np.sort(np.linalg.eigvalsh(0.5 * (P_inv + P_inv.T)))[::-1]
    effective = _effective_spectrum(P_inv, lam, V)
    kappa = float(lam[0] / lam[-1]) if lam[-1] > 0 else np.inf
    kappa_effective = float(effective[0] / effective[-1]) if effective[-1] > 0 else np.inf

    residuals = [np.linalg.norm(P_inv @ (H @ v) - alpha * v) for v in spectrum.v_hat.T]
    alpha_residual = float(max(residuals)) if residuals else 0.0

    # empty complement when k + l == n: no base-optimizer block to classify
    case = None
    if lam[-1] > 0 and k + l < n:
        cases = condition_number_cases(lam[0], lam[k], lam[n - l - 1], lam[-1], alpha, eta)
        case = cases.case if cases.improved else None

    return EffectivePreconditionerReport(
        label=label, n=n, k=k, l=l, alpha=alpha, eta=eta, p_inv=P_inv,
        p_inv_eigenvalues=p_eigs, effective_eigenvalues=effective,
        symmetry_residual=float(np.abs(P_inv - P_inv.T).max()),
        min_eigenvalue=float(p_eigs[-1]),
        kappa=kappa, kappa_effective=kappa_effective, case=case,
        alpha_residual=alpha_residual,
    )


def effective_preconditioner_identity(H: np.ndarray, k: int, l: int, alpha: float,
                                      eta: float) -> EffectivePreconditionerReport:
    """FOSI with a scaled-identity base preconditioner: P^-1 = alpha V diag(u) V^T + eta (I - V V^T)"""
    H = _validate_hessian(H, k, l)
    lam, V = _exact_eigh(H)
    n = lam.size
    spectrum = SpectrumEstimate.from_eigenpairs(lam, V, k, l)
    Vh = spectrum.v_hat

    P_inv = alpha * (Vh * spectrum.u) @ Vh.T + eta * (np.eye(n) - Vh @ Vh.T)
    report = _report("identity", H, P_inv, spectrum, lam, V, k, l, alpha, eta)

    expected = np.sort(np.r_[np.full(k + l, alpha), eta * lam[k:n - l]])[::-1]
    report.spectrum_error = float(np.abs(report.effective_eigenvalues - expected).max())
    report.checks = {
        "symmetric": report.symmetry_residual <= 1e-10,
        "positive_definite": report.min_eigenvalue > 0,
        "spectrum": report.spectrum_error <= SPECTRUM_TOL,
    }
    return report


def effective_preconditioner_diagonal(H: np.ndarray, q: np.ndarray, k: int, l: int, alpha: float,
                                      eta: float) -> EffectivePreconditionerReport:
    """FOSI with a diagonal base preconditioner:
    P^-1 = alpha V diag(u) V^T + eta (I - V V^T) diag(q) (I - V V^T)
    """
    H = _validate_hessian(H, k, l)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (H.shape[0],):
        raise InvalidArgumentsError(f"q must have shape ({H.shape[0]},), got {q.shape}")
    if not np.all(q > 0):
        raise InvalidArgumentsError("Diagonal preconditioner q must be strictly positive")

    lam, V = _exact_eigh(H)
    n = lam.size
    spectrum = SpectrumEstimate.from_eigenpairs(lam, V, k, l)
    Vh = spectrum.v_hat
    complement = np.eye(n) - Vh @ Vh.T

    P_inv = alpha * (Vh * spectrum.u) @ Vh.T + eta * complement @ (q[:, None] * complement)
    report = _report("diagonal", H, P_inv, spectrum, lam, V, k, l, alpha, eta)
    report.checks = {
        "symmetric": report.symmetry_residual <= 1e-10,
        "positive_definite": report.min_eigenvalue > 0,
        "alpha_eigenspace": report.alpha_residual <= SPECTRUM_TOL,
    }
    return report


def preconditioner_spectrum_bounds(P_inv: np.ndarray, z: float, eps: float) -> Dict[str, Any]:
    """Extreme eigenvalues of a symmetric P^-1 and whether they lie in [1/z, 1/eps]"""
    if not z > 0 or not eps > 0:
        raise InvalidArgumentsError(f"Bounds need z > 0 and eps > 0, got z={z}, eps={eps}")
    P_inv = np.asarray(P_inv, dtype=np.float64)
    eigs = np.linalg.eigvalsh(0.5 * (P_inv + P_inv.T))
    lower, upper = 1.0 / z, 1.0 / eps
    slack = 1e-10 * max(1.0, abs(eigs).max())
    return {
        "min_eigenvalue": float(eigs[0]),
        "max_eigenvalue": float(eigs[-1]),
        "lower_bound": lower,
        "upper_bound": upper,
        "within_bounds": bool(eigs[0] >= lower - slack and eigs[-1] <= upper + slack),
    }


def adam_preconditioner_diag(n: int, seed: int, steps: int = 5, scale: float = 1.0) -> np.ndarray:
    """Positive q obtained by feeding an Adam instance a few random gradients"""
    rng = np.random.default_rng(seed)
    adam = Adam(learning_rate=1e-3)
    for _ in range(steps):
        adam.step(scale * rng.standard_normal(n))
    return adam.inverse_preconditioner_diag(scale * rng.standard_normal(n))


@log_performance
def verify_lemmas(n: int = 50, seed: int = 0, trials: int = 20, k: int = 5, l: int = 3,
                  alpha: float = 1.0, eta: float = 0.01) -> List[EffectivePreconditionerReport]:
    """Run the identity and diagonal preconditioner checks on seeded SPD matrices"""
    if trials < 1:
        raise InvalidArgumentsError("trials must be at least 1")
    if k + l > n:
        raise InvalidArgumentsError(f"k + l = {k + l} exceeds n = {n}")

    reports = []
    for trial in range(trials):
        trial_seed = seed + trial
        H, _, _ = random_spd_matrix(n, trial_seed)

        identity = effective_preconditioner_identity(H, k, l, alpha, eta)
        identity.label = f"identity[seed={trial_seed}]"
        reports.append(identity)

        q = adam_preconditioner_diag(n, trial_seed)
        diagonal = effective_preconditioner_diagonal(H, q, k, l, alpha, eta)
        diagonal.label = f"diagonal[seed={trial_seed}]"
        reports.append(diagonal)

    failed = [report.label for report in reports if not report.passed]
    if failed:
        logger.warning(f"Preconditioner checks failed for {failed}")
    else:
        logger.info(f"All {len(reports)} preconditioner checks passed (n={n}, trials={trials})")
    return reports
