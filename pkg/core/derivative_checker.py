#!/usr/bin/env python3
"""
Derivative checker for the FOSI optimizer lab
Finite-difference and structural checks of an objective's gradient and HVP
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from core.exceptions import InvalidArgumentsError
from models.objective import ObjectiveProblem

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
GRADIENT_TOL = 1e-5
HVP_FD_TOL = 1e-5
STRUCTURE_TOL = 1e-10


@dataclass
class DiagnosticReport:
    """Worst-case errors over the sampled directions

    gradient_error: |v.g - central difference| / max(1, |f|)
    hvp_error: |hvp(v) - central difference of gradients| / max(1, |hvp(v)|)
    symmetry_error: |v.hvp(w) - w.hvp(v)| / max(1, |v.hvp(w)|)
    linearity_error: |hvp(av + bw) - a hvp(v) - b hvp(w)| / max(1, |hvp(av + bw)|)
    """

    problem: str
    trials: int
    gradient_error: float = 0.0
    hvp_error: float = 0.0
    symmetry_error: float = 0.0
    linearity_error: float = 0.0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (not self.failures
                and self.gradient_error <= GRADIENT_TOL
                and self.hvp_error <= HVP_FD_TOL
                and self.symmetry_error <= STRUCTURE_TOL
                and self.linearity_error <= STRUCTURE_TOL)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "problem": self.problem,
            "trials": self.trials,
            "gradient_error": self.gradient_error,
            "hvp_error": self.hvp_error,
            "symmetry_error": self.symmetry_error,
            "linearity_error": self.linearity_error,
            "passed": self.passed,
            "failures": "; ".join(self.failures),
        }


def check_derivatives(problem: ObjectiveProblem, theta: np.ndarray, trials: int = 5,
                      seed: int = 0, h: float = FD_STEP) -> DiagnosticReport:
    """Compare gradient and HVP against central differences and check HVP linearity/symmetry"""
    if trials < 1:
        raise InvalidArgumentsError(f"trials must be at least 1, got {trials}")

    theta = np.asarray(theta, dtype=np.float64)
    report = DiagnosticReport(problem=problem.name, trials=trials)

    f0 = problem.value(theta)
    g0 = problem.gradient(theta)
    if not np.isfinite(f0) or not np.all(np.isfinite(g0)):
        report.failures.append(f"non-finite value/gradient at theta={np.array2string(theta, precision=6)}")
        logger.error(f"Derivative check on {problem.name} failed: {report.failures[-1]}")
        return report

    rng = np.random.default_rng(seed)
    scale = max(1.0, abs(f0))
    for _ in range(trials):
        v = rng.standard_normal(problem.n)
        v /= np.linalg.norm(v)
        w = rng.standard_normal(problem.n)
        w /= np.linalg.norm(w)
        a, b = rng.standard_normal(2)

        fd = (problem.value(theta + h * v) - problem.value(theta - h * v)) / (2.0 * h)
        report.gradient_error = max(report.gradient_error, abs(v @ g0 - fd) / scale)

        hv = problem.hvp(theta, v)
        hw = problem.hvp(theta, w)
        fd_hvp = (problem.gradient(theta + h * v) - problem.gradient(theta - h * v)) / (2.0 * h)
        report.hvp_error = max(report.hvp_error,
                               np.linalg.norm(hv - fd_hvp) / max(1.0, np.linalg.norm(hv)))

        vhw = v @ hw
        report.symmetry_error = max(report.symmetry_error, abs(vhw - w @ hv) / max(1.0, abs(vhw)))

        combined = problem.hvp(theta, a * v + b * w)
        report.linearity_error = max(
            report.linearity_error,
            np.linalg.norm(combined - a * hv - b * hw) / max(1.0, np.linalg.norm(combined)))

    level = logging.INFO if report.passed else logging.WARNING
    logger.log(level, f"Derivative check on {problem.name}: grad={report.gradient_error:.2e}, "
                      f"hvp={report.hvp_error:.2e}, sym={report.symmetry_error:.2e}, "
                      f"lin={report.linearity_error:.2e}")
    return report
