#!/usr/bin/env python3
"""
Base optimizers for the FOSI optimizer lab
Stateful first-order steppers (GD, Heavy-Ball, Adam) behind one interface
"""

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, Optional, Tuple, Type

import numpy as np

from core.exceptions import InvalidArgumentsError, NonFiniteError


class OptimalLrForm(Enum):
    """Closed-form optimal learning rate of a base optimizer on a quadratic"""

    GD = "gd"
    HB = "hb"
    NONE = "none"

    def evaluate(self, lam_max: float, lam_min: float) -> float:
        if self is OptimalLrForm.GD:
            return 2.0 / (lam_max + lam_min)
        if self is OptimalLrForm.HB:
            return 4.0 / (np.sqrt(lam_max) + np.sqrt(lam_min)) ** 2
        raise InvalidArgumentsError("Optimizer has no closed-form optimal learning rate")


def _check_gradient(g: np.ndarray, n: Optional[int]) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1 or (n is not None and g.size != n):
        raise InvalidArgumentsError(f"Gradient must be a vector of length {n}, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("Non-finite gradient passed to base optimizer", where="base")
    return g


class BaseOptimizer(ABC):
    """First-order stepper mapping a gradient-like vector to a descent direction

    ``step`` advances the internal state exactly once. ``momentum_gradient`` and
    ``inverse_preconditioner_diag`` are pure peeks of what ``step`` would use, so
    that step(g) == -lr * q * g_bar for q, g_bar returned by the peeks.
    """

    kind: str = ""
    optimal_lr_form: OptimalLrForm = OptimalLrForm.NONE

    def __init__(self, learning_rate: float):
        if not learning_rate > 0:
            raise InvalidArgumentsError(f"Learning rate must be positive, got {learning_rate}")
        self.learning_rate = float(learning_rate)
        self.iteration = 0
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    @property
    def momentum_coefficient(self) -> float:
        """Coefficient of the gradient moving average (0 when there is none)"""
        return 0.0

    @property
    def bias_corrected(self) -> bool:
        return False

    @abstractmethod
    def _advance(self, g: np.ndarray, lr: float) -> np.ndarray:
        pass

    @abstractmethod
    def momentum_gradient(self, g: np.ndarray) -> np.ndarray:
        """Momentum-combined gradient the next step would use, without advancing"""
        pass

    def inverse_preconditioner_diag(self, g: np.ndarray) -> np.ndarray:
        """Diagonal q of the inverse preconditioner the next step would apply"""
        g = _check_gradient(g, None)
        return np.ones_like(g)

    def step(self, g: np.ndarray, learning_rate: Optional[float] = None) -> np.ndarray:
        """Return the descent direction for g and advance the state"""
        g = _check_gradient(g, None)
        lr = self.learning_rate if learning_rate is None else float(learning_rate)
        direction = self._advance(g, lr)
        self.iteration += 1
        return direction

    def reset(self):
        self.iteration = 0

    def describe(self) -> Dict[str, float]:
        return {"kind": self.kind, "learning_rate": self.learning_rate}


class GradientDescent(BaseOptimizer):
    """d = -lr * g"""

    kind = "gd"
    optimal_lr_form = OptimalLrForm.GD

    def _advance(self, g: np.ndarray, lr: float) -> np.ndarray:
        return -lr * g

    def momentum_gradient(self, g: np.ndarray) -> np.ndarray:
        return _check_gradient(g, None).copy()


class HeavyBall(BaseOptimizer):
    """Momentum buffer b <- beta b + g, d = -lr * b"""

    kind = "hb"
    optimal_lr_form = OptimalLrForm.HB

    def __init__(self, learning_rate: float, beta: float = 0.9):
        super().__init__(learning_rate)
        if not 0.0 <= beta < 1.0:
            raise InvalidArgumentsError(f"Momentum must be in [0, 1), got {beta}")
        self.beta = float(beta)
        self.buffer: Optional[np.ndarray] = None

    @property
    def momentum_coefficient(self) -> float:
        return self.beta

    def momentum_gradient(self, g: np.ndarray) -> np.ndarray:
        g = _check_gradient(g, None)
        if self.buffer is None:
            return g.copy()
        return self.beta * self.buffer + g

    def _advance(self, g: np.ndarray, lr: float) -> np.ndarray:
        self.buffer = self.momentum_gradient(g)
        return -lr * self.buffer

    def reset(self):
        super().reset()
        self.buffer = None

    def describe(self) -> Dict[str, float]:
        info = super().describe()
        info["beta"] = self.beta
        return info


class Adam(BaseOptimizer):
    """Adam with bias-corrected moments, d = -lr * m_hat / (sqrt(v_hat) + eps)"""

    kind = "adam"

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        super().__init__(learning_rate)
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise InvalidArgumentsError(f"Adam betas must be in [0, 1), got ({beta1}, {beta2})")
        if not eps > 0:
            raise InvalidArgumentsError(f"Adam eps must be positive, got {eps}")
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None

    @property
    def momentum_coefficient(self) -> float:
        return self.beta1

    @property
    def bias_corrected(self) -> bool:
        return True

    def _next_moments(self, g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        m = np.zeros_like(g) if self.m is None else self.m
        v = np.zeros_like(g) if self.v is None else self.v
        return self.beta1 * m + (1.0 - self.beta1) * g, self.beta2 * v + (1.0 - self.beta2) * g * g

    def _corrected(self, m: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        t = self.iteration + 1
        return m / (1.0 - self.beta1 ** t), v / (1.0 - self.beta2 ** t)

    def momentum_gradient(self, g: np.ndarray) -> np.ndarray:
        g = _check_gradient(g, None)
        m, v = self._next_moments(g)
        return self._corrected(m, v)[0]

    def inverse_preconditioner_diag(self, g: np.ndarray) -> np.ndarray:
        g = _check_gradient(g, None)
        m, v = self._next_moments(g)
        return 1.0 / (np.sqrt(self._corrected(m, v)[1]) + self.eps)

    def _advance(self, g: np.ndarray, lr: float) -> np.ndarray:
        self.m, self.v = self._next_moments(g)
        m_hat, v_hat = self._corrected(self.m, self.v)
        return -lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def reset(self):
        super().reset()
        self.m = None
        self.v = None

    def describe(self) -> Dict[str, float]:
        info = super().describe()
        info.update({"beta1": self.beta1, "beta2": self.beta2, "eps": self.eps})
        return info


OPTIMIZER_TYPES: Dict[str, Type[BaseOptimizer]] = {
    "gd": GradientDescent,
    "hb": HeavyBall,
    "adam": Adam,
}


def create_base_optimizer(kind: str, learning_rate: float, momentum: Optional[float] = None,
                          beta2: float = 0.999, eps: float = 1e-8) -> BaseOptimizer:
    """Build a base optimizer from its kind name"""
    kind = kind.lower()
    if kind == "gd":
        return GradientDescent(learning_rate)
    if kind == "hb":
        return HeavyBall(learning_rate, beta=0.9 if momentum is None else momentum)
    if kind == "adam":
        return Adam(learning_rate, beta1=0.9 if momentum is None else momentum, beta2=beta2, eps=eps)
    raise InvalidArgumentsError(f"Unknown optimizer kind '{kind}'. Expected one of {sorted(OPTIMIZER_TYPES)}")


def base_step(opt: BaseOptimizer, g: np.ndarray) -> Tuple[np.ndarray, BaseOptimizer]:
    """Functional form of ``opt.step``: returns the direction and the advanced optimizer"""
    return opt.step(g), opt
