#!/usr/bin/env python3
"""
Objective models for the FOSI optimizer lab
Problem abstraction consumed by every optimizer plus deterministic batch sampling
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np

from core.exceptions import InvalidArgumentsError


class ObjectiveProblem(ABC):
    """Base class for objective functions with analytic gradient and Hessian-vector product

    Instances are immutable after construction. Stochastic problems return a new
    instance restricted to a batch from ``with_batch``.
    """

    def __init__(self):
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    @property
    @abstractmethod
    def name(self) -> str:
        """Problem name/identifier"""
        pass

    @property
    @abstractmethod
    def n(self) -> int:
        """Parameter dimension"""
        pass

    @property
    @abstractmethod
    def initial_point(self) -> np.ndarray:
        """Default starting point theta_0"""
        pass

    @abstractmethod
    def value(self, theta: np.ndarray) -> float:
        """Objective value f(theta)"""
        pass

    @abstractmethod
    def gradient(self, theta: np.ndarray) -> np.ndarray:
        """Gradient of f at theta"""
        pass

    @abstractmethod
    def hvp(self, theta: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Hessian-vector product H(theta) v"""
        pass

    @property
    def dataset_size(self) -> Optional[int]:
        """Number of samples f averages over, None for deterministic problems"""
        return None

    def with_batch(self, indices: Sequence[int]) -> "ObjectiveProblem":
        """Return the problem restricted to the samples in ``indices``"""
        raise InvalidArgumentsError(f"Problem '{self.name}' has no batch mode")

    def describe(self) -> str:
        return f"{self.name} (n={self.n})"


class BatchSchedule:
    """Seeded sampler of mini-batch index sets

    Each draw is ``batch_size`` distinct indices, uniform over the dataset. ESE batches
    come from an independent stream so they never shift the training batch sequence.
    """

    def __init__(self, dataset_size: int, batch_size: int, seed: int,
                 ese_batch_size: Optional[int] = None):
        if dataset_size < 1 or batch_size < 1:
            raise InvalidArgumentsError("dataset_size and batch_size must be positive")
        if batch_size > dataset_size:
            raise InvalidArgumentsError(
                f"batch_size {batch_size} exceeds dataset_size {dataset_size}")
        if ese_batch_size is not None and not 1 <= ese_batch_size <= dataset_size:
            raise InvalidArgumentsError(
                f"ese_batch_size must be in [1, {dataset_size}], got {ese_batch_size}")

        self.dataset_size = dataset_size
        self.batch_size = batch_size
        self.ese_batch_size = ese_batch_size
        self.seed = seed

        train_seq, ese_seq = np.random.SeedSequence(seed).spawn(2)
        self._rng = np.random.default_rng(train_seq)
        self._ese_rng = np.random.default_rng(ese_seq)

    @property
    def steps_per_epoch(self) -> int:
        return -(-self.dataset_size // self.batch_size)

    def next_batch(self) -> np.ndarray:
        """Draw the index set for the next iteration"""
        return self._rng.choice(self.dataset_size, size=self.batch_size, replace=False)

    def next_ese_batch(self) -> Optional[np.ndarray]:
        """Draw a dedicated ESE batch, or None when ESE should reuse the current batch"""
        if self.ese_batch_size is None:
            return None
        return self._ese_rng.choice(self.dataset_size, size=self.ese_batch_size, replace=False)
