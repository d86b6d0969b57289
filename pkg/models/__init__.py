"""
Models module for the FOSI optimizer lab
Defines objective problems, benchmark problem types and experiment configuration models
"""

from .objective import ObjectiveProblem, BatchSchedule
from .problem_models import QuadraticProblem, LogisticProblem
from .experiment_models import (
    FosiConfig,
    StoppingRule,
    ProblemSpec,
    OptimizerSpec,
    OutputSpec,
    SweepSpec,
    SummarySpec,
    ExperimentSpec,
)

__all__ = [
    'ObjectiveProblem',
    'BatchSchedule',
    'QuadraticProblem',
    'LogisticProblem',
    'FosiConfig',
    'StoppingRule',
    'ProblemSpec',
    'OptimizerSpec',
    'OutputSpec',
    'SweepSpec',
    'SummarySpec',
    'ExperimentSpec',
]
