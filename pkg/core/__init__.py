"""
Core package for the FOSI optimizer lab
Contains the optimizers, spectral estimation, analysis and the experiment harness
"""

__version__ = "1.0.0"
