"""Mesh-free solvers for mean field game PDE systems.

Two methods over a shared operator-decomposition architecture: Gaussian
process kernel collocation and Fourier feature least squares, both driven
by a relaxed Gauss-Newton iteration.
"""

from .pipeline import ExperimentConfig, RunResult, run_experiment

__all__ = ["ExperimentConfig", "RunResult", "run_experiment"]
__version__ = "0.1.0"
