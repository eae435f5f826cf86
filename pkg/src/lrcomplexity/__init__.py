"""Geometric complexity of logistic regression with binary inputs, and model selection built on it."""

from .complexity import (ComplexityEstimate, QuadConfig, QuadratureError, bound_envelope,
                         cauchy_binet_det, complexity_closed_form, complexity_quadrature,
                         upper_bound_triangular)
from .core import (BinaryDesign, EmpiricalInputDistribution, ModelSpec, OutputVector,
                   design_rank, empirical_distribution, entropy_bits, project_design)
from .likelihood import FitResult, fisher_information, fit_mle, gradient, loglik
from .montecarlo import complexity_monte_carlo

__version__ = "0.1.0"

__all__ = [
    "BinaryDesign", "ComplexityEstimate", "EmpiricalInputDistribution", "FitResult", "ModelSpec",
    "OutputVector", "QuadConfig", "QuadratureError", "bound_envelope", "cauchy_binet_det",
    "complexity_closed_form", "complexity_monte_carlo", "complexity_quadrature", "design_rank",
    "empirical_distribution", "entropy_bits", "fisher_information", "fit_mle", "gradient", "loglik",
    "project_design", "upper_bound_triangular",
]
