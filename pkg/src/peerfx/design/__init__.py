"""
Assignment mechanisms: sampling, probabilities and kernels
"""

from .compositions import feasible_compositions, is_feasible
from .kernel import ProbabilityKernel, kernel
from .sampler import assignment_probability, sample

__all__ = ['feasible_compositions', 'is_feasible', 'ProbabilityKernel', 'kernel',
           'assignment_probability', 'sample']
