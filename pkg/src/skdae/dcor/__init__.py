"""Distance covariance / correlation statistics and their gradient."""

from ._backend import active_backend, available_backends, use_backend
from .bruteforce import dcor_bruteforce, dcov2_bruteforce
from .core import (
    dcor,
    dcor_gradient,
    dcor_with_gradient,
    dcov2,
    double_center,
    dvar2,
    pairwise_distance_matrix,
)

__all__ = [
    "active_backend",
    "available_backends",
    "use_backend",
    "pairwise_distance_matrix",
    "double_center",
    "dcov2",
    "dvar2",
    "dcor",
    "dcor_gradient",
    "dcor_with_gradient",
    "dcov2_bruteforce",
    "dcor_bruteforce",
]
