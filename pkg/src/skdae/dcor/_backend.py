"""Kernel backend selection: compiled extension when available, numpy otherwise.

The choice is made once at import time; ``SKDAE_DCOR_BACKEND`` (``auto``,
``compiled``, ``numpy``) overrides it, and :func:`use_backend` switches at
runtime (used by tests and the benchmark).
"""

import os

from . import _numpy_impl

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS = {"numpy": _numpy_impl}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels


def _resolve(name):
    if name == "auto":
        return _BACKENDS.get("compiled", _numpy_impl)
    if name not in _BACKENDS:
        available = ", ".join(sorted(_BACKENDS) + ["auto"])
        raise ValueError(f"unknown dcor backend {name!r} (available: {available})")
    return _BACKENDS[name]


_active = _resolve(os.environ.get("SKDAE_DCOR_BACKEND", "auto"))


def active_backend():
    """Name of the kernel backend in use ('compiled' or 'numpy')."""
    return _active.NAME


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Switch the kernel backend ('auto', 'compiled', or 'numpy')."""
    global _active
    _active = _resolve(name)
    return _active.NAME


def pairwise_distances(x):
    return _active.pairwise_distances(x)


def dcor_grad_accum(a_cent, b_cent, b_dist, y, coef_a, coef_b):
    return _active.dcor_grad_accum(a_cent, b_cent, b_dist, y, coef_a, coef_b)
