"""Structured-sparsity estimation of vector autoregressions.

Modules: ``model`` (VAR simulation and regression form), ``spectral``
(conditioning constants and stationary covariances), ``penalties``,
``solver`` (accelerated proximal gradient, lambda paths, CV), ``analysis``
(widths, rates, bounds), ``experiments`` (scaling sweeps) and ``cli``.
"""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
