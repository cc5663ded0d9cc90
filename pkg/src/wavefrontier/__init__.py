"""Monotone traveling waves of delayed-diffusion Lotka-Volterra competition systems.

Modules: ``core`` (parameters, grid functions, norms), ``charroots``
(characteristic roots), ``kernel`` (Green's functions and convolution),
``waveops`` (shifted operators and ordering suites), ``bounds`` (upper and
lower solutions), ``iteration`` (cross iteration), ``pdesim`` (direct delay
PDE simulation) and ``cli``.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    GridFunction,
    ModelParams,
    ProfilePair,
    WaveParams,
    WavefrontierError,
    decay_norm,
    equilibria,
    sup_norm,
    validate,
)

__all__ = [
    "GridFunction",
    "ModelParams",
    "ProfilePair",
    "WaveParams",
    "WavefrontierError",
    "decay_norm",
    "equilibria",
    "sup_norm",
    "validate",
    "__version__",
]
