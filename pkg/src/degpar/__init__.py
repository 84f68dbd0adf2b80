"""Regularity toolkit for degenerate parabolic convection-diffusion equations.

Submodules: ``problem`` (coefficient models), ``exponents`` (closed-form
regularity exponents), ``nondeg`` (non-degeneracy exponent estimation),
``solver`` (vanishing-viscosity finite volumes), ``spectral``
(Littlewood-Paley analysis), ``trajio`` and ``pipeline``/``cli``.
"""

__version__ = "0.1.0"
