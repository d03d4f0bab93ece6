"""Fredholm determinants of KPZ fixed point kernels and KP-equation checks.

Modules
-------
specfun     Airy function / derivative, complex log-Gamma
quadrature  Gauss-Legendre rules and domain maps
kernels     kernel families (narrow wedge, flat, multiwedge, KPZ, spiked)
fredholm    Nystrom assembly, det(I-K), boundary resolvent
painleve    Hastings-McLeod solution, Tracy-Widom distributions
scattering  Brownian hitting kernels, t->0 limits, path-integral form
residuals   finite-difference residuals of the KP/Hirota identities
fields      determinant-field builders on lattices
kpsolver    periodic pseudo-spectral KP-II integrator
cli         batch experiment runner
"""

__version__ = "0.1.0"

__all__ = [
    "specfun", "quadrature", "kernels", "fredholm", "painleve",
    "scattering", "residuals", "fields", "kpsolver", "cli",
]
