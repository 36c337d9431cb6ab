"""Numerical laboratory for Riemannian cones and asymptotically conical manifolds.

Modules
-------
spectral  harmonic transforms on Gauss-Legendre grids
link      link metrics: area, curvature bounds, spectra, isoperimetric profiles
cone      cone and perturbed metrics: curvature, volumes, slices, decay norms
cmc       radial graphs, the prescribed-mean-curvature solver, foliations, Jacobi spectra
iso       isoperimetric ratios, cone angle and curvature integrals
"""

__version__ = "0.1.0"

from .cmc import RadialGraph, Target, foliate, jacobi_spectrum, solve_cmc  # noqa: E402
from .cone import AsymptoticConeMetric, Perturbation, RadialProfile  # noqa: E402
from .link import LinkMetric, area, laplace_spectrum, lichnerowicz_check  # noqa: E402
from .spectral import SpectralField  # noqa: E402

__all__ = [
    "AsymptoticConeMetric",
    "LinkMetric",
    "Perturbation",
    "RadialGraph",
    "RadialProfile",
    "SpectralField",
    "Target",
    "area",
    "foliate",
    "jacobi_spectrum",
    "laplace_spectrum",
    "lichnerowicz_check",
    "solve_cmc",
]
