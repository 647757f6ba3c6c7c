"""Numerical laboratory for Liouville-type theorems for div(phi^2 grad sigma) = 0.

Builds the explicit counterexample pair whose growth matches R^k for any
k > 2 and checks the energy and stability estimates for stable solutions
of semilinear equations.
"""

from .profile import Profile, allen_cahn_potential, kink, snoidal_wave
from .fields import counterexample, flux, lift_1d
from .quadrature import QuadratureSpec, Region, integrate
from .energy import energy_ledgers, fit_exponent, growth_series

__all__ = [
    "Profile", "allen_cahn_potential", "kink", "snoidal_wave",
    "counterexample", "flux", "lift_1d",
    "QuadratureSpec", "Region", "integrate",
    "energy_ledgers", "fit_exponent", "growth_series",
]
