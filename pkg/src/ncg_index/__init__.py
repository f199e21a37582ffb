"""Numerical index pairings for spectral triples and Fredholm modules.

Submodules: ``operators``, ``models``, ``cyclic``, ``fredholm``, ``jlo``,
``zeta`` / ``local`` and the ``cli`` batch runner.
"""

from .errors import NCGError
from .fredholm import KAPPA, calibrate_kappa, index_pairing_even, index_pairing_odd
from .models import SpectralTriple, WindingSymbol, build_circle_dirac, build_finite_even

__version__ = "0.1.0"

__all__ = [
    "KAPPA",
    "NCGError",
    "SpectralTriple",
    "WindingSymbol",
    "build_circle_dirac",
    "build_finite_even",
    "calibrate_kappa",
    "index_pairing_even",
    "index_pairing_odd",
]
