"""Numerical laboratory for spin-1/2 Pauli Hamiltonians.

The package is organised around the objects it simulates:

- ``phase_flow``      Hamiltonian models and the classical flow on R^d x R^d.
- ``spin_transport``  SU(2) spin transport along classical trajectories.
- ``skew_product``    the extended flow on shell x SU(2), its invariant
                      measures, and ergodicity diagnostics.
- ``weyl_moyal``      Weyl quantization of 2x2 matrix symbols, the truncated
                      star product, and classically transported symbols.
- ``spectra``         discretized Pauli operators, spectral windows, window
                      averages and the eigenstate-expectation variance.
- ``wigner``          matrix-valued Wigner and Husimi phase-space transforms.
- ``cli``             scenario-driven command line front end.
"""

from paulilab import errors
from paulilab.pauli import SIGMA, ID2

__all__ = ["errors", "SIGMA", "ID2"]

__version__ = "0.1.0"
