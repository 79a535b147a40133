"""Numerical laboratory for 1-equivariant blowup of the mixed
dispersive/dissipative magnetization flow u_t = rho1 u ^ Du - rho2 u ^ (u ^ Du)
from the plane to the sphere.

Subpackages:
    closed_forms  exact scalar ingredients (bubble, potential, kernel pair, t1)
    radial        graded grids, quadrature, the linearized operator and its inverse
    profiles      approximate blowup profiles, radiation, localized test direction
    modulation    finite-dimensional blowup ODEs, shooting, rate fitting
    flow          direct equivariant PDE solver with modulation extraction
    verify        one-command verification suite of all checkable identities
    cli           command-line runner
"""

__version__ = "0.1.0"
