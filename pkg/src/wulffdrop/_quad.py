"""Shared quadrature constants.

8-point Gauss-Legendre rule mapped to [0, 1]; exact through polynomial
degree 15, in particular exact for all slab volume and gravity integrands.
"""

import numpy as np

_gx, _gw = np.polynomial.legendre.leggauss(8)
GAUSS_X = 0.5 * (_gx + 1.0)
GAUSS_W = 0.5 * _gw
