"""Robust tracking of polynomial homotopy solution paths.

The solution of one path is developed as a vector of truncated power
series by Newton's method on a linearized matrix series, the step size
is bounded by the nearest singularity (ratio test on the series
coefficients) and by local curvature (Hessian spectra), and the actual
step is taken by evaluating a vector Pade approximant.  All arithmetic
runs in double, double-double or quad-double precision.
"""

from .xprec import (
    ExtendedComplex,
    ExtendedReal,
    arith,
    complex_arith,
    eps,
    two_prod,
    two_sum,
)

__version__ = "0.1.0"
