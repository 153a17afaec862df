"""
Sampling kernels and their oracles
==================================

Every estimator in tomolab averages a kernel over homodyne records.  This
script evaluates the three kernel families and compares each closed form
with a slow independent computation.
"""

import math
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning

from tomolab.kernels import (KernelSpec, MomentIndex, f_biorthogonal_closed,
                             f_biorthogonal_solve, g_poly, pattern_function,
                             pattern_integral_oracle, s_kernel, s_kernel_integral_oracle)

# The quasidistribution kernel S_N(xi; s) for the Q function (s = -1).  It
# is a Kummer function in xi**2; more modes make it narrower and deeper.
xi = np.linspace(-4, 4, 9)
for N in (1, 2, 3):
    print(f"S_{N}(xi; -1):", np.array2string(s_kernel(xi, KernelSpec(N, -1.0)), precision=4))

# Against its radial-integral form, with detection loss folded in.  QUADPACK
# is pessimistic about roundoff for this oscillatory integrand, so its
# warning is silenced here.
spec = KernelSpec(3, -1.0, eta=0.8)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", IntegrationWarning)
    oracle = s_kernel_integral_oracle(1.3, spec)
print("S_3 closed form vs integral at xi = 1.3:", s_kernel(1.3, spec), oracle)

# Pattern functions give density-matrix elements; here rho_{10,01} of two
# modes.  The Laguerre integral has a null imaginary part.
idx = MomentIndex((1, 0), (0, 1))
theta = [0.6]
print("pattern function:", pattern_function(idx, 0.7, theta, KernelSpec(2, -1.0, 0.9)))
print("Laguerre integral:", pattern_integral_oracle(idx, 0.7, theta, 0.9))

# The moment method needs functions F_m^l biorthogonal to the monomials
# G_k^l = C(l, k) cos^k sin^(l-k).  On the grid theta_n = n pi / 10 the
# discrete orthogonality holds to rounding.
th = np.arange(1, 11) * math.pi / 10
F = np.array([f_biorthogonal_closed(m, 3, th) for m in range(4)])
G = np.array([g_poly(k, 3, th) for k in range(4)])
print("sum_n F_m G_k pi/10 =\n", np.round(F @ G.T * math.pi / 10, 12))
print("closed form vs linear solve, max |diff| =",
      np.max(np.abs(F - f_biorthogonal_solve(3, 10))))
