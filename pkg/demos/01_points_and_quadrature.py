# Point sets on the sphere and kernel quadrature.
#
# Run with:  python3 demos/01_points_and_quadrature.py
import math

import numpy as np

from sphg import compute_weights, fibonacci_nodes, icosahedral_nodes

# Two node families.  Fibonacci lattices come in any size; icosahedral
# grids only in sizes 10 f^2 + 2, but they carry the full icosahedral
# symmetry, which the weight solver exploits.
fib = fibonacci_nodes(1000)
ico = icosahedral_nodes(frequency=16)
for X in (fib, ico):
    m = X.metrics()
    print(f"{X.label:>16s}  N={len(X):5d}  q={m.q:.4f}  h={m.h:.4f}  rho={m.rho:.2f}")

# The rule integrates the surface spline interpolant of the samples, so its
# weights are the integrals of the Lagrange functions on Y.  They sum to the
# area of the sphere and kill the degree-one harmonics.
rule = compute_weights(fib, M=2)
print("sum of weights - 4 pi:", math.fsum(rule.weights) - 4 * math.pi)
print("weights positive:", rule.positive,
      " range of N w / 4pi:", np.ptp(rule.weights * len(rule) / (4 * math.pi)).round(4))

# A smooth integrand converges fast.  The exact value of int e^z is
# 2 pi (e - 1/e).
exact = 2 * math.pi * (math.e - 1 / math.e)
for n in (250, 1000, 4000):
    r = compute_weights(fibonacci_nodes(n), 2)
    print(f"N_Y={n:5d}  |Q(e^z) - I| = {abs(r.apply(np.exp(r.points[:, 2])) - exact):.2e}")

# On the icosahedral grid the solve reduces to one unknown per symmetry orbit.
r = compute_weights(ico, 2)
print(f"{ico.label}: path={r.info.get('method')}  distinct weights={len(np.unique(r.weights.round(13)))}")
