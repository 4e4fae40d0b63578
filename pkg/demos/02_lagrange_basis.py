# Lagrange functions of the surface spline space.
#
# chi_xi equals one at its center, zero at every other center, and decays
# exponentially away from the center.  The local variant builds each
# chi_xi from the centers within K h |log h| only.
import numpy as np

from sphg import build_global_basis, build_local_basis, fibonacci_nodes
from sphg.lagrange import decay_profile

X = fibonacci_nodes(961)
h = X.metrics().h
G = build_global_basis(X, m=3)
print("global basis:", G)

# Kronecker property at the centers
V, _ = G.tables(X.points, gradients=False)
print("max |chi_xi(x_eta) - delta| =", np.abs(V - np.eye(len(X))).max())

# Decay measured on a fine probe set, binned by distance in units of h
probes = fibonacci_nodes(40000).points
d, v = decay_profile(G, 0, probes)
for k in range(0, 16, 3):
    sel = (d >= k * h) & (d < (k + 1) * h)
    print(f"  {k:2d}h..{k + 1:2d}h   max |chi| = {v[sel].max():.2e}")

# Local construction: each function sees a few hundred centers
L = build_local_basis(X, m=3, K=7.0)
print("local footprint sizes: mean", L.support_sizes().mean().round(1),
      "min", L.support_sizes().min(), "max", L.support_sizes().max())
Vg, _ = G.tables(probes[:5000], gradients=False, columns=np.arange(0, 961, 50))
Vl, _ = L.tables(probes[:5000], gradients=False, columns=np.arange(0, 961, 50))
print("max |chi_loc - chi| over 20 functions:", np.abs(Vg - Vl).max())
