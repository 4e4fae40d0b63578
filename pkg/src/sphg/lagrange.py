"""Lagrange (cardinal) bases for the surface spline space on a center set.

Every basis function has the form

    chi_xi(x) = sum_zeta alpha[zeta, xi] phi_m(x . zeta) + sum_j beta[j, xi] Y_j(x)

with the kernel coefficients orthogonal to ``Pi_{m-1}``.  The global
basis solves one bordered system against all unit right-hand sides; the
local basis solves a small system per center on the footprint
``X cap B(xi, K h_X |log h_X|)``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import FootprintError, InvalidArgumentError
from .geometry import PointSet, ball_query, geodesic_distance
from .harmonics import HarmonicBasis
from .kernels import SurfaceSplineKernel
from .quadrature import saddle_matrix, solve_saddle

logger = logging.getLogger(__name__)

TABLE_CHUNK = 1024


@dataclass
class LagrangeFunction:
    center: int
    support: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    variant: str


def _tables(points, centers, alpha, beta, kernel, poly, gradients=True):
    """Values ``(n, N)`` and surface gradients ``(3, n, N)`` of all columns.

    ``alpha`` is ``(N_centers, N_funcs)``, ``beta`` is ``(Q, N_funcs)``.
    """
    points = np.atleast_2d(points)
    T = points @ centers.T
    if not gradients:
        return kernel.eval(T) @ alpha + poly.eval(points) @ beta, None
    Kv, D = kernel.eval_and_deriv(T)
    V = Kv @ alpha + poly.eval(points) @ beta
    G = np.empty((3,) + V.shape)
    for d in range(3):
        G[d] = (D * centers[:, d]) @ alpha
    G += np.einsum("nqd,qf->dnf", poly.ambient_gradient(points), beta)
    radial = np.einsum("dnf,nd->nf", G, points)
    G -= points.T[:, :, None] * radial[None]
    return V, G


class LagrangeBasis:
    """Lagrange basis ``{chi_xi}`` on a center set ``X``.

    Attributes
    ----------
    X : PointSet
    order : int
        Surface spline order ``m``; polynomials up to degree ``m - 1``.
    alpha : ndarray, shape (N, N)
        Column ``xi`` holds the kernel coefficients of ``chi_xi`` (zero
        outside the footprint for the local variant).
    beta : ndarray, shape (m**2, N)
    variant : {"global", "local"}
    supports : list of ndarray or None
    K : float or None
        Footprint constant (local variant).
    radius : float or None
        Footprint radius actually used.
    """

    def __init__(self, X, order, alpha, beta, variant="global", supports=None,
                 K=None, radius=None):
        self.X = X
        self.order = int(order)
        self.kernel = SurfaceSplineKernel(self.order)
        self.poly = HarmonicBasis(self.order - 1)
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        n = len(X)
        if self.alpha.shape != (n, n) or self.beta.shape != (self.poly.size, n):
            raise InvalidArgumentError("coefficient shapes do not match center set")
        self.variant = variant
        self.supports = supports
        self.K = K
        self.radius = radius

    def __len__(self):
        return len(self.X)

    def __repr__(self):
        return f"LagrangeBasis(N={len(self)}, m={self.order}, variant={self.variant!r})"

    def function(self, xi):
        if self.supports is None:
            support = np.arange(len(self))
        else:
            support = self.supports[xi]
        return LagrangeFunction(
            int(xi), support, self.alpha[support, xi].copy(),
            self.beta[:, xi].copy(), self.variant,
        )

    def support_sizes(self):
        if self.supports is None:
            return np.full(len(self), len(self))
        return np.array([len(s) for s in self.supports])

    def tables(self, points, gradients=True, columns=None, chunk=TABLE_CHUNK):
        """Values and gradients of (a subset of) the basis at ``points``.

        Returns ``V`` of shape ``(n, k)`` and ``G`` of shape ``(3, n, k)``
        (``None`` without gradients), ``k`` the number of columns.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.alpha if columns is None else self.alpha[:, columns]
        b = self.beta if columns is None else self.beta[:, columns]
        if pts.shape[0] <= chunk:
            return _tables(pts, self.X.points, a, b, self.kernel, self.poly, gradients)
        V = np.empty((pts.shape[0], a.shape[1]))
        G = np.empty((3,) + V.shape) if gradients else None
        for s in range(0, pts.shape[0], chunk):
            v, g = _tables(pts[s : s + chunk], self.X.points, a, b,
                           self.kernel, self.poly, gradients)
            V[s : s + chunk] = v
            if gradients:
                G[:, s : s + chunk] = g
        return V, G

    def value(self, xi, x):
        V, _ = self.tables(x, gradients=False, columns=[xi])
        return V[:, 0] if np.ndim(x) > 1 else float(V[0, 0])

    def gradient(self, xi, x):
        _, G = self.tables(x, columns=[xi])
        g = np.moveaxis(G[:, :, 0], 0, -1)
        return g if np.ndim(x) > 1 else g[0]

    def combine(self, coeffs):
        """Kernel/polynomial coefficients of ``sum_xi c_xi chi_xi``."""
        c = np.asarray(coeffs, dtype=float)
        return self.alpha @ c, self.beta @ c

    def evaluate(self, coeffs, points, chunk=8192):
        """Values of ``sum_xi c_xi chi_xi`` at ``points``."""
        a, b = self.combine(coeffs)
        pts = np.atleast_2d(points)
        out = np.empty(pts.shape[0])
        for s in range(0, pts.shape[0], chunk):
            p = pts[s : s + chunk]
            out[s : s + chunk] = self.kernel.eval(p @ self.X.points.T) @ a + self.poly.eval(p) @ b
        return out


def build_global_basis(X, m=3, refine=1):
    """Global Lagrange basis from one symmetric indefinite factorization.

    ``refine`` steps of iterative refinement tighten the cardinality
    conditions.  Raises :class:`DegenerateGeometryError` when the
    bordered system is singular.
    """
    kernel = SurfaceSplineKernel(m)
    poly = HarmonicBasis(m - 1)
    n = len(X)
    if n < poly.size:
        raise InvalidArgumentError(f"need at least {poly.size} centers for m={m}")
    B = saddle_matrix(X.points, kernel, poly)
    rhs = np.zeros((n + poly.size, n), order="F")
    rhs[np.arange(n), np.arange(n)] = 1.0
    sol = solve_saddle(B, rhs, what="Lagrange system", refine=refine)
    return LagrangeBasis(X, m, sol[:n], sol[n:], variant="global")


def footprint_radius(X, m, K, metrics=None):
    """``max(K h_X |log h_X|, 3 q_X m^2)``."""
    met = metrics or X.metrics()
    h = met.mesh_norm
    return max(K * h * abs(math.log(h)), 3.0 * met.separation_radius * m * m)


def _local_solve(X, kernel, poly, xi, radius):
    idx = ball_query(X, X.points[xi], radius)
    if len(idx) < poly.size:
        return xi, idx, None
    B = saddle_matrix(X.points[idx], kernel, poly)
    rhs = np.zeros(len(idx) + poly.size)
    rhs[np.searchsorted(idx, xi)] = 1.0
    sol = solve_saddle(B, rhs, what=f"local Lagrange system at center {xi}")
    return xi, idx, sol


def build_local_basis(X, m=3, K=7.0, metrics=None, workers=None):
    """Local Lagrange basis on footprints of radius ``K h_X |log h_X|``.

    Each center solves its own bordered system, so the centers can be
    processed by a thread pool (``workers``); output does not depend on
    the number of workers.
    """
    kernel = SurfaceSplineKernel(m)
    poly = HarmonicBasis(m - 1)
    n = len(X)
    radius = footprint_radius(X, m, K, metrics)
    alpha = np.zeros((n, n))
    beta = np.zeros((poly.size, n))
    supports = [None] * n
    small = {}

    def task(xi):
        return _local_solve(X, kernel, poly, xi, radius)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(task, range(n)))
    else:
        results = map(task, range(n))
    for xi, idx, sol in results:
        supports[xi] = idx
        if sol is None:
            small[xi] = len(idx)
            continue
        alpha[idx, xi] = sol[: len(idx)]
        beta[:, xi] = sol[len(idx):]
    if small:
        raise FootprintError(small, poly.size)
    return LagrangeBasis(X, m, alpha, beta, variant="local", supports=supports,
                         K=K, radius=radius)


def eval_value(basis, xi, x):
    return basis.value(xi, x)


def eval_gradient(basis, xi, x):
    return basis.gradient(xi, x)


def decay_profile(basis, xi, probes):
    """``(distance, |chi_xi|)`` pairs at probe points, sorted by distance."""
    pts = probes.points if isinstance(probes, PointSet) else np.atleast_2d(probes)
    d = geodesic_distance(pts, basis.X.points[xi])
    v = np.abs(basis.value(xi, pts))
    order = np.argsort(d, kind="stable")
    return d[order], v[order]


def fit_decay_rate(distances, values, h, floor=1e-14):
    """Least-squares slope of ``log|chi|`` against ``d / h`` (binned maxima).

    Returns the slope; a negative value means exponential decay.  Values
    below ``floor`` are dropped.
    """
    r = np.asarray(distances) / h
    v = np.asarray(values)
    bins = np.floor(r).astype(int)
    xs, ys = [], []
    for b in np.unique(bins):
        if b == 0:
            continue
        vm = v[bins == b].max()
        if vm > floor:
            xs.append(b + 0.5)
            ys.append(math.log(vm))
    if len(xs) < 2:
        return float("nan")
    return float(np.polyfit(xs, ys, 1)[0])


class Interpolant:
    """Surface spline interpolant with polynomial reproduction."""

    def __init__(self, X, order, a, b):
        self.X = X
        self.order = order
        self.kernel = SurfaceSplineKernel(order)
        self.poly = HarmonicBasis(order - 1)
        self.kernel_coeffs = a
        self.poly_coeffs = b

    def __call__(self, x, chunk=4096):
        x = np.atleast_2d(x)
        out = np.empty(len(x))
        for s in range(0, len(x), chunk):
            p = x[s : s + chunk]
            out[s : s + chunk] = (self.kernel.eval(p @ self.X.points.T) @ self.kernel_coeffs
                                  + self.poly.eval(p) @ self.poly_coeffs)
        return out

    def gradient(self, x):
        x = np.atleast_2d(x)
        V, G = _tables(x, self.X.points, self.kernel_coeffs[:, None],
                       self.poly_coeffs[:, None], self.kernel, self.poly)
        return np.moveaxis(G[:, :, 0], 0, -1)


def interpolate(X, m, samples):
    """Interpolate ``samples`` (one per center) from ``V_{phi_m, X}``."""
    kernel = SurfaceSplineKernel(m)
    poly = HarmonicBasis(m - 1)
    f = np.asarray(samples, dtype=float)
    n = len(X)
    if f.shape != (n,):
        raise InvalidArgumentError(f"expected {n} samples, got shape {f.shape}")
    B = saddle_matrix(X.points, kernel, poly)
    sol = solve_saddle(
        B, np.concatenate([f, np.zeros(poly.size)]), what="interpolation system", refine=1
    )
    return Interpolant(X, m, sol[:n], sol[n:])


def save_basis(basis, path):
    """Text export, one record per function.

    Record layout: ``center support_count idx_1..idx_k alpha_1..alpha_k
    beta_1..beta_Q``; a ``#`` header carries order, variant and N.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# sphg-basis order={basis.order} variant={basis.variant} "
            f"N={len(basis)} K={basis.K} radius={basis.radius}\n"
        )
        for xi in range(len(basis)):
            f = basis.function(xi)
            parts = [str(xi), str(len(f.support))]
            parts += [str(int(i)) for i in f.support]
            parts += [f"{v:.17g}" for v in f.alpha]
            parts += [f"{v:.17g}" for v in f.beta]
            fh.write(" ".join(parts) + "\n")


def load_basis(path, X):
    """Inverse of :func:`save_basis`; ``X`` must be the original centers."""
    meta = {}
    n = len(X)
    alpha = beta = None
    supports = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if s.startswith("#"):
                for tok in s[1:].split()[1:]:
                    k, _, v = tok.partition("=")
                    meta[k] = v
                order = int(meta["order"])
                if int(meta["N"]) != n:
                    raise InvalidArgumentError("basis file was built on a different center set")
                q = order * order
                alpha = np.zeros((n, n))
                beta = np.zeros((q, n))
                continue
            if not s:
                continue
            tok = s.split()
            xi, k = int(tok[0]), int(tok[1])
            idx = np.array([int(t) for t in tok[2 : 2 + k]], dtype=np.int64)
            vals = np.array([float(t) for t in tok[2 + k :]])
            alpha[idx, xi] = vals[:k]
            beta[:, xi] = vals[k:]
            supports.append(idx)
    variant = meta.get("variant", "global")
    K = None if meta.get("K") in (None, "None") else float(meta["K"])
    radius = None if meta.get("radius") in (None, "None") else float(meta["radius"])
    return LagrangeBasis(
        X, order, alpha, beta, variant=variant,
        supports=supports if variant == "local" else None, K=K, radius=radius,
    )
