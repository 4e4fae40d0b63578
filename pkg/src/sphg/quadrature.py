"""Kernel quadrature on the sphere.

The rule ``Q_Y(f) = sum_zeta f(zeta) w_zeta`` integrates the surface
spline interpolant of ``f`` on ``Y``.  Its weights are the integrals of
the Lagrange functions on ``Y`` and solve the bordered system

    [[Phi, P], [P^T, 0]] [w; v] = [c 1; g]

where ``c`` is the kernel moment and ``g`` the harmonic moments.  Small
sets are factorized directly; larger sets use GMRES on the constrained
subspace, right-preconditioned with local Lagrange functions.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateGeometryError, InvalidArgumentError, PointFormatError
from .geometry import PointSet, symmetry_orbits
from .harmonics import HarmonicBasis
from .kernels import SurfaceSplineKernel

logger = logging.getLogger(__name__)

DENSE_LIMIT = 17000


@dataclass
class QuadratureRule:
    """Nodes, weights and the kernel order that produced them."""

    nodes: PointSet
    weights: np.ndarray
    order: int | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (len(self.nodes),):
            raise InvalidArgumentError("one weight per node required")

    def __len__(self):
        return len(self.nodes)

    @property
    def points(self):
        return self.nodes.points

    @property
    def positive(self):
        return bool(np.all(self.weights > 0))

    @cached_property
    def metrics(self):
        return self.nodes.metrics()

    @cached_property
    def rule_id(self):
        h = hashlib.sha1(np.ascontiguousarray(self.points).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return f"{self.nodes.label}:M={self.order}:{h.hexdigest()[:12]}"

    def weight_bound_constant(self, h=None):
        """``max |w| / h_Y^2`` with ``h_Y = N_Y^{-1/2}`` unless given."""
        h = len(self) ** -0.5 if h is None else h
        return float(np.max(np.abs(self.weights)) / h**2)

    def apply(self, samples):
        return apply(self, samples)

    def permuted(self, perm):
        perm = np.asarray(perm)
        return QuadratureRule(
            PointSet(self.points[perm], self.nodes.label, check_distinct=False),
            self.weights[perm],
            self.order,
            dict(self.info),
        )


def apply(rule, samples):
    """Weighted sum of node samples with exactly rounded summation."""
    f = np.asarray(samples, dtype=float)
    if f.shape != rule.weights.shape:
        raise InvalidArgumentError(
            f"expected {rule.weights.shape[0]} samples, got {f.shape}"
        )
    return math.fsum(f * rule.weights)


def gauss_product_rule(n_lat, n_lon=None, label=None):
    """Gauss-Legendre in ``z`` times trapezoid in longitude.

    Exact for polynomials of degree ``<= min(2 n_lat - 1, n_lon - 1)``.
    Independent of kernel machinery, so it serves as reference rule.
    """
    n_lat = int(n_lat)
    n_lon = 2 * n_lat if n_lon is None else int(n_lon)
    z, wz = np.polynomial.legendre.leggauss(n_lat)
    lon = (np.arange(n_lon) + 0.5) * (2.0 * math.pi / n_lon)
    r = np.sqrt(1.0 - z * z)
    pts = np.column_stack(
        [
            np.outer(r, np.cos(lon)).ravel(),
            np.outer(r, np.sin(lon)).ravel(),
            np.repeat(z, n_lon),
        ]
    )
    w = np.repeat(wz, n_lon) * (2.0 * math.pi / n_lon)
    nodes = PointSet(pts, label or f"gauss-{n_lat}x{n_lon}", check_distinct=False)
    return QuadratureRule(nodes, w, order=None, info={"kind": "gauss-product"})


def reference_rule(n_points=200_000):
    """Gauss product rule with roughly ``n_points`` nodes."""
    n_lat = int(math.ceil(math.sqrt(n_points / 2.0)))
    return gauss_product_rule(n_lat, 2 * n_lat)


def saddle_matrix(points, kernel, poly, chunk=1024):
    """Bordered matrix ``[[Phi, P], [P^T, 0]]`` (Fortran order)."""
    n, q = len(points), poly.size
    B = np.zeros((n + q, n + q), order="F")
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        B[:n, s:e] = kernel.matrix(points, points[s:e])
    P = poly.eval(points)
    B[:n, n:] = P
    B[n:, :n] = P.T
    return B


def _dsysv(B, rhs, what, overwrite):
    lapack = scipy.linalg.lapack
    lwork = int(lapack.dsysv_lwork(B.shape[0], lower=1)[0])
    _, _, x, info = lapack.dsysv(
        B, rhs, lwork=lwork, lower=1, overwrite_a=overwrite, overwrite_b=False
    )
    if info > 0:
        raise DegenerateGeometryError(f"singular {what}", pivot=int(info) - 1)
    if info < 0:
        raise RuntimeError(f"dsysv argument {-info} invalid")
    return x


def solve_saddle(B, rhs, what="bordered kernel system", refine=0):
    """Solve a symmetric indefinite system by Bunch-Kaufman factorization.

    ``B`` is overwritten unless ``refine > 0``; each refinement step
    re-solves for the residual (``dsysv`` is blocked for many right-hand
    sides, the bare ``dsytrs`` is not).
    """
    x = _dsysv(B, rhs, what, overwrite=not refine)
    for _ in range(refine):
        x += _dsysv(B, rhs - B @ x, what, overwrite=False)
    return x


def _kernel_matvec(kernel, Y, v, chunk=2048):
    out = np.empty(Y.shape[0])
    for s in range(0, Y.shape[0], chunk):
        out[s : s + chunk] = kernel.eval(Y[s : s + chunk] @ Y.T) @ v
    return out


def _local_lagrange_operator(Y, kernel, poly, n_local):
    """Sparse matrix whose columns are local Lagrange kernel coefficients."""
    n = len(Y)
    _, nbr = Y.tree.query(Y.points, k=n_local)
    q = poly.size
    rows = np.empty((n, n_local), dtype=np.int64)
    vals = np.empty((n, n_local))
    for j in range(n):
        idx = np.sort(nbr[j])
        pts = Y.points[idx]
        B = saddle_matrix(pts, kernel, poly)
        rhs = np.zeros(n_local + q)
        rhs[np.searchsorted(idx, j)] = 1.0
        sol = solve_saddle(B, rhs, what=f"local system at node {j}")
        rows[j] = idx
        vals[j] = sol[:n_local]
    cols = np.repeat(np.arange(n), n_local)
    return sp.csc_matrix((vals.ravel(), (rows.ravel(), cols)), shape=(n, n))


def _weights_symmetric(Y, kernel, poly, orbits):
    """Weights of a node set invariant under a finite orthogonal group.

    The weight system is equivariant, so its unique solution is constant
    on orbits.  One kernel row per orbit representative, summed over each
    orbit, gives a small square system in the orbit values; polynomial
    columns with vanishing orbit sums drop out, and the remaining system
    is solved in the least-squares sense (it is consistent).
    """
    pts = Y.points
    n_orb = int(orbits.max()) + 1
    reps = np.array([np.flatnonzero(orbits == o)[0] for o in range(n_orb)])
    K = np.empty((n_orb, n_orb))
    for s in range(0, n_orb, 256):
        rows = kernel.matrix(pts[reps[s : s + 256]], pts)
        for i, row in enumerate(rows):
            K[s + i] = np.bincount(orbits, weights=row, minlength=n_orb)
    P = poly.eval(pts)
    Psum = np.zeros((n_orb, poly.size))
    np.add.at(Psum, orbits, P)
    keep = np.linalg.norm(Psum, axis=0) > 1e-9 * np.sqrt(len(Y))
    q = int(keep.sum())
    S = np.zeros((n_orb + q, n_orb + q))
    S[:n_orb, :n_orb] = K
    S[:n_orb, n_orb:] = P[reps][:, keep]
    S[n_orb:, :n_orb] = Psum[:, keep].T
    rhs = np.concatenate([np.full(n_orb, kernel.moment()), poly.moments()[keep]])
    sol, *_ = scipy.linalg.lstsq(S, rhs)
    u = sol[:n_orb]
    res = np.linalg.norm(S @ sol - rhs) / np.linalg.norm(rhs)
    # dropped constraints must hold by symmetry
    w = u[orbits]
    if np.any(np.abs(P[:, ~keep].T @ w) > 1e-9 * np.abs(w).sum()):
        raise DegenerateGeometryError("orbit reduction inconsistent with node set")
    return w, {"method": "symmetric", "orbits": n_orb, "relative_residual": float(res)}


def _weights_dense(Y, kernel, poly):
    n = len(Y)
    B = saddle_matrix(Y.points, kernel, poly)
    rhs = np.concatenate([np.full(n, kernel.moment()), poly.moments()])
    sol = solve_saddle(B, rhs, what="quadrature weight system")
    return sol[:n], {"method": "dense"}


def _weights_iterative(Y, kernel, poly, tol, n_local, maxiter):
    """GMRES for the weights on the constraint subspace ``P^T w = g``.

    Writes ``w = w0 + C z`` where ``w0`` is the least-norm solution of the
    moment constraints and the columns of ``C`` (local Lagrange
    coefficients) satisfy ``P^T C = 0``.  The kernel rows are projected
    orthogonally to ``range(P)`` to eliminate the polynomial unknowns.
    """
    pts = Y.points
    n = len(Y)
    P = poly.eval(pts)
    Qp, _ = np.linalg.qr(P)
    g = poly.moments()
    w0 = P @ np.linalg.solve(P.T @ P, g)

    def project(v):
        return v - Qp @ (Qp.T @ v)

    C = _local_lagrange_operator(Y, kernel, poly, n_local)
    rhs = project(kernel.moment() - _kernel_matvec(kernel, pts, w0))
    nmv = [0]

    def matvec(z):
        nmv[0] += 1
        return project(_kernel_matvec(kernel, pts, C @ z))

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    z, info = spla.gmres(
        op, rhs, rtol=tol, atol=0.0, restart=maxiter,
        maxiter=1,
    )
    if info != 0:
        logger.warning("weight GMRES stopped without reaching rtol=%g", tol)
    w = w0 + C @ z
    res = np.linalg.norm(matvec(z) - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return w, {
        "method": "gmres",
        "matvecs": nmv[0],
        "relative_residual": float(res),
        "n_local": n_local,
    }


def compute_weights(Y, M=2, method="auto", tol=1e-12, n_local=None, maxiter=200):
    """Kernel quadrature weights for node set ``Y`` with ``phi_M``.

    Parameters
    ----------
    Y : PointSet
    M : int
        Surface spline order; rule is exact on ``Pi_{M-1}``.
    method : {"auto", "dense", "iterative", "symmetric"}
        ``auto`` uses the orbit reduction when ``Y`` is invariant under the
        icosahedral group, factorizes directly up to ``DENSE_LIMIT``
        nodes, and falls back to preconditioned GMRES beyond that.
    tol : float
        Relative residual target for the iterative path.
    n_local : int, optional
        Neighbours per local Lagrange preconditioner column.

    Returns
    -------
    QuadratureRule
    """
    kernel = SurfaceSplineKernel(M)
    poly = HarmonicBasis(M - 1)
    if len(Y) < poly.size:
        raise InvalidArgumentError(f"need at least {poly.size} nodes for M={M}")
    orbits = None
    if method in ("auto", "symmetric"):
        orbits = symmetry_orbits(Y)
        if orbits is None and method == "symmetric":
            raise InvalidArgumentError(f"{Y.label} is not icosahedrally symmetric")
    if method == "auto":
        if orbits is not None and len(Y) > 200:
            method = "symmetric"
        else:
            method = "dense" if len(Y) <= DENSE_LIMIT else "iterative"
    if method == "symmetric":
        w, info = _weights_symmetric(Y, kernel, poly, orbits)
    elif method == "dense":
        w, info = _weights_dense(Y, kernel, poly)
    elif method == "iterative":
        if n_local is None:
            n_local = min(len(Y), max(100, 12 * M * M))
        w, info = _weights_iterative(Y, kernel, poly, tol, n_local, maxiter)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    rule = QuadratureRule(Y, w, order=M, info=info)
    if not rule.positive:
        logger.warning(
            "%d nonpositive weights for %s (M=%d)",
            int(np.sum(w <= 0)), Y.label, M,
        )
    return rule


def convergence_order(f, exact, sizes, M=2, node_family=None, rules=None):
    """Fitted rate of ``|Q_Y f - exact|`` against ``h_Y = N_Y^{-1/2}``.

    ``f`` maps an ``(n, 3)`` array to samples.  Returns a dict with the
    per-size errors and the least-squares slope (``None`` when every error
    is at rounding level and no rate can be fitted).
    """
    from .geometry import fibonacci_nodes
    from .harness import fit_rate

    node_family = node_family or fibonacci_nodes
    if len(sizes) < 3:
        raise InvalidArgumentError("need at least three sizes")
    hs, errs = [], []
    for n in sizes:
        rule = rules[n] if rules is not None else compute_weights(node_family(n), M)
        errs.append(abs(apply(rule, f(rule.points)) - exact))
        hs.append(len(rule) ** -0.5)
    floor = 1e-13 * max(1.0, abs(exact))
    if max(errs) <= floor:
        return {"h": hs, "errors": errs, "rate": None, "residual": None}
    rate, resid = fit_rate(list(zip(hs, np.maximum(errs, 1e-300))))
    return {"h": hs, "errors": errs, "rate": rate, "residual": resid}


def save_rule(rule, path):
    """Write ``M N_Y`` then one ``x y z w`` line per node."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{rule.order if rule.order is not None else 0} {len(rule)}\n")
        for (x, y, z), w in zip(rule.points, rule.weights):
            fh.write(f"{x:.17g} {y:.17g} {z:.17g} {w:.17g}\n")


def load_rule(path, label=None):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise PointFormatError("header must be 'M N_Y'", 1)
        try:
            M, n = int(header[0]), int(header[1])
        except ValueError as exc:
            raise PointFormatError(str(exc), 1) from None
        data = []
        for lineno, line in enumerate(fh, start=2):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 4:
                raise PointFormatError("expected 'x y z w'", lineno)
            try:
                data.append([float(v) for v in parts])
            except ValueError as exc:
                raise PointFormatError(str(exc), lineno) from None
    data = np.array(data, dtype=float).reshape(-1, 4)
    if len(data) != n:
        raise PointFormatError(f"header declares {n} nodes, file has {len(data)}")
    nodes = PointSet(data[:, :3], label or path.stem, check_distinct=False)
    return QuadratureRule(nodes, data[:, 3], order=M or None, info={"source": str(path)})
