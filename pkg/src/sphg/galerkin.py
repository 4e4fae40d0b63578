"""Discretized Galerkin systems for ``-div(a grad u) + b u = f`` on S^2.

Stiffness entries are quadrature sums over a rule ``Y``:

    A[xi, eta] = sum_zeta (a grad chi_xi . grad chi_eta + b chi_xi chi_eta)(zeta) w_zeta

computed from value/gradient tables of the Lagrange basis at the nodes,
one chunk of nodes at a time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, NotPositiveDefiniteError
from .geometry import PointSet, geodesic_distance

logger = logging.getLogger(__name__)

DENSE_MAX = 8192
SPARSE_MAX_NNZ = 50_000_000
ASSEMBLY_CHUNK = 1024


@dataclass
class PDEProblem:
    """Scalar coefficients of ``-div(a grad u) + b u = f``.

    Fields are callables on ``(n, 3)`` point arrays returning ``(n,)``.
    ``a_min``/``b_min`` are the declared positive lower bounds.
    """

    a: callable
    b: callable
    f: callable
    exact_u: callable = None
    a_min: float = 1.0
    b_min: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not (self.a_min > 0 and self.b_min > 0):
            raise InvalidArgumentError("coefficient lower bounds must be positive")

    def check_bounds(self, n_probe=10_000):
        """Raise unless sampled ``a``/``b`` stay above their declared bounds."""
        from .geometry import fibonacci_nodes

        p = fibonacci_nodes(n_probe).points
        amin, bmin = float(np.min(self.a(p))), float(np.min(self.b(p)))
        if amin < self.a_min or bmin < self.b_min:
            raise InvalidArgumentError(
                f"{self.name}: sampled min a={amin:.3g}, b={bmin:.3g} below "
                f"declared bounds {self.a_min}, {self.b_min}"
            )
        return amin, bmin


@dataclass
class StiffnessMatrix:
    """Symmetric stiffness operator and how it was produced.

    ``variant`` is one of ``discretized``, ``local``, ``truncated``,
    ``truncated-local``, or ``reference`` (assembled on a reference rule).
    """

    matrix: object
    variant: str
    params: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def sparse(self):
        return sp.issparse(self.matrix)

    def toarray(self):
        return self.matrix.toarray() if self.sparse else np.asarray(self.matrix)

    def __matmul__(self, x):
        return self.matrix @ x

    def nnz_per_row(self):
        if self.sparse:
            return np.diff(self.matrix.indptr)
        return np.full(self.n, self.n)


@dataclass
class GalerkinSolution:
    basis: object
    coefficients: np.ndarray
    residual: float
    info: dict = field(default_factory=dict)

    def __call__(self, points):
        return evaluate_solution(self, points)


def _variant(basis):
    return "local" if basis.variant == "local" else "discretized"


def assemble(basis, rule, problem, rhs=True, chunk=ASSEMBLY_CHUNK):
    """Stiffness matrix (and load vector) on quadrature rule ``rule``.

    Returns ``(StiffnessMatrix, f_tilde)``; ``f_tilde`` is ``None`` when
    ``rhs`` is false.  The product is symmetrized at the end, so the
    result is exactly symmetric.
    """
    n = len(basis)
    if n > DENSE_MAX:
        raise InvalidArgumentError(f"dense assembly limited to N_X <= {DENSE_MAX}")
    if rule.order is not None and not rule.positive:
        logger.warning("quadrature rule %s has nonpositive weights", rule.nodes.label)
    Y = rule.points
    A = np.zeros((n, n))
    f_t = np.zeros(n) if rhs else None
    for s in range(0, len(Y), chunk):
        pts = Y[s : s + chunk]
        w = rule.weights[s : s + chunk]
        V, G = basis.tables(pts)
        aw = problem.a(pts) * w
        bw = problem.b(pts) * w
        for d in range(3):
            A += G[d].T @ (aw[:, None] * G[d])
        A += V.T @ (bw[:, None] * V)
        if rhs:
            f_t += V.T @ (problem.f(pts) * w)
    A = 0.5 * (A + A.T)
    params = {"rule": rule.rule_id, "N_Y": len(rule), "K": basis.K, "problem": problem.name}
    variant = "reference" if rule.order is None else _variant(basis)
    return StiffnessMatrix(A, variant, params), f_t


def assemble_stiffness(basis, rule, problem, chunk=ASSEMBLY_CHUNK):
    return assemble(basis, rule, problem, rhs=False, chunk=chunk)[0]


def assemble_rhs(basis, rule, problem, chunk=ASSEMBLY_CHUNK):
    """Load vector ``f_xi = sum_zeta f(zeta) chi_xi(zeta) w_zeta``."""
    f_t = np.zeros(len(basis))
    Y = rule.points
    for s in range(0, len(Y), chunk):
        pts = Y[s : s + chunk]
        V, _ = basis.tables(pts, gradients=False)
        f_t += V.T @ (problem.f(pts) * rule.weights[s : s + chunk])
    return f_t


def truncation_radius(X, K, metrics=None):
    h = (metrics or X.metrics()).mesh_norm
    return K * h * abs(math.log(h))


def truncate(A, X, K, metrics=None):
    """Zero every entry with ``dist(xi, eta) > K h_X |log h_X|`` (CSR result)."""
    radius = truncation_radius(X, K, metrics)
    dense = A.toarray()
    n = A.n
    if radius >= math.pi:
        rows, cols = np.nonzero(np.ones((n, n), dtype=bool))
    else:
        from .geometry import arc_to_chord

        chord = float(arc_to_chord(radius)) * (1.0 + 1e-9) + 1e-12
        pairs = X.tree.query_pairs(chord, output_type="ndarray")
        if len(pairs):
            keep = geodesic_distance(X.points[pairs[:, 0]], X.points[pairs[:, 1]]) <= radius
            pairs = pairs[keep]
        idx = np.arange(n)
        rows = np.concatenate([idx, pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([idx, pairs[:, 1], pairs[:, 0]])
    if len(rows) > SPARSE_MAX_NNZ:
        raise InvalidArgumentError(f"truncated matrix exceeds {SPARSE_MAX_NNZ} nonzeros")
    M = sp.csr_matrix((dense[rows, cols], (rows, cols)), shape=(n, n))
    M.sort_indices()
    variant = "truncated-local" if A.variant == "local" else "truncated"
    params = dict(A.params, K_truncation=K, radius=radius,
                  mean_row_nnz=float(np.mean(np.diff(M.indptr))),
                  predicted_row_nnz=0.25 * K * K * math.log(n) ** 2)
    return StiffnessMatrix(M, variant, params)


def _cholesky(A):
    try:
        return scipy.linalg.cho_factor(A.toarray(), lower=True)
    except scipy.linalg.LinAlgError:
        raise NotPositiveDefiniteError() from None


def solve(A, f_tilde, basis=None, tol=1e-12, maxiter=None):
    """Solve ``A alpha = f_tilde``.

    Dense matrices use a Cholesky factorization; sparse ones use
    Jacobi-preconditioned conjugate gradients to relative residual
    ``tol`` within ``10 N`` iterations.
    """
    f = np.asarray(f_tilde, dtype=float)
    if f.shape != (A.n,):
        raise InvalidArgumentError("right-hand side length does not match matrix")
    if not A.sparse:
        c = _cholesky(A)
        x = scipy.linalg.cho_solve(c, f)
        info = {"method": "cholesky"}
    else:
        M = A.matrix
        diag = M.diagonal()
        if np.any(diag <= 0):
            raise NotPositiveDefiniteError()
        pre = spla.LinearOperator(M.shape, matvec=lambda v: v / diag, dtype=float)
        it = [0]

        def count(_):
            it[0] += 1

        x, code = spla.cg(M, f, rtol=tol, atol=0.0, maxiter=maxiter or 10 * A.n,
                          M=pre, callback=count)
        if code != 0:
            raise NotPositiveDefiniteError(
                "conjugate gradients did not converge; the truncated matrix may "
                "not be positive definite (increase N_Y or K)"
            )
        info = {"method": "cg", "iterations": it[0]}
    nf = np.linalg.norm(f)
    res = float(np.linalg.norm(A @ x - f) / nf) if nf > 0 else float(np.linalg.norm(A @ x))
    return GalerkinSolution(basis, x, res, info)


def _power(apply, n, tol, maxiter, seed=0):
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = apply(v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        v = w / nw
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    logger.warning("power iteration hit maxiter=%d", maxiter)
    return lam


def extreme_eigenvalues(A, tol=1e-6, maxiter=20_000):
    """``(lambda_min, lambda_max)`` by power and inverse iteration."""
    M = A.matrix
    lmax = _power(lambda v: M @ v, A.n, tol, maxiter)
    if A.sparse:
        try:
            lu = spla.splu(sp.csc_matrix(M))
        except RuntimeError:
            raise NotPositiveDefiniteError() from None
        inv = lu.solve
    else:
        c = _cholesky(A)
        inv = lambda v: scipy.linalg.cho_solve(c, v)  # noqa: E731
    mu = _power(inv, A.n, tol, maxiter, seed=1)
    if mu <= 0:
        raise NotPositiveDefiniteError()
    return 1.0 / mu, lmax


def condition_number(A, tol=1e-6, maxiter=20_000):
    """Spectral condition number of an SPD stiffness matrix."""
    lmin, lmax = extreme_eigenvalues(A, tol, maxiter)
    return lmax / lmin


def spectral_norm(M, tol=1e-8, maxiter=5000):
    """``||M||_2`` of a symmetric matrix via power iteration on ``M^2``."""
    M = M.matrix if isinstance(M, StiffnessMatrix) else M
    n = M.shape[0]
    lam = _power(lambda v: M @ (M @ v), n, tol, maxiter)
    return math.sqrt(max(lam, 0.0))


def evaluate_solution(sol, points):
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(points)
    return sol.basis.evaluate(sol.coefficients, pts)


def galerkin_solve(basis, rule, problem, truncation_K=None, metrics=None):
    """Assemble, optionally truncate, and solve; returns ``(solution, A)``."""
    A, f_t = assemble(basis, rule, problem)
    if truncation_K is not None:
        A = truncate(A, basis.X, truncation_K, metrics)
    return solve(A, f_t, basis), A


def export_matrix(A, path):
    """MatrixMarket: coordinate format when sparse, array format when dense."""
    M = A.matrix if isinstance(A, StiffnessMatrix) else A
    if sp.issparse(M):
        scipy.io.mmwrite(path, sp.coo_matrix(M), symmetry="symmetric")
    else:
        scipy.io.mmwrite(path, np.asarray(M), symmetry="symmetric")
