"""Real orthonormal spherical harmonics of degree <= 4.

Each ``Y_{l,k}`` is stored as a normalization constant times a
homogeneous harmonic polynomial with integer coefficients, so values and
ambient gradients come from one monomial table.  Index ``k`` runs over
``1..2l+1`` and maps to the usual order ``m = k - l - 1``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError

MAX_SUPPORTED_DEGREE = 4

_PI = math.pi

# (l, m) -> (normalization, {(a, b, c): integer coefficient of x^a y^b z^c})
_TABLE = {
    (0, 0): (0.5 / math.sqrt(_PI), {(0, 0, 0): 1}),
    (1, -1): (math.sqrt(3 / (4 * _PI)), {(0, 1, 0): 1}),
    (1, 0): (math.sqrt(3 / (4 * _PI)), {(0, 0, 1): 1}),
    (1, 1): (math.sqrt(3 / (4 * _PI)), {(1, 0, 0): 1}),
    (2, -2): (0.5 * math.sqrt(15 / _PI), {(1, 1, 0): 1}),
    (2, -1): (0.5 * math.sqrt(15 / _PI), {(0, 1, 1): 1}),
    (2, 0): (0.25 * math.sqrt(5 / _PI), {(0, 0, 2): 2, (2, 0, 0): -1, (0, 2, 0): -1}),
    (2, 1): (0.5 * math.sqrt(15 / _PI), {(1, 0, 1): 1}),
    (2, 2): (0.25 * math.sqrt(15 / _PI), {(2, 0, 0): 1, (0, 2, 0): -1}),
    (3, -3): (0.25 * math.sqrt(35 / (2 * _PI)), {(2, 1, 0): 3, (0, 3, 0): -1}),
    (3, -2): (0.5 * math.sqrt(105 / _PI), {(1, 1, 1): 1}),
    (3, -1): (
        0.25 * math.sqrt(21 / (2 * _PI)),
        {(0, 1, 2): 4, (2, 1, 0): -1, (0, 3, 0): -1},
    ),
    (3, 0): (0.25 * math.sqrt(7 / _PI), {(0, 0, 3): 2, (2, 0, 1): -3, (0, 2, 1): -3}),
    (3, 1): (
        0.25 * math.sqrt(21 / (2 * _PI)),
        {(1, 0, 2): 4, (3, 0, 0): -1, (1, 2, 0): -1},
    ),
    (3, 2): (0.25 * math.sqrt(105 / _PI), {(2, 0, 1): 1, (0, 2, 1): -1}),
    (3, 3): (0.25 * math.sqrt(35 / (2 * _PI)), {(3, 0, 0): 1, (1, 2, 0): -3}),
    (4, -4): (0.75 * math.sqrt(35 / _PI), {(3, 1, 0): 1, (1, 3, 0): -1}),
    (4, -3): (0.75 * math.sqrt(35 / (2 * _PI)), {(2, 1, 1): 3, (0, 3, 1): -1}),
    (4, -2): (
        0.75 * math.sqrt(5 / _PI),
        {(1, 1, 2): 6, (3, 1, 0): -1, (1, 3, 0): -1},
    ),
    (4, -1): (
        0.75 * math.sqrt(5 / (2 * _PI)),
        {(0, 1, 3): 4, (2, 1, 1): -3, (0, 3, 1): -3},
    ),
    (4, 0): (
        (3 / 16) * math.sqrt(1 / _PI),
        {
            (4, 0, 0): 3, (0, 4, 0): 3, (0, 0, 4): 8, (2, 2, 0): 6,
            (2, 0, 2): -24, (0, 2, 2): -24,
        },
    ),
    (4, 1): (
        0.75 * math.sqrt(5 / (2 * _PI)),
        {(1, 0, 3): 4, (3, 0, 1): -3, (1, 2, 1): -3},
    ),
    (4, 2): (
        (3 / 8) * math.sqrt(5 / _PI),
        {(2, 0, 2): 6, (0, 2, 2): -6, (4, 0, 0): -1, (0, 4, 0): 1},
    ),
    (4, 3): (0.75 * math.sqrt(35 / (2 * _PI)), {(3, 0, 1): 1, (1, 2, 1): -3}),
    (4, 4): (
        (3 / 16) * math.sqrt(35 / _PI),
        {(4, 0, 0): 1, (2, 2, 0): -6, (0, 4, 0): 1},
    ),
}


def harmonic_index(l, k):
    """Flat column index of ``Y_{l,k}`` (``k`` is 1-based)."""
    return l * l + k - 1


def _monomials(max_deg):
    return [
        (a, b, c)
        for d in range(max_deg + 1)
        for a in range(d, -1, -1)
        for b in range(d - a, -1, -1)
        for c in [d - a - b]
    ]


class HarmonicBasis:
    """Orthonormal real harmonics spanning Pi_L, ``L <= 4``.

    Columns are ordered by ``(l, k)`` with ``l`` ascending; the basis has
    ``(L + 1)**2`` functions.
    """

    def __init__(self, max_degree):
        L = int(max_degree)
        if L < 0 or L > MAX_SUPPORTED_DEGREE:
            raise InvalidArgumentError(
                f"harmonic degree must be in 0..{MAX_SUPPORTED_DEGREE}, got {max_degree}"
            )
        self.max_degree = L
        self.size = (L + 1) ** 2
        self._mono = _monomials(L)
        pos = {e: i for i, e in enumerate(self._mono)}
        C = np.zeros((len(self._mono), self.size))
        self.labels = []
        for l in range(L + 1):
            for k in range(1, 2 * l + 2):
                norm, poly = _TABLE[(l, k - l - 1)]
                col = harmonic_index(l, k)
                for e, c in poly.items():
                    C[pos[e], col] = norm * c
                self.labels.append((l, k))
        self._coef = C
        self._exps = np.array(self._mono, dtype=np.int64).reshape(-1, 3)

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"HarmonicBasis(L={self.max_degree})"

    def _check(self, l, k):
        if not (0 <= l <= self.max_degree and 1 <= k <= 2 * l + 1):
            raise InvalidArgumentError(
                f"harmonic index (l={l}, k={k}) outside basis with L={self.max_degree}"
            )

    def _powers(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        L = self.max_degree
        pw = np.ones((3, L + 1, x.shape[0]))
        for d in range(1, L + 1):
            pw[:, d] = pw[:, d - 1] * x.T
        return pw

    def eval(self, x):
        """Matrix ``P[i, j] = Y_j(x_i)``, shape ``(n, size)``."""
        pw = self._powers(x)
        e = self._exps
        mono = pw[0, e[:, 0]] * pw[1, e[:, 1]] * pw[2, e[:, 2]]
        return mono.T @ self._coef

    def ambient_gradient(self, x):
        """Gradient in R^3 of the polynomial representatives, ``(n, size, 3)``."""
        pw = self._powers(x)
        e = self._exps
        n = pw.shape[2]
        out = np.empty((n, self.size, 3))
        for d in range(3):
            ed = e.copy()
            fac = ed[:, d].astype(float)
            ed[:, d] = np.maximum(ed[:, d] - 1, 0)
            mono = fac[:, None] * pw[0, ed[:, 0]] * pw[1, ed[:, 1]] * pw[2, ed[:, 2]]
            out[:, :, d] = mono.T @ self._coef
        return out

    def surface_gradient(self, x):
        """Tangential gradients ``(I - x x^T) grad P``, shape ``(n, size, 3)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = self.ambient_gradient(x)
        radial = np.einsum("nqd,nd->nq", g, x)
        return g - radial[:, :, None] * x[:, None, :]

    def harmonic_eval(self, l, k, x):
        self._check(l, k)
        v = self.eval(x)[:, harmonic_index(l, k)]
        return v if np.ndim(x) > 1 else float(v[0])

    def harmonic_surface_gradient(self, l, k, x):
        self._check(l, k)
        g = self.surface_gradient(x)[:, harmonic_index(l, k)]
        return g if np.ndim(x) > 1 else g[0]

    def moments(self):
        """Integrals of every basis function over S^2."""
        out = np.zeros(self.size)
        out[0] = math.sqrt(4.0 * math.pi)
        return out


def harmonic_moment(l, k):
    if l < 0 or not 1 <= k <= 2 * l + 1:
        raise InvalidArgumentError(f"invalid harmonic index (l={l}, k={k})")
    return math.sqrt(4.0 * math.pi) if l == 0 else 0.0
