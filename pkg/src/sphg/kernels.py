"""Restricted surface-spline kernels on S^2.

``phi_m(t) = (-1)^m (1 - t)^(m-1) log(1 - t)`` with ``t = x . y``.
All functions are vectorized over ``t`` (or over rows of point arrays).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class SurfaceSplineKernel:
    """Surface spline of order ``m >= 2``.

    ``clamp`` is the threshold on ``1 - t`` below which values and
    derivatives are replaced by their limit (0) at coincident points.
    """

    order: int = 3
    clamp: float = 1e-14

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise InvalidArgumentError("surface spline order must be an integer >= 2")

    @property
    def sign(self):
        return -1.0 if self.order % 2 else 1.0

    def _gap(self, t):
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise InvalidArgumentError("kernel argument must be finite")
        s = 1.0 - np.clip(t, -1.0, 1.0)
        small = s < self.clamp
        return np.where(small, 1.0, s), small

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        s, small = self._gap(t)
        m = self.order
        out = np.where(small, 0.0, self.sign * s ** (m - 1) * np.log(s))
        return out if out.ndim else float(out)

    def deriv(self, t):
        """d phi_m / dt = (-1)^(m+1) (1-t)^(m-2) [(m-1) log(1-t) + 1]."""
        s, small = self._gap(t)
        m = self.order
        out = np.where(small, 0.0, -self.sign * s ** (m - 2) * ((m - 1) * np.log(s) + 1.0))
        return out if out.ndim else float(out)

    def eval_and_deriv(self, t):
        """``(phi_m(t), phi_m'(t))`` sharing one logarithm."""
        s, small = self._gap(t)
        m = self.order
        log_s = np.log(s)
        pw = s ** (m - 2)
        val = np.where(small, 0.0, self.sign * pw * s * log_s)
        der = np.where(small, 0.0, -self.sign * pw * ((m - 1) * log_s + 1.0))
        return val, der

    def surface_gradient(self, zeta, tau):
        """Surface gradient at ``zeta`` of ``x -> phi_m(x . tau)``.

        Returns ``phi_m'(zeta . tau) (I - zeta zeta^T) tau`` in ambient
        coordinates.  Broadcasts over leading axes of ``zeta``/``tau``.
        """
        zeta = np.asarray(zeta, dtype=float)
        tau = np.asarray(tau, dtype=float)
        t = np.sum(zeta * tau, axis=-1)
        d = np.asarray(self.deriv(t))
        proj = tau - t[..., None] * zeta
        return d[..., None] * proj

    def matrix(self, A, B):
        """Kernel matrix ``phi_m(A @ B.T)`` for point arrays ``A``, ``B``."""
        return self.eval(np.asarray(A) @ np.asarray(B).T)

    def moment(self):
        """Integral of ``phi_m(x . zeta)`` over the sphere (any ``zeta``).

        With ``s = 1 - t``: ``2 pi (-1)^m int_0^2 s^(m-1) log s ds``.
        """
        m = self.order
        return 2.0 * math.pi * self.sign * (2.0**m / m) * (math.log(2.0) - 1.0 / m)


def kernel_eval(kernel, t):
    return kernel.eval(t)


def kernel_deriv(kernel, t):
    return kernel.deriv(t)


def kernel_surface_gradient(kernel, zeta, tau):
    return kernel.surface_gradient(zeta, tau)


def kernel_moment(kernel):
    return kernel.moment()
