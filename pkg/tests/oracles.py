"""Independent reference computations used by the tests."""

import math

import numpy as np


def random_sphere(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def tangent_frame(x):
    """Two orthonormal tangent vectors at each row of ``x``."""
    a = np.where(np.abs(x[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    t1 = a - np.sum(a * x, axis=1, keepdims=True) * x
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(x, t1)
    return t1, t2


def geodesic_fd(f, x, t, h=1e-5):
    """Central difference of ``f`` along the great circles ``cos(s) x + sin(s) t``."""
    fp = f(np.cos(h) * x + np.sin(h) * t)
    fm = f(np.cos(h) * x - np.sin(h) * t)
    return (fp - fm) / (2 * h)


def geodesic_fd4(f, x, t, h=1e-3):
    """Fourth-order central difference along the same great circles."""
    g = lambda s: f(np.cos(s) * x + np.sin(s) * t)  # noqa: E731
    return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h)


def fd_gradient_error_scaled(f, grad, x, h=1e-3):
    """Max over probes of ``|fd - grad . t|`` divided by ``max |grad|``.

    For functions whose gradient spans many orders of magnitude over the
    probes (Lagrange functions far from their center) the per-probe ratio
    only measures rounding in the tail; this compares against the scale
    of the gradient field instead.
    """
    g = grad(x)
    scale = float(np.max(np.linalg.norm(g, axis=1)))
    worst = 0.0
    for t in tangent_frame(x):
        worst = max(worst, float(np.max(np.abs(geodesic_fd4(f, x, t, h) - np.sum(g * t, axis=1)))))
    return worst / scale


def fd_gradient_error(f, grad, x, h=1e-5):
    """Max over probes of ``|fd - grad . t| / |grad|`` for two tangent directions."""
    g = grad(x)
    scale = np.maximum(np.linalg.norm(g, axis=1), 1e-300)
    worst = 0.0
    for t in tangent_frame(x):
        fd = geodesic_fd(f, x, t, h)
        worst = max(worst, float(np.max(np.abs(fd - np.sum(g * t, axis=1)) / scale)))
    return worst


def gauss_legendre_integral(fn, n=400):
    """``2 pi int_{-1}^{1} fn(t) dt`` for zonal integrands, with the
    interval split at 1 - 1e-3 to resolve endpoint log singularities."""
    x, w = np.polynomial.legendre.leggauss(n)
    total = 0.0
    for a, b in ((-1.0, 0.0), (0.0, 0.9), (0.9, 0.999), (0.999, 1.0)):
        t = 0.5 * (b - a) * x + 0.5 * (b + a)
        total += 0.5 * (b - a) * np.sum(w * fn(t))
    return 2.0 * np.pi * total


def brute_ball(points, center, radius):
    d = np.arctan2(np.linalg.norm(np.cross(points, center), axis=1), points @ center)
    return np.nonzero(d <= radius)[0]


def exp_z_integral():
    # int_{S^2} e^z = 2 pi int_{-1}^{1} e^t dt
    return 2.0 * math.pi * (math.e - 1.0 / math.e)
