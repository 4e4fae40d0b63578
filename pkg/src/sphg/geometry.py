"""Point sets on the unit sphere and their quasi-uniformity metrics.

Points are stored as ``(N, 3)`` float arrays of unit vectors.  A
:class:`PointSet` keeps the array together with a label and lazily
caches a KD-tree (on chordal distance) plus the separation radius /
mesh norm metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .errors import (
    DuplicatePointError,
    InvalidArgumentError,
    PointDataError,
    PointFormatError,
)

DUPLICATE_TOL = 1e-10
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def normalize(points):
    """Project nonzero vectors onto the unit sphere (last axis)."""
    p = np.asarray(points, dtype=float)
    nrm = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(nrm == 0.0):
        raise InvalidArgumentError("zero vector cannot be projected to the sphere")
    # rows already on the sphere are kept bit for bit, so saving and
    # reloading a point set reproduces it exactly
    return np.where(np.abs(nrm - 1.0) <= 1e-15, p, p / nrm)


def geodesic_distance(p, q):
    """Great-circle distance between unit vectors (broadcasts over rows).

    Uses ``atan2(|p x q|, p . q)``, which stays accurate near 0 and pi
    where ``arccos`` loses digits.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    cross = np.linalg.norm(np.cross(p, q), axis=-1)
    dot = np.sum(p * q, axis=-1)
    return np.arctan2(cross, dot)


def chord_to_arc(c):
    return 2.0 * np.arcsin(np.minimum(np.asarray(c) / 2.0, 1.0))


def arc_to_chord(r):
    return 2.0 * np.sin(np.minimum(np.asarray(r, dtype=float), math.pi) / 2.0)


@dataclass(frozen=True)
class PointSetMetrics:
    separation_radius: float
    mesh_norm: float
    mesh_ratio: float
    cardinality: int

    # short aliases matching the usual notation
    @property
    def q(self):
        return self.separation_radius

    @property
    def h(self):
        return self.mesh_norm

    @property
    def rho(self):
        return self.mesh_ratio


class PointSet:
    """An ordered set of distinct points on S^2.

    Parameters
    ----------
    points : array_like, shape (N, 3)
        Cartesian coordinates; rows are renormalized to unit length.
    label : str
        Free-form identifier carried into experiment logs.
    check_distinct : bool
        Reject sets with two points closer than ``DUPLICATE_TOL``.
    """

    def __init__(self, points, label="", check_distinct=True):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidArgumentError(f"expected shape (N, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise PointDataError("point coordinates must be finite")
        self.points = normalize(pts)
        self.points.setflags(write=False)
        self.label = label
        if check_distinct and len(self.points) > 1:
            self._check_distinct()

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"PointSet(N={len(self)}, label={self.label!r})"

    def __getitem__(self, idx):
        return self.points[idx]

    def _check_distinct(self):
        d, j = self.tree.query(self.points, k=2)
        arc = chord_to_arc(d[:, 1])
        i = int(np.argmin(arc))
        if arc[i] < DUPLICATE_TOL:
            raise DuplicatePointError(min(i, j[i, 1]), max(i, j[i, 1]), arc[i])

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    @cached_property
    def nearest_neighbor_distance(self):
        """Geodesic distance from every point to its nearest other point."""
        d, _ = self.tree.query(self.points, k=2)
        return chord_to_arc(d[:, 1])

    def metrics(self, candidate_density=100):
        return compute_metrics(self, candidate_density)

    def ball(self, center, radius):
        return ball_query(self, center, radius)


def fibonacci_nodes(n):
    """Golden-angle spiral lattice with ``n`` points.

    Point ``i`` sits at height ``z = 1 - (2i + 1)/n`` and longitude
    ``2 pi i / golden``.  ``n == 1`` returns the north pole.
    """
    n = int(n)
    if n < 1:
        raise InvalidArgumentError("fibonacci_nodes needs n >= 1")
    if n == 1:
        return PointSet([[0.0, 0.0, 1.0]], label="fibonacci-1")
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    lon = 2.0 * math.pi * np.mod(i / GOLDEN, 1.0)
    pts = np.column_stack([r * np.cos(lon), r * np.sin(lon), z])
    return PointSet(pts, label=f"fibonacci-{n}", check_distinct=False)


def _icosahedron():
    t = GOLDEN
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return normalize(v), f


def _prime_factors(n):
    out, p = [], 2
    while n > 1:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    return out


def _subdivide(verts, faces, p):
    """Split every spherical triangle into p^2 pieces and re-project."""
    # barycentric lattice (i, j) with i + j <= p, local index lookup
    lattice = [(i, j) for i in range(p + 1) for j in range(p + 1 - i)]
    local = {ij: k for k, ij in enumerate(lattice)}
    bary = np.array([(p - i - j, i, j) for i, j in lattice], dtype=float) / p

    new_pts = []
    gid = {}
    face_maps = np.empty((len(faces), len(lattice)), dtype=np.int64)
    count = len(verts)
    new_pts.append(verts)
    for fi, (a, b, c) in enumerate(faces):
        corners = (a, b, c)
        for k, (i, j) in enumerate(lattice):
            w = (p - i - j, i, j)
            nz = [(corners[s], w[s]) for s in range(3) if w[s] > 0]
            if len(nz) == 1:
                face_maps[fi, k] = nz[0][0]
                continue
            # canonical key shared by neighbouring faces
            key = tuple(sorted(nz))
            g = gid.get(key)
            if g is None:
                pt = bary[k] @ verts[[a, b, c]]
                new_pts.append((pt / np.linalg.norm(pt))[None, :])
                g = gid[key] = count
                count += 1
            face_maps[fi, k] = g
    out_verts = np.vstack(new_pts)

    tris = []
    for i in range(p):
        for j in range(p - i):
            tris.append((local[(i, j)], local[(i + 1, j)], local[(i, j + 1)]))
            if i + j < p - 1:
                tris.append(
                    (local[(i + 1, j)], local[(i + 1, j + 1)], local[(i, j + 1)])
                )
    tris = np.array(tris)
    out_faces = face_maps[:, tris].reshape(-1, 3)
    return out_verts, out_faces


def icosahedral_nodes(level=None, *, frequency=None):
    """Vertices of a subdivided icosahedron projected to the sphere.

    ``level`` gives the classic recursive bisection (frequency
    ``2**level``, ``N = 10 * 4**level + 2``).  ``frequency`` allows any
    geodesic frequency ``n`` (``N = 10 n^2 + 2``); it is applied as a
    sequence of prime-factor subdivisions, so powers of two reproduce the
    recursive construction exactly.
    """
    if (level is None) == (frequency is None):
        raise InvalidArgumentError("give exactly one of level or frequency")
    if level is not None:
        if int(level) < 0:
            raise InvalidArgumentError("level must be >= 0")
        frequency = 2 ** int(level)
    frequency = int(frequency)
    if frequency < 1:
        raise InvalidArgumentError("frequency must be >= 1")
    verts, faces = _icosahedron()
    for p in _prime_factors(frequency):
        verts, faces = _subdivide(verts, faces, p)
    return PointSet(verts, label=f"icosahedral-{len(verts)}", check_distinct=False)


def icosahedral_frequency(n_points):
    """Frequency ``f`` with ``10 f^2 + 2 == n_points`` or raise."""
    f = int(round(math.sqrt((n_points - 2) / 10.0)))
    if f < 1 or 10 * f * f + 2 != n_points:
        raise InvalidArgumentError(f"{n_points} is not an icosahedral node count")
    return f


def load_points(path, label=None):
    """Read a whitespace-separated ``x y z`` point file.

    Blank lines and lines starting with ``#`` are skipped.  Rows are
    renormalized; duplicate rows raise :class:`DuplicatePointError`.
    """
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 3:
                raise PointFormatError(
                    f"expected 3 values, found {len(parts)}", lineno
                )
            try:
                xyz = [float(v) for v in parts]
            except ValueError as exc:
                raise PointFormatError(str(exc), lineno) from None
            if not all(math.isfinite(v) for v in xyz):
                raise PointDataError(f"line {lineno}: non-finite coordinate")
            if xyz == [0.0, 0.0, 0.0]:
                raise PointDataError(f"line {lineno}: zero vector")
            rows.append(xyz)
    if not rows:
        raise PointFormatError(f"{path}: no points found")
    return PointSet(np.array(rows), label=label or path.stem)


def save_points(points, path, header=None):
    pts = points.points if isinstance(points, PointSet) else np.asarray(points)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in str(header).splitlines():
                fh.write(f"# {line}\n")
        for x, y, z in pts:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")


def compute_metrics(X, candidate_density=100):
    """Separation radius, estimated mesh norm and mesh ratio of ``X``.

    ``q_X`` is exact (nearest-neighbour search).  ``h_X`` is the largest
    distance from a Fibonacci candidate set of ``candidate_density * N``
    points to ``X``; it can only underestimate the true mesh norm.
    """
    n = len(X)
    if n < 2:
        raise InvalidArgumentError("metrics need at least two points")
    q = 0.5 * float(np.min(X.nearest_neighbor_distance))
    cand = fibonacci_nodes(max(int(candidate_density) * n, 2)).points
    d, _ = X.tree.query(cand, k=1)
    h = float(np.max(chord_to_arc(d)))
    h = max(h, q)
    return PointSetMetrics(q, h, h / q, n)


def mesh_norm_exact(X):
    """Exact mesh norm: largest circumradius of the spherical Delaunay
    triangles, read off the convex hull of ``X``.

    Needs at least four points not on a common great circle.
    """
    if len(X) < 4:
        raise InvalidArgumentError("exact mesh norm needs at least four points")
    tri = X.points[ConvexHull(X.points).simplices]
    c = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    c = normalize(c)
    c *= np.sign(np.sum(c * tri[:, 0], axis=1))[:, None]
    return float(np.max(geodesic_distance(c, tri[:, 0])))


def ball_query(X, center, radius):
    """Indices of points within geodesic ``radius`` of ``center`` (sorted)."""
    if radius < 0:
        raise InvalidArgumentError("radius must be nonnegative")
    center = normalize(center)
    if radius >= math.pi:
        return np.arange(len(X))
    # padded chordal search, then an exact filter with the same distance
    # function a linear scan would use
    chord = float(arc_to_chord(radius)) * (1.0 + 1e-9) + 1e-12
    cand = np.array(X.tree.query_ball_point(center, chord), dtype=np.int64)
    if cand.size == 0:
        return cand
    cand.sort()
    keep = geodesic_distance(X.points[cand], center) <= radius
    return cand[keep]


def icosahedral_group():
    """The 120 orthogonal maps preserving the reference icosahedron."""
    verts, faces = _icosahedron()
    a, b = verts[faces[0, 0]], verts[faces[0, 1]]
    src = np.column_stack([a, b, np.cross(a, b)])
    src_inv = np.linalg.inv(src)
    dots = verts @ verts.T
    mats = []
    for i in range(12):
        for j in range(12):
            if i == j or abs(dots[i, j] - dots[faces[0, 0], faces[0, 1]]) > 1e-9:
                continue
            c, d = verts[i], verts[j]
            for sgn in (1.0, -1.0):
                R = np.column_stack([c, d, sgn * np.cross(c, d)]) @ src_inv
                if np.allclose(R @ R.T, np.eye(3), atol=1e-12):
                    mats.append(R)
    return np.array(mats)


def symmetry_orbits(X, group=None, tol=1e-9):
    """Orbit label per point if ``X`` is invariant under ``group``, else None.

    ``group`` defaults to the full icosahedral group in the orientation
    used by :func:`icosahedral_nodes`.
    """
    group = icosahedral_group() if group is None else group
    pts = X.points
    n = len(pts)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    chord_tol = float(arc_to_chord(tol))
    for R in group:
        d, j = X.tree.query(pts @ R.T, k=1)
        if np.max(d) > chord_tol:
            return None
        for i in np.flatnonzero(j != np.arange(n)):
            ri, rj = find(i), find(j[i])
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels
