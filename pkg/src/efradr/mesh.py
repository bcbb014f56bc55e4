"""Structured triangulations of the unit square."""

from dataclasses import dataclass, field
import math

import numpy as np


@dataclass(frozen=True, eq=False)
class StructuredTriMesh:
    """``n x n`` sub-squares of (0,1)^2, each cut along its lower-left to
    upper-right diagonal.

    Vertex ``(i/n, j/n)`` has index ``j*(n+1) + i``. Triangles are stored
    counter-clockwise.
    """

    n: int
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_vertex_flags: np.ndarray = field(repr=False)

    @property
    def h(self):
        """Longest edge (the diagonal), sqrt(2)/n."""
        return math.sqrt(2.0) * self.h_min

    @property
    def h_min(self):
        """Shortest edge, 1/n."""
        return 1.0 / self.n

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def build_structured_mesh(n):
    """Build the ``n x n`` structured triangulation of the unit square."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"n must be an integer, got {n!r}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    n = int(n)

    ticks = np.arange(n + 1) / n
    X, Y = np.meshgrid(ticks, ticks)  # row j, column i
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    # interleave so the two halves of a square are adjacent
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    ii = np.tile(np.arange(n + 1), n + 1)
    jj = np.repeat(np.arange(n + 1), n + 1)
    boundary = (ii == 0) | (ii == n) | (jj == 0) | (jj == n)

    for arr in (vertices, triangles, boundary):
        arr.setflags(write=False)
    return StructuredTriMesh(n, vertices, triangles, boundary)


def local_peclet(mesh, b_inf, mu):
    """Local Peclet number ``||b||_inf * h / (2 mu)`` with ``h = sqrt(2)/n``."""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    return b_inf * mesh.h / (2.0 * mu)
