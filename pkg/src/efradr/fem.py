"""Lagrange P1/P2 spaces on triangles, quadrature, and global assembly."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .sparse import as_csr

# --------------------------------------------------------------------------
# Quadrature on the reference triangle (0,0), (1,0), (0,1)
# --------------------------------------------------------------------------

# Symmetric rules given as orbits of barycentric coordinates:
#   ("c", None, w)      centroid
#   ("a", a, w)         (a, a, 1-2a) and its 3 permutations
#   ("b", (a, b), w)    (a, b, 1-a-b) and its 6 permutations
# Weights are normalized to sum to 1 before scaling by the reference area.
_ORBITS = {
    1: [("c", None, 1.0)],
    2: [("a", 1.0 / 6.0, 1.0 / 3.0)],
    3: [("b", (0.659027622374092, 0.231933368553031), 1.0 / 6.0)],
    4: [("a", 0.445948490915965, 0.223381589678011),
        ("a", 0.091576213509771, 0.109951743655322)],
    5: [("c", None, 0.225),
        ("a", 0.470142064105115, 0.132394152788506),
        ("a", 0.101286507323456, 0.125939180544827)],
    6: [("a", 0.249286745170910, 0.116786275726379),
        ("a", 0.063089014491502, 0.050844906370207),
        ("b", (0.053145049844817, 0.310352451033784), 0.082851075618374)],
    # 13-point rule; the centroid weight is negative
    7: [("c", None, -0.149570044467682),
        ("a", 0.260345966079040, 0.175615257433208),
        ("a", 0.065130102902216, 0.053347235608838),
        ("b", (0.048690315425316, 0.312865496004874), 0.077113760890257)],
    8: [("c", None, 0.144315607677787),
        ("a", 0.459292588292723, 0.095091634267285),
        ("a", 0.170569307751760, 0.103217370534718),
        ("a", 0.050547228317031, 0.032458497623198),
        ("b", (0.008394777409958, 0.263112829634638), 0.027230314174435)],
}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray   # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,), sum 1/2
    degree: int


@lru_cache(maxsize=None)
def quadrature_rule(exactness_degree):
    """Symmetric rule on the reference triangle exact for polynomials of the
    given total degree (1 to 8)."""
    if exactness_degree not in _ORBITS:
        raise ValueError(f"no quadrature rule of degree {exactness_degree}; "
                         f"supported: 1..{max(_ORBITS)}")
    bary, w = [], []
    for kind, vals, wt in _ORBITS[exactness_degree]:
        if kind == "c":
            pts = [(1 / 3, 1 / 3, 1 / 3)]
        elif kind == "a":
            a = vals
            pts = [(a, a, 1 - 2 * a), (a, 1 - 2 * a, a), (1 - 2 * a, a, a)]
        else:
            a, b = vals
            c = 1 - a - b
            pts = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
        bary.extend(pts)
        w.extend([wt] * len(pts))
    bary = np.array(bary)
    w = np.array(w)
    w = 0.5 * w / w.sum()
    points = bary[:, 1:].copy()
    points.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(points, w, exactness_degree)


# --------------------------------------------------------------------------
# Reference basis
# --------------------------------------------------------------------------

_GRAD_LAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
# P2 edge functions 4*l_a*l_b, local order: edge(0,1), edge(1,2), edge(2,0)
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def n_local_dofs(degree):
    if degree == 1:
        return 3
    if degree == 2:
        return 6
    raise ValueError(f"unsupported polynomial degree {degree}; use 1 or 2")


def tabulate_basis(degree, points):
    """Values ``(m, k)``, gradients ``(m, k, 2)`` and Hessians ``(m, k, 2, 2)``
    of the reference basis at ``points`` of shape ``(m, 2)``."""
    k = n_local_dofs(degree)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    x, y = points[:, 0], points[:, 1]
    lam = np.stack([1.0 - x - y, x, y], axis=1)  # (m, 3)
    vals = np.empty((m, k))
    grads = np.empty((m, k, 2))
    hess = np.zeros((m, k, 2, 2))
    G = _GRAD_LAMBDA
    if degree == 1:
        vals[:] = lam
        grads[:] = G[None]
        return vals, grads, hess
    for v in range(3):
        vals[:, v] = lam[:, v] * (2 * lam[:, v] - 1)
        grads[:, v] = (4 * lam[:, v] - 1)[:, None] * G[v]
        hess[:, v] = 4 * np.outer(G[v], G[v])
    for e, (a, b) in enumerate(_P2_EDGES):
        vals[:, 3 + e] = 4 * lam[:, a] * lam[:, b]
        grads[:, 3 + e] = 4 * (lam[:, b, None] * G[a] + lam[:, a, None] * G[b])
        hess[:, 3 + e] = 4 * (np.outer(G[a], G[b]) + np.outer(G[b], G[a]))
    return vals, grads, hess


def reference_basis(degree, point):
    """Basis values, gradients and second derivatives at a single reference
    point."""
    vals, grads, hess = tabulate_basis(degree, np.asarray(point, dtype=float)[None])
    return vals[0], grads[0], hess[0]


def reference_nodes(degree):
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        return verts
    mids = np.array([(verts[a] + verts[b]) / 2 for a, b in _P2_EDGES])
    return np.vstack([verts, mids])


# --------------------------------------------------------------------------
# Spaces and fields
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Tabulation:
    """Basis data for every element at the points of one quadrature rule."""
    rule: QuadratureRule
    phi: np.ndarray    # (nq, k)          reference = physical values
    grad: np.ndarray   # (ne, nq, k, 2)   physical gradients
    lap: np.ndarray    # (ne, nq, k)      physical Laplacians
    xq: np.ndarray     # (ne, nq, 2)      physical points
    wdet: np.ndarray   # (ne, nq)         weight * |det J|


class FESpace:
    """Continuous Lagrange space of degree 1 or 2 on a structured mesh.

    P2 dofs live on the lattice refined once, numbered ``J*(2n+1) + I`` for
    the point ``(I/(2n), J/(2n))``; P1 dofs coincide with mesh vertices.
    Dirichlet dofs are all dofs on the boundary of the square.
    """

    def __init__(self, mesh, degree=2):
        n_local_dofs(degree)
        self.mesh = mesh
        self.degree = degree
        n = mesh.n
        m = degree * n  # lattice intervals per side
        tri_lat = np.stack([mesh.triangles % (n + 1), mesh.triangles // (n + 1)], axis=-1) * degree
        if degree == 2:
            mids = np.stack([(tri_lat[:, a] + tri_lat[:, b]) // 2 for a, b in _P2_EDGES], axis=1)
            tri_lat = np.concatenate([tri_lat, mids], axis=1)
        self.cell_dofs = tri_lat[..., 1] * (m + 1) + tri_lat[..., 0]
        I = np.tile(np.arange(m + 1), m + 1)
        J = np.repeat(np.arange(m + 1), m + 1)
        self.dof_coords = np.column_stack([I, J]) / m
        self.n_dofs = (m + 1) ** 2
        self.dirichlet_dofs = np.flatnonzero((I == 0) | (I == m) | (J == 0) | (J == m))
        iv = np.tile(np.arange(n + 1), n + 1) * degree
        jv = np.repeat(np.arange(n + 1), n + 1) * degree
        self.vertex_dofs = jv * (m + 1) + iv
        for arr in (self.cell_dofs, self.dof_coords, self.dirichlet_dofs, self.vertex_dofs):
            arr.setflags(write=False)

        p = mesh.vertices[mesh.triangles]
        self._x0 = p[:, 0]
        self._jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
        self._det = np.linalg.det(self._jac)
        self._inv = np.linalg.inv(self._jac)
        self._tabs = {}
        self._pattern = None

    def __repr__(self):
        return f"FESpace(P{self.degree}, n={self.mesh.n}, n_dofs={self.n_dofs})"

    @property
    def n_cells(self):
        return self.cell_dofs.shape[0]

    @property
    def free_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    @property
    def cell_diameters(self):
        p = self.mesh.vertices[self.mesh.triangles]
        edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.linalg.norm(edges, axis=2).max(axis=1)

    def tabulate(self, quad_degree):
        tab = self._tabs.get(quad_degree)
        if tab is not None:
            return tab
        rule = quadrature_rule(quad_degree)
        phi, dphi, d2phi = tabulate_basis(self.degree, rule.points)
        invT = np.transpose(self._inv, (0, 2, 1))  # J^{-T}
        grad = np.einsum("eab,qkb->eqka", invT, dphi)
        # Laplacian = trace(J^{-T} H J^{-1})
        lap = np.einsum("eab,qkbc,eac->eqk", invT, d2phi, invT)
        xq = self._x0[:, None, :] + np.einsum("eab,qb->eqa", self._jac, rule.points)
        wdet = np.abs(self._det)[:, None] * rule.weights[None, :]
        tab = Tabulation(rule, phi, grad, lap, xq, wdet)
        self._tabs[quad_degree] = tab
        return tab

    def gradient_products(self, tab):
        """``grad(phi_i) . grad(phi_j)`` at the points of ``tab`` (cached),
        shape ``(ne, nq, k * k)``."""
        key = ("gg", tab.rule.degree)
        G = self._tabs.get(key)
        if G is None:
            G = np.einsum("eqia,eqja->eqij", tab.grad, tab.grad).reshape(
                tab.grad.shape[0], tab.grad.shape[1], -1)
            self._tabs[key] = G
        return G

    # default quadrature degrees
    @property
    def matrix_quad_degree(self):
        return 2 * self.degree

    @property
    def load_quad_degree(self):
        return 2 * self.degree + 2

    @property
    def error_quad_degree(self):
        return 2 * self.degree + 3

    def _csr_pattern(self):
        if self._pattern is None:
            cd = self.cell_dofs
            k = cd.shape[1]
            rows = np.repeat(cd, k, axis=1).ravel()
            cols = np.tile(cd, (1, k)).ravel()
            keys, inverse = np.unique(rows * self.n_dofs + cols, return_inverse=True)
            indices = (keys % self.n_dofs).astype(np.int32)
            counts = np.bincount(keys // self.n_dofs, minlength=self.n_dofs)
            indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
            self._pattern = (indptr, indices, inverse.ravel())
        return self._pattern

    def assemble_matrix(self, local):
        """Sum element matrices ``local[e, i, j]`` (test i, trial j) into CSR."""
        indptr, indices, inverse = self._csr_pattern()
        data = np.bincount(inverse, weights=np.asarray(local).ravel(), minlength=indices.size)
        return sp.csr_matrix((data, indices.copy(), indptr.copy()),
                             shape=(self.n_dofs, self.n_dofs))

    def assemble_vector(self, local):
        """Sum element vectors ``local[e, i]`` into a global vector."""
        return np.bincount(self.cell_dofs.ravel(), weights=np.asarray(local).ravel(),
                           minlength=self.n_dofs)


@dataclass(eq=False)
class FEField:
    space: FESpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.n_dofs,):
            raise ValueError(f"field has {self.values.shape} values, "
                             f"space has {self.space.n_dofs} dofs")

    def copy(self):
        return FEField(self.space, self.values.copy())

    def at_quadrature(self, tab):
        """Values at quadrature points, shape ``(ne, nq)``."""
        return self.values[self.space.cell_dofs] @ tab.phi.T

    def gradient_at_quadrature(self, tab):
        return np.einsum("ek,eqka->eqa", self.values[self.space.cell_dofs], tab.grad)

    def laplacian_at_quadrature(self, tab):
        return np.einsum("ek,eqk->eq", self.values[self.space.cell_dofs], tab.lap)


def zero_field(space):
    return FEField(space, np.zeros(space.n_dofs))


def interpolate(space, g):
    """Nodal interpolant of ``g(x, y)`` (vectorized over arrays)."""
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    vals = np.broadcast_to(np.asarray(g(x, y), dtype=float), x.shape)
    return FEField(space, vals.copy())


# --------------------------------------------------------------------------
# Assembly
# --------------------------------------------------------------------------

def mass_matrix(space, quad_degree=None):
    tab = space.tabulate(quad_degree or space.matrix_quad_degree)
    local = np.einsum("eq,qi,qj->eij", tab.wdet, tab.phi, tab.phi)
    return space.assemble_matrix(local)


def stiffness_matrix(space, weight=None, quad_degree=None):
    """``(weight grad u, grad w)``; ``weight`` is None or an array of values
    at the quadrature points, shape ``(ne, nq)``."""
    tab = space.tabulate(quad_degree or space.matrix_quad_degree)
    if weight is None:
        local = np.einsum("eq,eqia,eqja->eij", tab.wdet, tab.grad, tab.grad)
    else:
        # weighted matrices are rebuilt often: reuse the gradient products
        G = space.gradient_products(tab)
        w = tab.wdet * weight
        local = np.matmul(w[:, None, :], G).reshape(G.shape[0], tab.phi.shape[1], -1)
    return space.assemble_matrix(local)


def advection_matrix(space, b, quad_degree=None):
    """``(b . grad u, w)`` for a constant field ``b``."""
    tab = space.tabulate(quad_degree or space.matrix_quad_degree)
    bgrad = tab.grad @ np.asarray(b, dtype=float)  # (ne, nq, k)
    local = np.einsum("eq,qi,eqj->eij", tab.wdet, tab.phi, bgrad)
    return space.assemble_matrix(local)


def assemble_operator(space, mu, b, sigma_eff):
    """Matrix of ``mu (grad u, grad w) + (b . grad u, w) + sigma_eff (u, w)``
    before boundary conditions; rows are test functions."""
    tab = space.tabulate(space.matrix_quad_degree)
    bgrad = tab.grad @ np.asarray(b, dtype=float)
    local = (mu * np.einsum("eq,eqia,eqja->eij", tab.wdet, tab.grad, tab.grad)
             + np.einsum("eq,qi,eqj->eij", tab.wdet, tab.phi, bgrad)
             + sigma_eff * np.einsum("eq,qi,qj->eij", tab.wdet, tab.phi, tab.phi))
    return as_csr(space.assemble_matrix(local))


def load_from_values(space, values, tab):
    """``(g, phi_i)`` given ``g`` sampled at the points of ``tab``."""
    return space.assemble_vector(np.einsum("eq,eq,qi->ei", tab.wdet, values, tab.phi))


def assemble_load(space, g, quad_degree=None):
    """Vector of ``(g, phi_i)`` for ``g(x, y)`` vectorized over arrays."""
    tab = space.tabulate(quad_degree or space.load_quad_degree)
    vals = np.broadcast_to(np.asarray(g(tab.xq[..., 0], tab.xq[..., 1]), dtype=float),
                           tab.wdet.shape)
    return load_from_values(space, vals, tab)


def integrate(space, g, quad_degree=None):
    tab = space.tabulate(quad_degree or space.error_quad_degree)
    vals = np.broadcast_to(np.asarray(g(tab.xq[..., 0], tab.xq[..., 1]), dtype=float),
                           tab.wdet.shape)
    return float(np.sum(tab.wdet * vals))


def apply_dirichlet(A, rhs, dofs, values):
    """Impose ``u[dofs] = values`` by symmetric row/column elimination.

    The lift ``A[:, dofs] @ values`` moves to the right-hand side, constrained
    rows and columns become identity. Returns new ``(A, rhs)``.
    """
    A = as_csr(A)
    rhs = np.array(rhs, dtype=float)
    dofs = np.asarray(dofs, dtype=np.int64).ravel()
    n = A.shape[0]
    if dofs.size == 0:
        return A, rhs
    if dofs.min() < 0 or dofs.max() >= n:
        raise ValueError(f"Dirichlet dof out of range [0, {n})")
    g = np.zeros(n)
    g[dofs] = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    rhs = rhs - A @ g
    keep = np.ones(n)
    keep[dofs] = 0.0
    K = sp.diags(keep)
    A = as_csr(K @ A @ K + sp.diags(1.0 - keep))
    rhs[dofs] = g[dofs]
    return A, rhs


class DirichletSystem:
    """A fixed matrix with a fixed set of Dirichlet dofs, factored once.

    Equivalent to :func:`apply_dirichlet` followed by a solve, but only the
    free-free block is factored and reused for every right-hand side.
    """

    def __init__(self, A, dirichlet_dofs, n_dofs=None, solver=None, _maps=None):
        from .sparse import LUSolver

        A = as_csr(A)
        n = A.shape[0]
        self.A = A
        if _maps is None:
            mask = np.ones(n, dtype=bool)
            mask[dirichlet_dofs] = False
            free = np.flatnonzero(mask)
            fixed = np.asarray(dirichlet_dofs)
            # slice a matrix of positions once; later matrices with the same
            # pattern are restricted by indexing their data arrays
            pos = sp.csr_matrix((np.arange(1, A.nnz + 1, dtype=float), A.indices, A.indptr),
                                shape=A.shape)
            rows = pos[free]
            ff, fd = as_csr(rows[:, free]), as_csr(rows[:, fixed])
            _maps = (free, fixed, A.indptr, A.indices,
                     (ff.data.astype(np.int64) - 1, ff.indices, ff.indptr, ff.shape),
                     (fd.data.astype(np.int64) - 1, fd.indices, fd.indptr, fd.shape))
        self._maps = _maps
        self.free, self.fixed = _maps[0], _maps[1]
        self.A_ff = self._restrict(A, _maps[4])
        self.A_fd = self._restrict(A, _maps[5])
        self.solver = solver(self.A_ff) if solver is not None else LUSolver(self.A_ff)

    @staticmethod
    def _restrict(A, m):
        sel, indices, indptr, shape = m
        return sp.csr_matrix((A.data[sel], indices, indptr), shape=shape)

    def same_pattern(self, A, solver=None):
        """A new system for ``A``, which must share the sparsity pattern
        (stored entries, explicit zeros included) of this system's matrix."""
        A = as_csr(A)
        _, _, indptr, indices, _, _ = self._maps
        if not (np.array_equal(A.indptr, indptr) and np.array_equal(A.indices, indices)):
            raise ValueError("matrix does not share the sparsity pattern")
        return DirichletSystem(A, self.fixed, solver=solver, _maps=self._maps)

    @property
    def last_residual(self):
        return self.solver.last_residual

    def solve(self, rhs, boundary_values=0.0):
        n = self.A.shape[0]
        x = np.zeros(n)
        x[self.fixed] = boundary_values
        b = rhs[self.free] - self.A_fd @ x[self.fixed]
        x[self.free] = self.solver.solve(b)
        return x
