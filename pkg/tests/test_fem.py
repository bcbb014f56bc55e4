from math import factorial

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from efradr.benchmark import exact_solution, forcing_term
from efradr.fem import (DirichletSystem, FESpace, apply_dirichlet, advection_matrix, assemble_load,
                        assemble_operator, integrate, interpolate, mass_matrix,
                        quadrature_rule, reference_basis, reference_nodes, stiffness_matrix)
from efradr.mesh import build_structured_mesh
from efradr.sparse import as_csr, solve

# Integral of forcing_term(x, y, 0) over the unit square from a composite
# 6-point Gauss-Legendre tensor rule on 800x800 cells (400x400 agrees to 4e-14).
FORCING_T0_INTEGRAL = 0.5411630390416646

unit_point = st.tuples(st.floats(0, 1), st.floats(0, 1)).filter(lambda p: p[0] + p[1] <= 1)


@pytest.fixture(scope="module", params=[1, 2])
def space(request):
    return FESpace(build_structured_mesh(6), request.param)


# ---- reference basis -----------------------------------------------------

@pytest.mark.parametrize("degree", [1, 2])
def test_lagrange_property(degree):
    nodes = reference_nodes(degree)
    for k, p in enumerate(nodes):
        vals, _, _ = reference_basis(degree, p)
        assert np.allclose(vals, np.eye(len(nodes))[k], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(unit_point, st.sampled_from([1, 2]))
def test_partition_of_unity(p, degree):
    vals, grads, hess = reference_basis(degree, p)
    assert vals.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(grads.sum(axis=0), 0.0, atol=1e-13)
    assert np.allclose(hess.sum(axis=0), 0.0, atol=1e-13)


def test_p2_barycenter():
    vals, _, _ = reference_basis(2, (1 / 3, 1 / 3))
    assert np.allclose(vals[:3], -1 / 9, atol=1e-15)
    assert np.allclose(vals[3:], 4 / 9, atol=1e-15)


def test_p1_has_no_curvature():
    _, _, hess = reference_basis(1, (0.2, 0.3))
    assert not hess.any()


@settings(max_examples=30, deadline=None)
@given(unit_point, st.sampled_from([1, 2]))
def test_derivatives_match_finite_differences(p, degree):
    eps = 1e-6
    v0, g0, h0 = reference_basis(degree, p)
    for a in range(2):
        dp = np.zeros(2)
        dp[a] = eps
        vp, gp, _ = reference_basis(degree, np.add(p, dp))
        vm, gm, _ = reference_basis(degree, np.subtract(p, dp))
        assert np.allclose((vp - vm) / (2 * eps), g0[:, a], atol=1e-8)
        assert np.allclose((gp - gm) / (2 * eps), h0[:, :, a], atol=1e-7)


def test_unsupported_degree():
    with pytest.raises(ValueError):
        reference_basis(3, (0.0, 0.0))
    with pytest.raises(ValueError):
        FESpace(build_structured_mesh(2), 3)


# ---- quadrature ----------------------------------------------------------

@pytest.mark.parametrize("degree", range(1, 9))
def test_rule_weights_and_exactness(degree):
    rule = quadrature_rule(degree)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-14)
    x, y = rule.points.T
    assert np.all(x >= 0) and np.all(y >= 0) and np.all(x + y <= 1)
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            exact = factorial(i) * factorial(j) / factorial(i + j + 2)
            assert (rule.weights * x**i * y**j).sum() == pytest.approx(exact, rel=1e-12)


def test_rule_examples():
    r2, r4 = quadrature_rule(2), quadrature_rule(4)
    assert (r2.weights * r2.points[:, 0]).sum() == pytest.approx(1 / 6, rel=1e-14)
    x, y = r4.points.T
    assert (r4.weights * x**2 * y**2).sum() == pytest.approx(1 / 180, rel=1e-12)


@pytest.mark.parametrize("degree", [0, 9])
def test_unsupported_rule(degree):
    with pytest.raises(ValueError):
        quadrature_rule(degree)


# ---- spaces --------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 3, 8])
def test_dof_counts(n):
    mesh = build_structured_mesh(n)
    assert FESpace(mesh, 1).n_dofs == (n + 1) ** 2
    assert FESpace(mesh, 2).n_dofs == (2 * n + 1) ** 2


def test_space_structure(space):
    assert np.unique(space.cell_dofs).size == space.n_dofs
    on_boundary = np.isclose(space.dof_coords, 0).any(axis=1) | \
        np.isclose(space.dof_coords, 1).any(axis=1)
    assert np.array_equal(np.flatnonzero(on_boundary), space.dirichlet_dofs)
    assert np.array_equal(np.sort(space.dirichlet_dofs), space.dirichlet_dofs)
    # vertex dofs sit on mesh vertices
    assert np.allclose(space.dof_coords[space.vertex_dofs], space.mesh.vertices)
    # each local node maps to the dof at its physical position
    nodes = reference_nodes(space.degree)
    p = space.mesh.vertices[space.mesh.triangles]
    phys = p[:, :1] + np.einsum("eka,nk->ena", np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]],
                                                          axis=1), nodes)
    assert np.allclose(space.dof_coords[space.cell_dofs], phys)


# ---- assembly ------------------------------------------------------------

def test_stiffness_annihilates_constants(space):
    A = assemble_operator(space, 1.0, (0.0, 0.0), 0.0)
    assert np.abs(A @ np.ones(space.n_dofs)).max() < 1e-12


def test_advection_annihilates_constants(space):
    A = assemble_operator(space, 0.0, (2.0, 3.0), 0.0)
    assert np.abs(A @ np.ones(space.n_dofs)).max() < 1e-12


def test_mass_total(space):
    A = assemble_operator(space, 0.0, (0.0, 0.0), 1.0)
    assert A.sum() == pytest.approx(1.0, rel=1e-13)


def test_operator_is_sum_of_parts(space):
    A = assemble_operator(space, 0.3, (2.0, -1.0), 4.0)
    B = 0.3 * stiffness_matrix(space) + advection_matrix(space, (2.0, -1.0)) + 4.0 * mass_matrix(space)
    assert abs(A - B).max() < 1e-12


def test_mass_spd(space):
    M = mass_matrix(space).toarray()
    assert np.allclose(M, M.T, atol=1e-15)
    assert np.linalg.eigvalsh(M).min() > 0


def test_stiffness_psd_with_constant_kernel(space):
    K = stiffness_matrix(space).toarray()
    assert np.allclose(K, K.T, atol=1e-14)
    ev = np.linalg.eigvalsh(K)
    assert ev.min() > -1e-12
    assert np.sum(np.abs(ev) < 1e-10) == 1  # one-dimensional kernel: the constants


def test_advection_interior_skew(space):
    C = advection_matrix(space, (2.0, 3.0)).toarray()
    interior = space.free_dofs
    # pairs whose supports avoid the boundary: both dofs interior
    Ci = C[np.ix_(interior, interior)]
    assert np.abs(Ci + Ci.T).max() <= 1e-12


@pytest.mark.parametrize("px, py", [(0, 0), (1, 0), (0, 2), (2, 1), (3, 2), (4, 3)])
def test_assembled_polynomial_integrals(px, py):
    space = FESpace(build_structured_mesh(3), 2)
    exact = 1 / ((px + 1) * (py + 1))
    val = integrate(space, lambda x, y: x**px * y**py, quad_degree=7)
    assert val == pytest.approx(exact, rel=1e-12)
    # load of a P2-exact polynomial against the partition of unity
    if px + py <= 6:
        assert assemble_load(space, lambda x, y: x**px * y**py, 6).sum() == \
            pytest.approx(exact, rel=1e-12)


def test_mass_integrates_products():
    space = FESpace(build_structured_mesh(4), 2)
    u = interpolate(space, lambda x, y: x * y)
    v = interpolate(space, lambda x, y: 1 + x)
    # int xy(1+x) = 1/4 + 1/6
    assert u.values @ (mass_matrix(space) @ v.values) == pytest.approx(1 / 4 + 1 / 6, rel=1e-13)


def test_load_zero_and_one(space):
    assert not assemble_load(space, lambda x, y: 0 * x).any()
    assert assemble_load(space, lambda x, y: np.ones_like(x)).sum() == pytest.approx(1.0, rel=1e-13)


def test_load_of_benchmark_forcing_matches_reference():
    space = FESpace(build_structured_mesh(200), 2)
    f0 = lambda x, y: forcing_term(x, y, 0.0, 1e-5, (2.0, 3.0), 1.0)
    assert assemble_load(space, f0, quad_degree=8).sum() == \
        pytest.approx(FORCING_T0_INTEGRAL, rel=1e-8)


# ---- Dirichlet conditions ------------------------------------------------

def test_all_dofs_constrained():
    A = as_csr(mass_matrix(FESpace(build_structured_mesh(2), 1)))
    rhs = np.random.default_rng(3).standard_normal(A.shape[0])
    A2, r2 = apply_dirichlet(A, rhs, np.arange(A.shape[0]), 0.0)
    assert np.array_equal(solve(A2, r2 + 0.0, tol=1e-10) if r2.any() else np.zeros_like(r2),
                          np.zeros_like(r2))
    assert abs(A2 - sp.identity(A.shape[0])).max() == 0


def test_no_dofs_constrained():
    A = as_csr(mass_matrix(FESpace(build_structured_mesh(2), 1)))
    rhs = np.arange(A.shape[0], dtype=float)
    A2, r2 = apply_dirichlet(A, rhs, [], [])
    assert abs(A2 - A).max() == 0
    assert np.array_equal(r2, rhs)


def test_two_by_two_constraint():
    A = as_csr(np.array([[2.0, 1.0], [1.0, 3.0]]))
    A2, r2 = apply_dirichlet(A, np.array([3.0, 4.0]), [1], [5.0])
    x = solve(A2, r2)
    assert x[1] == pytest.approx(5.0)
    # remaining equation 2 x0 + 1*5 = 3
    assert x[0] == pytest.approx(-1.0)
    assert np.allclose(A2.toarray(), A2.toarray().T)


def test_dirichlet_out_of_range():
    A = sp.identity(3, format="csr")
    with pytest.raises(ValueError):
        apply_dirichlet(A, np.zeros(3), [3], [1.0])


def test_dirichlet_preserves_spd(space):
    A = mass_matrix(space) + stiffness_matrix(space)
    A2, _ = apply_dirichlet(A, np.zeros(space.n_dofs), space.dirichlet_dofs, 1.0)
    M = A2.toarray()
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0


# ---- interpolation -------------------------------------------------------

def test_interpolate_constant(space):
    assert np.all(interpolate(space, lambda x, y: 2.5 + 0 * x).values == 2.5)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), unit_point)
def test_p1_reproduces_linears(a, b, c, ref):
    space = FESpace(build_structured_mesh(3), 1)
    g = lambda x, y: a + b * x + c * y
    u = interpolate(space, g)
    # evaluate inside an arbitrary cell via the basis
    e = 7
    vals, _, _ = reference_basis(1, ref)
    p = space.mesh.vertices[space.mesh.triangles[e]]
    x = p[0] + ref[0] * (p[1] - p[0]) + ref[1] * (p[2] - p[0])
    assert u.values[space.cell_dofs[e]] @ vals == pytest.approx(g(*x), abs=1e-12)


def test_interpolate_exact_solution_at_t0(space):
    u = interpolate(space, lambda x, y: exact_solution(x, y, 0.0, 1e-5))
    assert not u.values.any()


def test_dirichlet_system_same_pattern():
    space = FESpace(build_structured_mesh(4), 2)
    M, K = mass_matrix(space), stiffness_matrix(space)
    base = DirichletSystem(M + K, space.dirichlet_dofs)
    A2 = as_csr(M + 3.0 * K)
    rhs = np.linspace(0, 1, space.n_dofs)
    x_reused = base.same_pattern(A2).solve(rhs, 0.2)
    x_fresh = DirichletSystem(A2, space.dirichlet_dofs).solve(rhs, 0.2)
    assert np.allclose(x_reused, x_fresh, atol=1e-13)
    with pytest.raises(ValueError):
        base.same_pattern(as_csr(M[:, :] + sp.eye(space.n_dofs, k=space.n_dofs - 1)))


def test_weighted_stiffness_matches_direct_sum():
    space = FESpace(build_structured_mesh(3), 2)
    tab = space.tabulate(space.matrix_quad_degree)
    w = np.random.default_rng(1).random(tab.wdet.shape)
    local = np.einsum("eq,eqia,eqja->eij", tab.wdet * w, tab.grad, tab.grad)
    assert abs(stiffness_matrix(space, weight=w) - space.assemble_matrix(local)).max() < 1e-14
