import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from efradr.fem import FESpace, advection_matrix, interpolate, zero_field
from efradr.mesh import build_structured_mesh
from efradr.stabilizers import (METHODS, RESIDUAL_METHODS, ResidualContext, StabConfig,
                                Stabilizer, stabilization_contribution, tau)

MU, B, SIGMA, DT = 1e-3, (2.0, 3.0), 1.0, 1e-2


@pytest.fixture(scope="module", params=[1, 2])
def space(request):
    return FESpace(build_structured_mesh(5), request.param)


def _ctx(space, f=lambda x, y: np.sin(3 * x) * y, u_prev=None):
    u_prev = u_prev or interpolate(space, lambda x, y: x * (1 - y))
    return ResidualContext(MU, B, SIGMA, DT, u_prev, f)


def test_tau_asgs():
    # 4 mu / h^2 + 2 |b| / h + sigma_eff, by hand:
    #   4e-5 / 0.0032 = 0.0125; 2 sqrt(13) / 0.0565685 = 127.4755; + 1001
    h = math.sqrt(2) / 25
    assert tau("asgs", h, 1e-5, math.sqrt(13), 1001.0) == pytest.approx(1 / 1128.488, rel=1e-5)
    assert tau("asgs", h, 1e-5, math.sqrt(13), 1001.0) == pytest.approx(8.861e-4, abs=5e-7)


def test_tau_supg():
    assert tau("supg", 0.01, 1e-5, 2.0, 0.0) == pytest.approx(0.005)


def test_tau_artificial_viscosity():
    assert tau("artificial_viscosity", 0.1, 1e-5, 2.0, 0.0, StabConfig(c_art=0.5)) == \
        pytest.approx(0.1)


@pytest.mark.parametrize("method", ["supg", "gls", "douglas_wang", "streamline_upwind"])
def test_tau_no_advection(method):
    assert tau(method, 0.1, 1e-3, 0.0, 1.0) == 0.0


@pytest.mark.parametrize("method", ["supg", "gls", "douglas_wang", "artificial_viscosity"])
def test_tau_linear_in_h(method):
    t1 = tau(method, 0.1, 1e-3, 3.0, 1.0)
    assert tau(method, 0.05, 1e-3, 3.0, 1.0) == pytest.approx(t1 / 2)
    assert tau(method, 1e-9, 1e-3, 3.0, 1.0) < 1e-7


def test_config_validation():
    with pytest.raises(ValueError):
        StabConfig("upwind")
    with pytest.raises(ValueError):
        StabConfig("supg", delta_supg=-1.0)
    with pytest.raises(ValueError):
        ResidualContext(MU, B, SIGMA, 0.0, None, None)


def test_none_is_zero(space):
    dA, drhs = stabilization_contribution(StabConfig("none"), _ctx(space), space)
    assert dA.nnz == 0 or abs(dA).max() == 0
    assert not drhs.any()


def test_zero_artificial_viscosity(space):
    dA, drhs = stabilization_contribution(StabConfig("artificial_viscosity", c_art=0.0),
                                          _ctx(space), space)
    assert dA.nnz == 0 or abs(dA).max() == 0
    assert not drhs.any()


def _manufactured(space, a=(0.3, -1.2, 0.7, 2.0, -0.5, 1.1)):
    """A field in the space and its exact L_t image, so that R(u) = 0."""
    c0, cx, cy, cxx, cxy, cyy = a if space.degree == 2 else a[:3] + (0.0, 0.0, 0.0)
    u = lambda x, y: c0 + cx * x + cy * y + cxx * x * x + cxy * x * y + cyy * y * y
    ux = lambda x, y: cx + 2 * cxx * x + cxy * y
    uy = lambda x, y: cy + cxy * x + 2 * cyy * y
    lap = 2 * cxx + 2 * cyy
    sig_t = SIGMA + 1 / DT
    Lu = lambda x, y: -MU * lap + B[0] * ux(x, y) + B[1] * uy(x, y) + sig_t * u(x, y)
    return interpolate(space, u), Lu


@pytest.mark.parametrize("method", RESIDUAL_METHODS)
def test_strong_consistency(space, method):
    u_star, Lu = _manufactured(space)
    # f_t = u_prev/dt + f with u_prev = 0 and f = L_t u*
    ctx = ResidualContext(MU, B, SIGMA, DT, zero_field(space), Lu)
    dA, drhs = stabilization_contribution(StabConfig(method), ctx, space)
    form = dA @ u_star.values - drhs
    assert np.abs(form).max() <= 1e-10 * max(1.0, np.abs(drhs).max())
    assert np.abs(drhs).max() > 1e-3  # the check is not vacuous


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.sampled_from(RESIDUAL_METHODS))
def test_strong_consistency_random_fields(coeffs, method):
    space = FESpace(build_structured_mesh(3), 2)
    u_star, Lu = _manufactured(space, tuple(coeffs))
    ctx = ResidualContext(MU, B, SIGMA, DT, zero_field(space), Lu)
    dA, drhs = stabilization_contribution(StabConfig(method), ctx, space)
    assert np.abs(dA @ u_star.values - drhs).max() <= 1e-10 * max(1.0, np.abs(drhs).max())


@pytest.mark.parametrize("method", ["artificial_viscosity", "streamline_upwind", "gls"])
def test_symmetric_psd(space, method):
    dA, drhs = stabilization_contribution(StabConfig(method), _ctx(space), space)
    D = dA.toarray()
    assert np.allclose(D, D.T, atol=1e-14 * np.abs(D).max())
    assert np.linalg.eigvalsh(D).min() > -1e-12 * np.abs(D).max()
    if method != "gls":
        assert not drhs.any()


def test_supg_matches_independent_pieces():
    # P1: L_t phi_j = b.grad phi_j + sigma_t phi_j, so
    # dA = tau (b.grad phi_j, b.grad phi_i) + tau sigma_t (phi_j, b.grad phi_i)
    space = FESpace(build_structured_mesh(4), 1)
    sig_t = SIGMA + 1 / DT
    t = tau("supg", space.mesh.h, MU, math.hypot(*B), sig_t)
    su = Stabilizer(StabConfig("streamline_upwind"), space, MU, B, SIGMA, DT).matrix
    supg = Stabilizer(StabConfig("supg"), space, MU, B, SIGMA, DT).matrix
    C = advection_matrix(space, B)
    assert abs(supg - (su + t * sig_t * C.T)).max() < 1e-12


@pytest.mark.parametrize("method", [m for m in METHODS if m not in ("none", "asgs")])
def test_linear_in_tau_constant(space, method):
    ctx = _ctx(space)
    A1, r1 = stabilization_contribution(StabConfig(method, c_art=0.5, delta_supg=1.0), ctx, space)
    A2, r2 = stabilization_contribution(StabConfig(method, c_art=1.0, delta_supg=2.0), ctx, space)
    assert abs(A2 - 2 * A1).max() <= 1e-12 * max(1.0, abs(A1).max())
    assert np.allclose(r2, 2 * r1, rtol=1e-12, atol=1e-14)


def test_asgs_sigma_toggle(space):
    ctx = _ctx(space)
    A1, _ = stabilization_contribution(StabConfig("asgs"), ctx, space)
    A2, _ = stabilization_contribution(StabConfig("asgs", use_sigma_eff=False), ctx, space)
    # a smaller reaction coefficient in tau means a larger tau
    assert abs(A2).max() > abs(A1).max()


def test_rhs_uses_previous_field(space):
    stab = Stabilizer(StabConfig("supg"), space, MU, B, SIGMA, DT)
    f = lambda x, y: np.zeros_like(x)
    u = interpolate(space, lambda x, y: x + y)
    r = stab.rhs(u, f)
    r_scaled = stab.rhs(interpolate(space, lambda x, y: 2 * (x + y)), f)
    assert np.allclose(r_scaled, 2 * r)
    assert np.abs(r).max() > 0
