"""Residual-based and artificial-viscosity stabilization terms.

Every term is written as ``b_s(u, w)`` added to the left-hand side of the
backward Euler system. With the quasi-static operator

    L_t u = -mu lap(u) + b . grad(u) + (sigma + 1/dt) u,
    R(u)  = f_t - L_t u,   f_t = u_prev / dt + f,

the strongly consistent methods read ``b_s(u, w) = -(tau R(u), T w)_K`` with
test operator ``T``:

    supg          T w = b . grad(w)
    gls           T w = L_t w
    douglas_wang  T w = -L_t* w = mu lap(w) + b . grad(w) - (sigma + 1/dt) w
    asgs          same as douglas_wang, different tau

so the matrix part is ``tau (L_t phi_j, T phi_i)_K`` and the right-hand side
part is ``tau (f_t, T phi_i)_K``.
"""

from dataclasses import dataclass

import numpy as np

from .fem import FEField
from .sparse import as_csr

METHODS = ("none", "artificial_viscosity", "streamline_upwind", "supg", "gls",
           "douglas_wang", "asgs")
RESIDUAL_METHODS = ("supg", "gls", "douglas_wang", "asgs")


@dataclass(frozen=True)
class StabConfig:
    method: str = "none"
    c_art: float = 0.5
    delta_supg: float = 1.0
    use_sigma_eff: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown stabilization method {self.method!r}")
        if self.c_art < 0 or self.delta_supg < 0:
            raise ValueError("stabilization constants must be nonnegative")

    @property
    def constant(self):
        """The tau constant of the selected method, or None."""
        if self.method == "artificial_viscosity":
            return self.c_art
        if self.method in ("streamline_upwind", "supg", "gls", "douglas_wang"):
            return self.delta_supg
        return None


@dataclass
class ResidualContext:
    mu: float
    b: tuple
    sigma: float
    dt: float
    u_prev: FEField
    f: object  # f(x, y) at the new time level

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def tau(method, h_K, mu, b_norm, sigma_eff, config=None):
    """Element stabilization parameter; ``h_K`` may be an array."""
    config = config or StabConfig(method)
    h_K = np.asarray(h_K, dtype=float)
    if method == "none":
        return np.zeros_like(h_K)[()]
    if method == "artificial_viscosity":
        return (config.c_art * h_K * b_norm)[()]
    if method == "asgs":
        return 1.0 / (4.0 * mu / h_K**2 + 2.0 * b_norm / h_K + sigma_eff)
    if method in ("streamline_upwind", "supg", "gls", "douglas_wang"):
        if b_norm == 0:
            return np.zeros_like(h_K)[()]
        return (config.delta_supg * h_K / b_norm)[()]
    raise ValueError(f"unknown stabilization method {method!r}")


class Stabilizer:
    """Precomputed stabilization matrix and right-hand-side tables for one
    space and one set of coefficients."""

    def __init__(self, config, space, mu, b, sigma, dt):
        self.config = config
        self.space = space
        self.b = np.asarray(b, dtype=float)
        self.sigma_t = sigma + 1.0 / dt
        self.dt = dt
        b_norm = float(np.linalg.norm(self.b))
        sigma_tau = self.sigma_t if config.use_sigma_eff else sigma
        self.tau = np.broadcast_to(
            tau(config.method, space.cell_diameters, mu, b_norm, sigma_tau, config),
            (space.n_cells,))
        self.mu = mu
        self._rhs_tab = None
        self._rhs_weights = None

        m = config.method
        if m == "none" or not np.any(self.tau):
            self.matrix = as_csr(space.assemble_matrix(
                np.zeros((space.n_cells,) + (space.cell_dofs.shape[1],) * 2)))
            self.residual_based = False
            return
        tab = space.tabulate(space.matrix_quad_degree)
        w = tab.wdet * self.tau[:, None]
        if m == "artificial_viscosity":
            local = np.einsum("eq,eqia,eqja->eij", w, tab.grad, tab.grad)
        elif m == "streamline_upwind":
            bg = tab.grad @ self.b
            local = np.einsum("eq,eqi,eqj->eij", w, bg, bg)
        else:
            local = np.einsum("eq,eqi,eqj->eij", w, self._test_op(tab), self._trial_op(tab))
        self.matrix = as_csr(space.assemble_matrix(local))
        self.residual_based = m in RESIDUAL_METHODS
        if self.residual_based:
            self._rhs_tab = space.tabulate(space.load_quad_degree)
            self._rhs_weights = (self._rhs_tab.wdet * self.tau[:, None])[..., None] \
                * self._test_op(self._rhs_tab)

    def _trial_op(self, tab):
        """L_t applied to every basis function, ``(ne, nq, k)``."""
        return (-self.mu * tab.lap + tab.grad @ self.b + self.sigma_t * tab.phi[None])

    def _test_op(self, tab):
        m = self.config.method
        bg = tab.grad @ self.b
        if m == "supg":
            return bg
        if m == "gls":
            return self._trial_op(tab)
        # douglas_wang / asgs: -L_t* w
        return self.mu * tab.lap + bg - self.sigma_t * tab.phi[None]

    @property
    def rhs_tabulation(self):
        return self._rhs_tab

    def rhs_from_values(self, f_t_values):
        """``tau (f_t, T phi_i)_K`` from ``f_t`` at the load quadrature points."""
        if not self.residual_based:
            return np.zeros(self.space.n_dofs)
        return self.space.assemble_vector(np.einsum("eq,eqi->ei", f_t_values, self._rhs_weights))

    def rhs(self, u_prev, f):
        """Right-hand-side part for the previous field and forcing ``f(x, y)``."""
        if not self.residual_based:
            return np.zeros(self.space.n_dofs)
        tab = self._rhs_tab
        fv = np.broadcast_to(np.asarray(f(tab.xq[..., 0], tab.xq[..., 1]), dtype=float),
                             tab.wdet.shape)
        return self.rhs_from_values(u_prev.at_quadrature(tab) / self.dt + fv)


def stabilization_contribution(config, ctx, space):
    """``(dA, drhs)`` such that adding them to the evolve system realizes the
    stabilization term on its left-hand side."""
    stab = Stabilizer(config, space, ctx.mu, ctx.b, ctx.sigma, ctx.dt)
    return stab.matrix, stab.rhs(ctx.u_prev, ctx.f)
