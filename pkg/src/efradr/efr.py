"""Evolve-filter-relax: Helmholtz filter, Van Cittert deconvolution, the
deconvolution indicator and the relaxation update."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .fem import DirichletSystem, FEField, mass_matrix, stiffness_matrix
from .sparse import CGSolver, SolverError, StageError

INDICATOR_MODES = ("clip", "normalize")


@dataclass(frozen=True)
class EFRConfig:
    delta: float
    N: int = 0
    chi: float = 1.0
    indicator_mode: str = "clip"

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a nonnegative integer, got {self.N}")
        if not 0.0 <= self.chi <= 1.0:
            raise ValueError(f"chi must lie in [0, 1], got {self.chi}")
        if self.indicator_mode not in INDICATOR_MODES:
            raise ValueError(f"unknown indicator mode {self.indicator_mode!r}")


class HelmholtzFilter:
    """Discrete filter ``(vbar, w) + delta^2 (a grad vbar, grad w) = (v, w)``
    on one space.

    The boundary trace of ``vbar`` is fixed (to the trace of ``v`` unless
    given). The ``a = 1`` system is factored once; indicator-weighted systems
    change every call and are solved with preconditioned CG.
    """

    def __init__(self, space, delta):
        if delta < 0:
            raise ValueError(f"delta must be >= 0, got {delta}")
        self.space = space
        self.delta = float(delta)
        self.mass = mass_matrix(space)
        self._stiff = None
        self._plain = None
        self.last_residual = 0.0
        self.last_iterations = 0
        self.applications = 0

    @property
    def stiffness(self):
        if self._stiff is None:
            self._stiff = stiffness_matrix(self.space)
        return self._stiff

    def matrix(self, a=None):
        """Filter matrix before boundary conditions; ``a`` is a nodal field
        (values in [0, 1]) or None for ``a = 1``.

        Every filter matrix keeps the stored pattern of the mass matrix, so
        the Dirichlet restriction can be reused.
        """
        if a is None:
            K = self.stiffness
        else:
            tab = self.space.tabulate(self.space.matrix_quad_degree)
            # P2 interpolation can leave [0, 1] between nodes
            aq = np.clip(a.at_quadrature(tab), 0.0, 1.0)
            K = stiffness_matrix(self.space, weight=aq)
        return sp.csr_matrix((self.mass.data + self.delta**2 * K.data,
                              self.mass.indices, self.mass.indptr), shape=self.mass.shape)

    def apply(self, v, a=None, boundary_values=None):
        self.applications += 1
        if self.delta == 0.0:
            self.last_residual = 0.0
            return v.copy()
        dofs = self.space.dirichlet_dofs
        g = v.values[dofs] if boundary_values is None else boundary_values
        rhs = self.mass @ v.values
        if self._plain is None:
            self._plain = DirichletSystem(self.matrix(), dofs)
        if a is None:
            system = self._plain
            self.last_iterations = 0
        else:
            system = self._plain.same_pattern(self.matrix(a), solver=CGSolver)
        x = system.solve(rhs, g)
        self.last_residual = system.last_residual
        if a is not None:
            self.last_iterations = system.solver.last_iterations
        return FEField(self.space, x)


def helmholtz_filter(v, delta, a_field=None, boundary_values=None, filt=None):
    """Filter ``v`` with radius ``delta``; ``a_field`` None means ``a = 1``."""
    filt = filt or HelmholtzFilter(v.space, delta)
    return filt.apply(v, a_field, boundary_values)


def van_cittert(v, delta, N, filt=None):
    """``D_N F v`` with ``D_N = sum_{k<=N} (I - F)^k``, using exactly ``N + 1``
    filter applications."""
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    filt = filt or HelmholtzFilter(v.space, delta)
    term = filt.apply(v)
    total = term.values.copy()
    for _ in range(N):
        term = FEField(v.space, term.values - filt.apply(term).values)
        total += term.values
    return FEField(v.space, total)


def indicator(v, delta, N, mode="clip", filt=None):
    """Nodal indicator ``|v - D_N F v|`` forced into [0, 1]."""
    if mode not in INDICATOR_MODES:
        raise ValueError(f"unknown indicator mode {mode!r}")
    raw = np.abs(v.values - van_cittert(v, delta, N, filt).values)
    if mode == "normalize":
        peak = raw.max()
        if peak > 0:
            raw = raw / peak
    return FEField(v.space, np.clip(raw, 0.0, 1.0))


def relax(v, v_bar, chi):
    if v.space is not v_bar.space:
        raise ValueError("relax needs fields on the same space")
    if not 0.0 <= chi <= 1.0:
        raise ValueError(f"chi must lie in [0, 1], got {chi}")
    return FEField(v.space, (1.0 - chi) * v.values + chi * v_bar.values)


class EFRStep(NamedTuple):
    u: FEField
    v: FEField
    v_bar: FEField
    a: FEField


def efr_step(u_n, t_next, config, evolve, filt=None):
    """One evolve-filter-relax step.

    ``evolve`` is an :class:`~efradr.simulation.EvolveOperator` (Galerkin, no
    stabilization). Returns ``EFRStep(u, v, v_bar, a)``; solver failures are
    re-raised as :class:`StageError` naming the stage.
    """
    space = u_n.space
    if filt is None or filt.delta != config.delta:
        filt = HelmholtzFilter(space, config.delta)
    try:
        v = evolve.step(u_n, t_next)
    except SolverError as exc:
        raise StageError("evolve", exc) from exc
    if config.delta == 0.0:
        # vbar = v, so any relaxation returns v (exactly, not up to rounding)
        return EFRStep(v.copy(), v, v.copy(), FEField(space, np.zeros(space.n_dofs)))
    try:
        a = indicator(v, config.delta, config.N, config.indicator_mode, filt)
    except SolverError as exc:
        raise StageError("indicator", exc) from exc
    try:
        v_bar = filt.apply(v, a, v.values[space.dirichlet_dofs])
    except SolverError as exc:
        raise StageError("filter", exc) from exc
    return EFRStep(relax(v, v_bar, config.chi), v, v_bar, a)
