"""Backward Euler time stepping for Galerkin, stabilized and EFR runs."""

from dataclasses import dataclass, field
import math
import time as _time

import numpy as np

from .efr import EFRConfig, HelmholtzFilter, efr_step
from .fem import (DirichletSystem, FEField, assemble_operator, interpolate,
                  load_from_values, mass_matrix)
from .sparse import SolverError, StageError, as_csr
from .stabilizers import StabConfig, Stabilizer


@dataclass(frozen=True)
class ADRProblem:
    """``du/dt - mu lap(u) + div(b u) + sigma u = f`` on the unit square with
    ``u = u_D`` on the whole boundary.

    ``f(x, y, t)``, ``u_D(x, y, t)`` and ``u0(x, y)`` are vectorized over
    arrays. ``exact`` is optional and only used for reporting.
    """
    mu: float
    b: tuple
    sigma: float
    f: object
    u_D: object
    u0: object
    T: float
    g: object = None
    exact: object = None

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.T <= 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.g is not None:
            raise ValueError("Neumann data is not supported: the whole boundary is Dirichlet")


@dataclass(frozen=True)
class TimeConfig:
    dt: float
    n_steps: int

    @classmethod
    def from_final_time(cls, T, dt):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        n = int(round(T / dt))
        if n < 1 or abs(n * dt - T) > 1e-12:
            raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
        return cls(dt, n)

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps < 1:
            raise ValueError("need dt > 0 and n_steps >= 1")

    @property
    def T(self):
        return self.n_steps * self.dt

    def t(self, n):
        return n * self.dt


class RunError(RuntimeError):
    def __init__(self, step, stage, residual, cause):
        super().__init__(f"step {step} ({stage}) failed: {cause}")
        self.step = step
        self.stage = stage
        self.residual = residual
        self.cause = cause


@dataclass(frozen=True)
class RunResult:
    u: FEField
    snapshots: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.diagnostics)


class EvolveOperator:
    """The backward Euler system of one run, assembled and factored once.

    ``(1/dt)(u, w) + b(u, w) [+ b_s(u, w)] = (1/dt)(u_prev, w) + (f, w)``
    """

    def __init__(self, problem, space, dt, stab=None):
        self.problem = problem
        self.space = space
        self.dt = dt
        self.stab_config = stab or StabConfig("none")
        self.mass = mass_matrix(space)
        A = assemble_operator(space, problem.mu, problem.b, problem.sigma + 1.0 / dt)
        self.stabilizer = None
        if self.stab_config.method != "none":
            self.stabilizer = Stabilizer(self.stab_config, space, problem.mu, problem.b,
                                         problem.sigma, dt)
            A = as_csr(A + self.stabilizer.matrix)
        self.matrix = A
        self.system = DirichletSystem(A, space.dirichlet_dofs)
        self.load_tab = space.tabulate(space.load_quad_degree)
        self._bx = space.dof_coords[space.dirichlet_dofs]
        self._split = None
        if hasattr(problem.f, "spatial_parts"):
            tab = self.load_tab
            parts = [np.broadcast_to(np.asarray(s, dtype=float), tab.wdet.shape)
                     for s in problem.f.spatial_parts(tab.xq[..., 0], tab.xq[..., 1])]
            self._split = (parts, [load_from_values(space, s, tab) for s in parts])

    @property
    def last_residual(self):
        return self.system.last_residual

    def _forcing(self, t):
        """``f(., t)`` at the load quadrature points and its load vector."""
        tab = self.load_tab
        if self._split is not None:
            c = self.problem.f.time_weights(t)
            parts, loads = self._split
            return (sum(ck * s for ck, s in zip(c, parts)),
                    sum(ck * l for ck, l in zip(c, loads)))
        fv = np.broadcast_to(
            np.asarray(self.problem.f(tab.xq[..., 0], tab.xq[..., 1], t), dtype=float),
            tab.wdet.shape)
        return fv, load_from_values(self.space, fv, tab)

    def rhs(self, u_prev, t_next):
        tab = self.load_tab
        fv, load = self._forcing(t_next)
        r = self.mass @ u_prev.values / self.dt + load
        if self.stabilizer is not None and self.stabilizer.residual_based:
            # both use the load rule, so f_t is shared
            r += self.stabilizer.rhs_from_values(u_prev.at_quadrature(tab) / self.dt + fv)
        return r

    def boundary_values(self, t):
        x, y = self._bx[:, 0], self._bx[:, 1]
        return np.broadcast_to(np.asarray(self.problem.u_D(x, y, t), dtype=float), x.shape)

    def step(self, u_prev, t_next):
        x = self.system.solve(self.rhs(u_prev, t_next), self.boundary_values(t_next))
        return FEField(self.space, x)


def galerkin_step(u_n, t_next, problem, dt, stab=None):
    """One backward Euler step (assembles and factors a fresh system)."""
    return EvolveOperator(problem, u_n.space, dt, stab).step(u_n, t_next)


def _snapshot_indices(time, snapshot_times):
    idx = {}
    for t in snapshot_times or ():
        n = int(round(t / time.dt))
        if n < 0 or n > time.n_steps or not math.isclose(n * time.dt, t, abs_tol=1e-12):
            raise ValueError(f"snapshot time {t} is not a time level of the run")
        idx[n] = t
    return idx


def run(problem, space, time, method="galerkin", snapshot_times=None, callback=None):
    """Advance ``interpolate(u0)`` over ``time.n_steps`` backward Euler steps.

    ``method`` is ``"galerkin"``, a :class:`StabConfig` or an
    :class:`EFRConfig`. ``callback(n, t, state)`` is called after each step
    with ``state`` the new field (or the :class:`~efradr.efr.EFRStep`).
    The first failing step raises :class:`RunError`.
    """
    stab = method if isinstance(method, StabConfig) else None
    efr_cfg = method if isinstance(method, EFRConfig) else None
    if stab is None and efr_cfg is None and method != "galerkin":
        raise ValueError(f"unknown method {method!r}")

    try:
        evolve = EvolveOperator(problem, space, time.dt, stab)
    except SolverError as exc:
        raise RunError(0, "evolve", exc.residual, exc) from exc
    filt = HelmholtzFilter(space, efr_cfg.delta) if efr_cfg else None

    u = interpolate(space, problem.u0)
    snaps_wanted = _snapshot_indices(time, snapshot_times)
    snapshots = {}
    if 0 in snaps_wanted:
        snapshots[snaps_wanted[0]] = u.copy()
    diagnostics = []
    for n in range(time.n_steps):
        t_next = time.t(n + 1)
        start = _time.perf_counter()
        try:
            if efr_cfg is None:
                try:
                    u = evolve.step(u, t_next)
                except SolverError as exc:
                    raise StageError("evolve", exc) from exc
                state = u
                diag = {"residual_evolve": evolve.last_residual}
            else:
                state = efr_step(u, t_next, efr_cfg, evolve, filt)
                u = state.u
                lo = np.minimum(state.v.values, state.v_bar.values)
                hi = np.maximum(state.v.values, state.v_bar.values)
                violation = float(max(0.0, (lo - u.values).max(), (u.values - hi).max()))
                diag = {"residual_evolve": evolve.last_residual,
                        "residual_filter": filt.last_residual,
                        "filter_iterations": filt.last_iterations,
                        "relax_violation": violation,
                        "indicator_max": float(state.a.values.max())}
        except StageError as exc:
            raise RunError(n + 1, exc.stage, exc.residual, exc.cause) from exc
        diag.update(step=n + 1, t=t_next, min=float(u.values.min()),
                    max=float(u.values.max()), wall=_time.perf_counter() - start)
        diagnostics.append(diag)
        if n + 1 in snaps_wanted:
            snapshots[snaps_wanted[n + 1]] = u.copy()
        if callback is not None:
            callback(n + 1, t_next, state)
    return RunResult(u, snapshots, diagnostics)
