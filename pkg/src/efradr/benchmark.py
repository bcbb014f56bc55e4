"""Manufactured-solution benchmark: a hump whose height varies in time.

``u = 16 sin(pi t) x(1-x) y(1-y) [1/2 + arctan(k g) / pi]`` with
``k = 2 / sqrt(mu)`` and ``g = 0.25**2 - (x-0.5)**2 - (y-0.5)**2``.
The internal layer on the circle ``g = 0`` has width O(sqrt(mu)).
"""

from dataclasses import dataclass, field
from typing import NamedTuple
import math

import numpy as np

from .fem import FESpace, interpolate

LEVELS = (25, 50, 100, 200, 400)
CHI_TABLE = (1.0, 1.0 / 2, 1.0 / 4, 1.0 / 16, 1.0 / 256)


@dataclass(frozen=True)
class BenchmarkSpec:
    mu: float = 1e-5
    b: tuple = (2.0, 3.0)
    sigma: float = 1.0
    T: float = 0.5
    dt: float = 1e-3
    L: float = 1.0
    levels: tuple = field(default=LEVELS)
    chi_table: tuple = field(default=CHI_TABLE)

    @property
    def peclet(self):
        return max(abs(c) for c in self.b) * self.L / (2.0 * self.mu)

    def n_for_level(self, level):
        return self.levels[level]

    def chi_for_level(self, level):
        return self.chi_table[level]

    def local_peclet(self, level):
        h = math.sqrt(2.0) / self.levels[level]
        return max(abs(c) for c in self.b) * h / (2.0 * self.mu)


def _parts(x, y, mu):
    k = 2.0 / np.sqrt(mu)
    xc, yc = x - 0.5, y - 0.5
    g = 0.0625 - xc**2 - yc**2
    s = 1.0 + (k * g) ** 2
    A = 0.5 + np.arctan(k * g) / np.pi
    # dA = (k/pi) grad(g) / s, grad(g) = (-2 xc, -2 yc)
    c = k / np.pi
    Ax = c * (-2.0 * xc) / s
    Ay = c * (-2.0 * yc) / s
    # d/dx (g_x / s) = g_xx / s - g_x * 2 k^2 g g_x / s^2
    Axx = c * (-2.0 / s - (2.0 * xc) ** 2 * 2.0 * k**2 * g / s**2)
    Ayy = c * (-2.0 / s - (2.0 * yc) ** 2 * 2.0 * k**2 * g / s**2)
    X, Y = x * (1 - x), y * (1 - y)
    P = X * Y
    Px, Py = (1 - 2 * x) * Y, X * (1 - 2 * y)
    Pxx, Pyy = -2.0 * Y, -2.0 * X
    return P, Px, Py, Pxx, Pyy, A, Ax, Ay, Axx, Ayy


def exact_solution(x, y, t, mu):
    P, *_, A, _, _, _, _ = _parts(np.asarray(x, float), np.asarray(y, float), mu)
    return 16.0 * np.sin(np.pi * t) * P * A


def exact_gradient(x, y, t, mu):
    """Returns ``(u_x, u_y)``; each has the broadcast shape of ``x, y``."""
    P, Px, Py, _, _, A, Ax, Ay, _, _ = _parts(np.asarray(x, float), np.asarray(y, float), mu)
    s = 16.0 * np.sin(np.pi * t)
    return s * (Px * A + P * Ax), s * (Py * A + P * Ay)


def exact_time_derivative(x, y, t, mu):
    P, *_, A, _, _, _, _ = _parts(np.asarray(x, float), np.asarray(y, float), mu)
    return 16.0 * np.pi * np.cos(np.pi * t) * P * A


def exact_laplacian(x, y, t, mu):
    P, Px, Py, Pxx, Pyy, A, Ax, Ay, Axx, Ayy = _parts(np.asarray(x, float),
                                                      np.asarray(y, float), mu)
    s = 16.0 * np.sin(np.pi * t)
    uxx = Pxx * A + 2 * Px * Ax + P * Axx
    uyy = Pyy * A + 2 * Py * Ay + P * Ayy
    return s * (uxx + uyy)


def forcing_term(x, y, t, mu, b, sigma):
    """``f = du/dt - mu lap(u) + b . grad(u) + sigma u``."""
    ux, uy = exact_gradient(x, y, t, mu)
    return (exact_time_derivative(x, y, t, mu) - mu * exact_laplacian(x, y, t, mu)
            + b[0] * ux + b[1] * uy + sigma * exact_solution(x, y, t, mu))


class ErrorNorms(NamedTuple):
    l2: float
    h1: float       # full norm sqrt(l2^2 + semi^2)
    h1_semi: float


def error_norms(u_h, t, mu, quad_degree=None):
    """L2 error, full H1 error and H1-seminorm error of ``u_h`` against the
    exact solution at time ``t``."""
    space = u_h.space
    tab = space.tabulate(quad_degree or space.error_quad_degree)
    x, y = tab.xq[..., 0], tab.xq[..., 1]
    e = u_h.at_quadrature(tab) - exact_solution(x, y, t, mu)
    gx, gy = exact_gradient(x, y, t, mu)
    gh = u_h.gradient_at_quadrature(tab)
    l2sq = float(np.sum(tab.wdet * e**2))
    semisq = float(np.sum(tab.wdet * ((gh[..., 0] - gx) ** 2 + (gh[..., 1] - gy) ** 2)))
    return ErrorNorms(math.sqrt(l2sq), math.sqrt(l2sq + semisq), math.sqrt(semisq))


class SeparableForcing:
    """The benchmark forcing written as ``f = sum_k c_k(t) s_k(x, y)``.

    Calling it evaluates ``f(x, y, t)`` like any forcing; time loops can
    instead cache the two spatial parts and only recombine them.
    """

    def __init__(self, mu, b, sigma):
        self.mu, self.b, self.sigma = mu, tuple(b), sigma

    def spatial_parts(self, x, y):
        P, Px, Py, Pxx, Pyy, A, Ax, Ay, Axx, Ayy = _parts(np.asarray(x, float),
                                                          np.asarray(y, float), self.mu)
        w = 16.0 * P * A
        wx, wy = 16.0 * (Px * A + P * Ax), 16.0 * (Py * A + P * Ay)
        lap = 16.0 * (Pxx * A + 2 * Px * Ax + P * Axx + Pyy * A + 2 * Py * Ay + P * Ayy)
        return w, -self.mu * lap + self.b[0] * wx + self.b[1] * wy + self.sigma * w

    def time_weights(self, t):
        return math.pi * math.cos(math.pi * t), math.sin(math.pi * t)

    def __call__(self, x, y, t):
        c0, c1 = self.time_weights(t)
        s0, s1 = self.spatial_parts(x, y)
        return c0 * s0 + c1 * s1


def min_max(u_h):
    """Extrema over all dof values."""
    vals = u_h.values if hasattr(u_h, "values") else np.asarray(u_h)
    return float(vals.min()), float(vals.max())


def exact_interpolant(space: FESpace, t, mu):
    return interpolate(space, lambda x, y: exact_solution(x, y, t, mu))


def benchmark_problem(spec=None):
    """The benchmark as an :class:`~efradr.simulation.ADRProblem`."""
    from .simulation import ADRProblem

    spec = spec or BenchmarkSpec()
    mu, b, sigma = spec.mu, tuple(spec.b), spec.sigma
    return ADRProblem(
        mu=mu, b=b, sigma=sigma,
        f=SeparableForcing(mu, b, sigma),
        u_D=lambda x, y, t: np.zeros_like(x),
        u0=lambda x, y: exact_solution(x, y, 0.0, mu),
        T=spec.T,
        exact=lambda x, y, t: exact_solution(x, y, t, mu),
    )
