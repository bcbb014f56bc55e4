"""CSR storage and linear solves.

The matrix type is :class:`scipy.sparse.csr_matrix`; this module adds the
dimension checks, the residual contract and the error types used by the rest
of the package.
"""

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-10


class SolverError(RuntimeError):
    """A linear solve did not reach the requested relative residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularMatrixError(SolverError):
    pass


def as_csr(A):
    """Return ``A`` as canonical CSR: sorted, duplicate-free column indices."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    x = np.asarray(x)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ValueError(f"cannot multiply {A.shape} matrix by vector of shape {x.shape}")
    return A @ x


def relative_residual(A, x, rhs):
    nb = np.linalg.norm(rhs)
    r = np.linalg.norm(rhs - A @ x)
    return r / nb if nb > 0 else r


def _check_square(A, rhs):
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if rhs.shape != (A.shape[0],):
        raise ValueError(f"rhs of shape {rhs.shape} does not match {A.shape}")


def _structurally_singular(A):
    A = as_csr(A)
    empty_rows = np.diff(A.indptr) == 0
    empty_cols = np.bincount(A.indices, minlength=A.shape[1]) == 0
    return bool(empty_rows.any() or empty_cols.any())


class LUSolver:
    """Sparse LU factorization reused across many right-hand sides."""

    def __init__(self, A, tol=DEFAULT_TOL):
        A = as_csr(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        if _structurally_singular(A):
            raise SingularMatrixError("matrix is structurally singular")
        self.A = A
        self.tol = tol
        try:
            # finite element patterns are structurally symmetric, where a
            # minimum degree ordering of A^T + A fills in less than COLAMD
            self._lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise SingularMatrixError(str(exc)) from exc
        self.last_residual = None

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        _check_square(self.A, rhs)
        x = self._lu.solve(rhs)
        res = relative_residual(self.A, x, rhs)
        self.last_residual = res
        if not np.isfinite(res) or res > self.tol:
            raise SolverError(f"direct solve residual {res:.3e} exceeds {self.tol:.1e}",
                              residual=res)
        return x


def solve(A, rhs, tol=DEFAULT_TOL, max_iter=None, method="direct"):
    """Solve ``A x = rhs`` to relative residual ``tol``.

    Parameters
    ----------
    A : sparse matrix
    rhs : array_like
    tol : float
        Bound on ``||rhs - A x|| / ||rhs||``; checked after every method.
    max_iter : int, optional
        Iteration cap for the Krylov methods (default ``10 * n``).
    method : {"direct", "cg", "gmres", "bicgstab"}
        ``cg`` assumes ``A`` symmetric positive definite. Krylov methods start
        from the zero vector and use Jacobi preconditioning.

    Raises
    ------
    SingularMatrixError
        ``A`` has an empty row or column, or the factorization breaks down.
    SolverError
        The residual bound was not reached; ``.residual`` holds the value.
    """
    A = as_csr(A)
    rhs = np.asarray(rhs, dtype=float)
    _check_square(A, rhs)
    if method == "direct":
        return LUSolver(A, tol=tol).solve(rhs)
    return krylov_solve(A, rhs, tol=tol, max_iter=max_iter, method=method)[0]


def krylov_solve(A, rhs, tol=DEFAULT_TOL, max_iter=None, method="cg"):
    """Preconditioned Krylov solve; returns ``(x, iterations)``."""
    solvers = {"cg": spla.cg, "gmres": spla.gmres, "bicgstab": spla.bicgstab}
    if method not in solvers:
        raise ValueError(f"unknown solve method {method!r}")
    if _structurally_singular(A):
        raise SingularMatrixError("matrix is structurally singular")
    n = A.shape[0]
    if not np.any(rhs):
        return np.zeros(n), 0
    diag = A.diagonal()
    if np.any(diag == 0):
        raise SingularMatrixError("zero on the diagonal; Jacobi preconditioner undefined")
    M = sp.diags(1.0 / diag)
    count = [0]

    def callback(_):
        count[0] += 1

    # scipy's stopping test is on the preconditioned/internal residual; ask a
    # little more and verify the true residual below.
    kwargs = dict(rtol=0.1 * tol, atol=0.0, maxiter=max_iter or 10 * n, M=M,
                  x0=np.zeros(n), callback=callback)
    if method == "gmres":
        kwargs["callback_type"] = "pr_norm"
        kwargs["restart"] = 50
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        x, info = solvers[method](A, rhs, **kwargs)
    res = relative_residual(A, x, rhs)
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"{method} stopped at relative residual {res:.3e} "
                          f"after {count[0]} iterations (info={info})",
                          residual=res, iterations=count[0])
    return x, count[0]


class CGSolver:
    """Jacobi-preconditioned CG for SPD matrices, same interface as
    :class:`LUSolver`."""

    def __init__(self, A, tol=DEFAULT_TOL, max_iter=None):
        self.A = as_csr(A)
        self.tol = tol
        self.max_iter = max_iter
        self.last_residual = None
        self.last_iterations = None

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        _check_square(self.A, rhs)
        x, its = krylov_solve(self.A, rhs, tol=self.tol, max_iter=self.max_iter, method="cg")
        self.last_residual = relative_residual(self.A, x, rhs)
        self.last_iterations = its
        return x


class StageError(SolverError):
    """A solver failure inside one stage of a time step."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage} stage failed: {cause}",
                         residual=getattr(cause, "residual", None),
                         iterations=getattr(cause, "iterations", None))
        self.stage = stage
        self.cause = cause
