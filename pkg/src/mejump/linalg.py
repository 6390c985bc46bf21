"""Dense small-matrix kernel: matrix exponential, linear solves, eigenvalues.

Everything here is an exact (deterministic) oracle for the stochastic side of
the package.  Matrices are tiny (at most a few hundred rows), so the kernel
simply wraps LAPACK-backed routines: ``expm`` uses scaling-and-squaring with a
Pade approximant, solves go through an LU factorization with a residual check,
and eigenvalues come from the dense nonsymmetric QR iteration.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import EigenConvergenceError, SingularMatrixError

#: Relative residual bound enforced after every linear solve.
SOLVE_RESIDUAL_RTOL = 1e-10


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float64 array with finite entries."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def as_square(A, name: str = "matrix") -> np.ndarray:
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-d float64 array with finite entries."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def mat_exp(A) -> np.ndarray:
    """Matrix exponential e^A of a square real matrix."""
    A = as_square(A)
    return scipy.linalg.expm(A)


def solve_linear(A, b, rtol: float = SOLVE_RESIDUAL_RTOL) -> np.ndarray:
    """Solve A x = b, enforcing ``|Ax - b| <= rtol * (|A| |x| + |b|)``.

    Raises
    ------
    SingularMatrixError
        If A is singular or the residual bound cannot be met (numerically
        rank-deficient A, e.g. an invalid tilting rate).
    """
    A = as_square(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, b has length {b.shape[0]}")
    try:
        x = scipy.linalg.solve(A, b)
    except scipy.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular linear system: {exc}") from exc
    norm_a = np.linalg.norm(A, 1)
    residual = np.linalg.norm(A @ x - b)
    bound = rtol * (norm_a * np.linalg.norm(x) + np.linalg.norm(b))
    if not np.isfinite(residual) or residual > bound:
        raise SingularMatrixError(
            f"solve residual {residual:.3e} exceeds bound {bound:.3e}; "
            "matrix is numerically rank-deficient"
        )
    return x


def eigenvalues(A) -> np.ndarray:
    """Eigenvalue multiset of a square real matrix (complex array)."""
    A = as_square(A)
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def spectral_abscissa(A) -> float:
    """Largest real part over the eigenvalues of A."""
    return float(eigenvalues(A).real.max())
