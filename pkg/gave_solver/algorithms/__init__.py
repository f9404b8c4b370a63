"""
Problem-level operations for the generalized absolute value equation.

This module contains residual evaluation, the spectral quantities used by
every result in the package (smallest singular value and spectral norm),
solvability certification, the residual-based error bracket and solution
verification.
"""

import logging
import warnings
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from ..core import (
    Certificate,
    CertificationError,
    DimensionError,
    ErrorBracket,
    GaveProblem,
    Matrix,
    SingularMatrixError,
    Vector,
)

logger = logging.getLogger(__name__)

# certify_unique margin: CERTIFY_REL_TOL * max(1, ||A||)
CERTIFY_REL_TOL = 1e-10
# Pivots below PIVOT_REL_TOL * max|pivot| mark a factorization as singular
PIVOT_REL_TOL = 1e-12


def residual(problem: GaveProblem, x: Vector) -> Vector:
    """
    Evaluate r(x) = Ax - B|x| - c.

    Args:
        problem: GAVE instance
        x: point of length n

    Returns:
        The residual vector

    Raises:
        DimensionError: If x does not have length n
    """
    x = problem.check_vector(x)
    return problem.A @ x - problem.B @ np.abs(x) - problem.c


def residual_norm(problem: GaveProblem, x: Vector) -> float:
    return float(np.linalg.norm(residual(problem, x)))


def _check_square(M: Matrix) -> Matrix:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DimensionError("Matrix has non-finite entries")
    return M


def singular_values(M: Matrix) -> Vector:
    """Singular values of a square matrix in descending order."""
    return scipy.linalg.svdvals(_check_square(M), check_finite=False)


def smallest_singular_value(M: Matrix) -> float:
    """
    Smallest singular value sigma_min(M).

    Raises:
        DimensionError: If M is not square
    """
    return float(singular_values(M)[-1])


def spectral_norm(M: Matrix) -> float:
    """
    Spectral norm ||M||, the largest singular value.

    Raises:
        DimensionError: If M is not square
    """
    return float(singular_values(M)[0])


def certify_unique(problem: GaveProblem, tol: Optional[float] = None) -> Certificate:
    """
    Check the unique-solvability condition sigma_min(A) > ||B||.

    An uncertified result is a valid outcome, not an error.

    Args:
        problem: GAVE instance
        tol: required margin; defaults to 1e-10 * max(1, ||A||)

    Returns:
        Certificate with sigma_min(A), ||B||, the gap and the verdict
    """
    sv_A = singular_values(problem.A)
    norm_A = float(sv_A[0])
    sigma_min_A = float(sv_A[-1])
    norm_B = spectral_norm(problem.B)
    if tol is None:
        tol = CERTIFY_REL_TOL * max(1.0, norm_A)
    elif not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")

    gap = sigma_min_A - norm_B
    certified = gap > tol
    logger.debug(
        f"Certificate: sigma_min(A)={sigma_min_A:.6g}, ||B||={norm_B:.6g}, "
        f"gap={gap:.6g}, certified={certified}"
    )
    return Certificate(
        sigma_min_A=sigma_min_A,
        norm_B=norm_B,
        gap=gap,
        certified=certified,
        norm_A=norm_A,
        tol=tol,
    )


def error_bounds(problem: GaveProblem, cert: Certificate, x: Vector) -> ErrorBracket:
    """
    Bracket the distance to the unique solution from the residual.

        ||r(x)|| / (||A|| + ||B||) <= ||x - x*|| <= ||r(x)|| / (sigma_min(A) - ||B||)

    Args:
        problem: GAVE instance
        cert: certificate of the same problem
        x: probe point

    Returns:
        ErrorBracket with both bounds

    Raises:
        CertificationError: If the certificate is not certified
    """
    if not cert.certified:
        raise CertificationError("Error bounds need a certified problem")
    r_norm = residual_norm(problem, x)
    denominator = cert.norm_A + cert.norm_B
    lower = r_norm / denominator if denominator > 0 else 0.0
    return ErrorBracket(lower=lower, upper=r_norm / cert.gap)


def verify_solution(problem: GaveProblem, x: Vector, tol: float) -> bool:
    """
    Accept x when ||r(x)|| <= tol * max(1, ||c||).

    Raises:
        DimensionError: If x does not have length n
    """
    scale = max(1.0, float(np.linalg.norm(problem.c)))
    return residual_norm(problem, x) <= tol * scale


def abs_nonexpansive_gap(x: Vector, y: Vector) -> float:
    """||x - y|| - || |x| - |y| ||, which is never negative."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"Shapes {x.shape} and {y.shape} differ")
    return float(np.linalg.norm(x - y) - np.linalg.norm(np.abs(x) - np.abs(y)))


def lu_factorize(M: Matrix, name: str = "matrix") -> Tuple[Matrix, Vector]:
    """
    LU factorization with a relative pivot singularity test.

    Raises:
        SingularMatrixError: If some pivot is at most 1e-12 times the largest
    """
    M = _check_square(M)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    largest = float(pivots.max())
    if largest == 0.0 or float(pivots.min()) <= PIVOT_REL_TOL * largest:
        raise SingularMatrixError(f"{name} is numerically singular")
    return lu, piv
