"""
Conversions between complementarity problems and the GAVE.

An LCP (M, q) becomes the GAVE (M + I)x - (M - I)|x| = q, whose solution
gives z = (M - I)^-1 (2x - q). An HLCP (C, D, p) becomes the GAVE with
A = (C + D)/2, B = (D - C)/2, c = p, solved by x = z - w.
"""

import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from ..core import (
    ComplementarityReport,
    DimensionError,
    GaveProblem,
    HlcpProblem,
    LcpProblem,
    Vector,
)
from . import lu_factorize

logger = logging.getLogger(__name__)


def lcp_to_gave(lcp: LcpProblem) -> GaveProblem:
    """GAVE with A = M + I, B = M - I, c = q."""
    identity = np.eye(lcp.size)
    return GaveProblem(A=lcp.M + identity, B=lcp.M - identity, c=lcp.q)


def recover_lcp_solution(lcp: LcpProblem, x: Vector) -> Vector:
    """
    Solve (M - I)z = 2x - q for the LCP solution z.

    Raises:
        SingularMatrixError: If M - I is numerically singular (1 is an eigenvalue of M)
        DimensionError: If x does not have length l
    """
    x = _check_length(x, lcp.size, "x")
    lu = lu_factorize(lcp.M - np.eye(lcp.size), "M - I")
    return scipy.linalg.lu_solve(lu, 2.0 * x - lcp.q, check_finite=False)


def gave_solution_to_hlcp(x: Vector) -> Tuple[Vector, Vector]:
    """Positive and negative parts z = max(x, 0), w = max(-x, 0)."""
    x = np.asarray(x, dtype=np.float64)
    z = np.maximum(x, 0.0)
    w = np.maximum(-x, 0.0)
    return z, w


def hlcp_to_gave(hlcp: HlcpProblem) -> GaveProblem:
    """GAVE with A = (C + D)/2, B = (D - C)/2, c = p."""
    return GaveProblem(A=0.5 * (hlcp.C + hlcp.D), B=0.5 * (hlcp.D - hlcp.C), c=hlcp.p)


def gave_to_hlcp(problem: GaveProblem) -> HlcpProblem:
    """HLCP with C = A - B, D = A + B, p = c."""
    return HlcpProblem(C=problem.A - problem.B, D=problem.A + problem.B, p=problem.c)


def hlcp_solution_to_gave(z: Vector, w: Vector) -> Vector:
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if z.shape != w.shape:
        raise DimensionError(f"z has shape {z.shape} but w has shape {w.shape}")
    return z - w


def _check_length(v: Vector, size: int, name: str) -> Vector:
    array = np.asarray(v, dtype=np.float64)
    if array.shape != (size,):
        raise DimensionError(f"{name} has shape {array.shape}, expected ({size},)")
    return array


def _report(
    z: Vector, w: Vector, tol: float, equation_residual: float = 0.0
) -> ComplementarityReport:
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    min_z = float(z.min())
    min_w = float(w.min())
    inner = float(np.dot(w, z))
    scale = max(1.0, float(np.linalg.norm(z)) * float(np.linalg.norm(w)))
    return ComplementarityReport(
        min_z=min_z,
        min_w=min_w,
        inner_product=inner,
        feasible=min_z >= -tol and min_w >= -tol,
        complementary=abs(inner) <= tol * scale,
        equation_residual=equation_residual,
    )


def verify_lcp(lcp: LcpProblem, z: Vector, tol: float) -> ComplementarityReport:
    """
    Check z >= 0, w = Mz + q >= 0 and w^T z = 0 within tol.

    Complementarity is judged against tol * max(1, ||z|| * ||w||).

    Raises:
        DimensionError: If z does not have length l
    """
    z = _check_length(z, lcp.size, "z")
    w = lcp.M @ z + lcp.q
    report = _report(z, w, tol)
    logger.debug(f"LCP check: {report}")
    return report


def verify_hlcp(hlcp: HlcpProblem, z: Vector, w: Vector, tol: float) -> ComplementarityReport:
    """
    Check z, w >= 0 and w^T z = 0; report ||Cz - Dw - p|| as equation_residual.

    Raises:
        DimensionError: If z or w does not have length l
    """
    z = _check_length(z, hlcp.size, "z")
    w = _check_length(w, hlcp.size, "w")
    equation = float(np.linalg.norm(hlcp.C @ z - hlcp.D @ w - hlcp.p))
    return _report(z, w, tol, equation)
