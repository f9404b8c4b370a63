"""
Fixed-time stable, inverse-free flow for the GAVE and its constants.

This module implements the flow field dx/dt = -rho(x) * gamma * A^T r(x),
its Lipschitz constant, the settling-time bound T_max together with the
older bound it improves on, the Lyapunov function used by the stability
analysis, and the Gao-Wang neural network used as a baseline.
"""

import logging
import math
from typing import Optional

import numpy as np
import scipy.linalg

from ..core import (
    Certificate,
    CertificationError,
    DimensionError,
    FlowParams,
    GaveProblem,
    Matrix,
    ParameterError,
    SettlingBound,
    SingularMatrixError,
    Vector,
)
from . import PIVOT_REL_TOL, lu_factorize, residual, singular_values, spectral_norm

logger = logging.getLogger(__name__)


def rho(params: FlowParams, r_norm: float, zero_threshold: float = 0.0) -> float:
    """
    Time-scaling factor rho1 * ||r||^(lambda1 - 1) + rho2 * ||r||^(lambda2 - 1).

    Args:
        params: flow constants
        r_norm: residual norm ||r(x)||
        zero_threshold: norms at or below this count as r = 0

    Returns:
        The factor, or 0 when the residual counts as zero
    """
    if r_norm <= zero_threshold or r_norm == 0.0:
        return 0.0
    return params.rho1 * r_norm ** (params.lambda1 - 1.0) + params.rho2 * r_norm ** (
        params.lambda2 - 1.0
    )


def flow_field(params: FlowParams, problem: GaveProblem, x: Vector) -> Vector:
    """
    Right-hand side -rho(x) * gamma * A^T r(x) of the fixed-time flow.

    Returns the zero vector inside the zero-residual band.

    Raises:
        DimensionError: If x does not have length n
    """
    r = residual(problem, x)
    factor = rho(params, float(np.linalg.norm(r)), problem.zero_threshold)
    if factor == 0.0:
        return np.zeros(problem.n)
    return -factor * params.gamma * (problem.A.T @ r)


def lipschitz_constant(params: FlowParams, problem: GaveProblem) -> float:
    """Lipschitz constant gamma * (||A^T A|| + ||A^T B||) of g(gamma, x)."""
    A, B = problem.A, problem.B
    return params.gamma * (spectral_norm(A.T @ A) + spectral_norm(A.T @ B))


def _settling_time(c1: float, c2: float, kappa1: float, kappa2: float) -> float:
    return 1.0 / (c1 * (1.0 - kappa1)) + 1.0 / (c2 * (kappa2 - 1.0))


def settling_time_bound(params: FlowParams, cert: Certificate) -> SettlingBound:
    """
    Settling-time bound of the fixed-time flow.

        c_i = 2^((lambda_i - 1)/2) * gamma * rho_i * gap^(lambda_i + 1)
        kappa_i = (lambda_i + 1) / 2
        T_max = 1 / (c1 (1 - kappa1)) + 1 / (c2 (kappa2 - 1))

    Args:
        params: flow constants
        cert: certificate supplying gap = sigma_min(A) - ||B||

    Returns:
        SettlingBound with c1, c2, kappa1, kappa2 and T_max

    Raises:
        CertificationError: If the certificate is not certified
    """
    if not cert.certified:
        raise CertificationError("The settling-time bound needs a certified problem")
    gap = cert.gap
    c1 = (
        2.0 ** ((params.lambda1 - 1.0) / 2.0)
        * params.gamma
        * params.rho1
        * gap ** (params.lambda1 + 1.0)
    )
    c2 = (
        2.0 ** ((params.lambda2 - 1.0) / 2.0)
        * params.gamma
        * params.rho2
        * gap ** (params.lambda2 + 1.0)
    )
    kappa1 = (params.lambda1 + 1.0) / 2.0
    kappa2 = (params.lambda2 + 1.0) / 2.0
    return SettlingBound(c1, c2, kappa1, kappa2, _settling_time(c1, c2, kappa1, kappa2))


def settling_time_bound_lyyhc(params: FlowParams, A: Matrix) -> SettlingBound:
    """
    Earlier settling-time bound for the AVE case B = I.

        c1 = 2^((lambda1-1)/2) gamma rho1 (1/||A^-1||^2 - 1)^2 / (||A+I|| + ||A-I||)^(3-lambda1)
        c2 = 2^((lambda2-1)/2) gamma rho2 (1/||A^-1||^2 - 1)^(lambda2+1)
             / (||A+I|| + ||A-I||)^(lambda2+1)

    ||A^-1|| is taken as 1 / sigma_min(A), so no inverse is formed.

    Raises:
        SingularMatrixError: If A is numerically singular
        CertificationError: If sigma_min(A) <= 1
    """
    sv = singular_values(A)
    sigma_min = float(sv[-1])
    if sigma_min <= PIVOT_REL_TOL * max(1.0, float(sv[0])):
        raise SingularMatrixError("A is numerically singular")
    if not sigma_min > 1.0:
        raise CertificationError(f"The B = I bound needs sigma_min(A) > 1, got {sigma_min:.6g}")

    identity = np.eye(A.shape[0])
    spread = spectral_norm(A + identity) + spectral_norm(A - identity)
    margin = sigma_min**2 - 1.0
    c1 = (
        2.0 ** ((params.lambda1 - 1.0) / 2.0)
        * params.gamma
        * params.rho1
        * margin**2
        / spread ** (3.0 - params.lambda1)
    )
    c2 = (
        2.0 ** ((params.lambda2 - 1.0) / 2.0)
        * params.gamma
        * params.rho2
        * margin ** (params.lambda2 + 1.0)
        / spread ** (params.lambda2 + 1.0)
    )
    kappa1 = (params.lambda1 + 1.0) / 2.0
    kappa2 = (params.lambda2 + 1.0) / 2.0
    return SettlingBound(c1, c2, kappa1, kappa2, _settling_time(c1, c2, kappa1, kappa2))


def settling_time_from(
    params: FlowParams, cert: Certificate, xi: float, distance: float
) -> float:
    """
    Settling time for a known starting distance ||x0 - x*||.

        T(x0) = xi / sqrt(c1 c2) * arctan(sqrt(c2 / c1) * V0^(1/xi)),  V0 = distance^2 / 2

    Passing the certified upper error bound as distance gives a bound that
    needs no knowledge of x*. Requires lambda1 = 1 - 2/xi, lambda2 = 1 + 2/xi.
    """
    if not params.matches_xi(xi):
        raise ParameterError(f"lambda1/lambda2 are not of the xi-form for xi={xi}")
    if distance < 0:
        raise ValueError(f"distance must be nonnegative, got {distance}")
    bound = settling_time_bound(params, cert)
    root = math.sqrt(bound.c1 * bound.c2)
    v0 = 0.5 * distance**2
    angle = math.atan(math.sqrt(bound.c2 / bound.c1) * v0 ** (1.0 / xi))
    return xi / root * angle


def lyapunov(x: Vector, x_star: Vector) -> float:
    """V(x) = ||x - x*||^2 / 2."""
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x.shape != x_star.shape:
        raise DimensionError(f"Shapes {x.shape} and {x_star.shape} differ")
    return 0.5 * float(np.dot(x - x_star, x - x_star))


class GaoWangBaseline:
    """
    Gao-Wang one-layer network for the GAVE (needs A nonsingular).

        state:  dz/dt = rho/2 * (|A^-1 (Bz + c)| - z)
        output: x = A^-1 (Bz + c)

    A is LU-factorized once at construction; every evaluation is a pair of
    triangular solves.
    """

    def __init__(self, problem: GaveProblem, rho_scale: float = 1.0):
        """
        Initialize the baseline network.

        Args:
            problem: GAVE instance
            rho_scale: the network's positive scaling constant

        Raises:
            SingularMatrixError: If A is numerically singular
        """
        if not rho_scale > 0:
            raise ParameterError(f"rho_scale must be positive, got {rho_scale}")
        self.problem = problem
        self.rho_scale = rho_scale
        self._lu = lu_factorize(problem.A, "A")
        logger.debug(f"Factorized A for the baseline network (n={problem.n})")

    def output(self, z: Vector) -> Vector:
        z = self.problem.check_vector(z, "z")
        rhs = self.problem.B @ z + self.problem.c
        return scipy.linalg.lu_solve(self._lu, rhs, check_finite=False)

    def field(self, z: Vector) -> Vector:
        return 0.5 * self.rho_scale * (np.abs(self.output(z)) - z)

    def initial_state(self, x0: Optional[Vector] = None) -> Vector:
        """State whose absolute value matches x0 (zero when x0 is omitted)."""
        if x0 is None:
            return np.zeros(self.problem.n)
        return np.abs(self.problem.check_vector(x0, "x0"))


def baseline_gw_field(problem: GaveProblem, rho_scale: float, z: Vector) -> Vector:
    """
    Functional form of the baseline state equation.

    Factorizes A on every call; keep a GaoWangBaseline around for repeated use.
    """
    return GaoWangBaseline(problem, rho_scale).field(z)

