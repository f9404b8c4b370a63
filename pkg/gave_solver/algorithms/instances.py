"""
Seeded generators of certified test instances.

All randomness comes from numpy's counter-based Philox bit generator seeded
with a 64-bit seed, so equal seeds give bit-identical instances.
"""

import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from ..core import (
    GaveProblem,
    GeneratorSpec,
    LcpProblem,
    Matrix,
    ParameterError,
    Vector,
)

logger = logging.getLogger(__name__)

# Eigenvalues of generated SPD matrices avoid (1 - MU_HOLE, 1 + MU_HOLE)
MU_LOW, MU_HIGH, MU_HOLE = 0.5, 2.0, 0.1


def _rng(seed: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(seed))


def _orthogonal(rng: np.random.Generator, n: int) -> Matrix:
    """Haar-distributed orthogonal matrix from the QR of a Gaussian matrix."""
    q, r = scipy.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_solvable_gave(spec: GeneratorSpec) -> Tuple[GaveProblem, Vector]:
    """
    Random GAVE with sigma_min(A) - ||B|| >= spec.gap and a known solution.

    A = Q1 diag(sigma) Q2^T with sigma in [1 + gap, 2 + gap], B Gaussian
    scaled to ||B|| = 1 (or B = I), x* uniform in [-scale, scale]^n and
    c = A x* - B |x*|.

    Returns:
        Tuple of (problem, x_star)
    """
    rng = _rng(spec.seed)
    n = spec.n
    q1 = _orthogonal(rng, n)
    q2 = _orthogonal(rng, n)
    sigma = rng.uniform(1.0 + spec.gap, 2.0 + spec.gap, size=n)
    A = (q1 * sigma) @ q2.T
    if spec.identity_b:
        B = np.eye(n)
        # same draws in both modes so x_star depends only on (n, gap, scale, seed)
        rng.standard_normal((n, n))
    else:
        B = rng.standard_normal((n, n))
        B /= scipy.linalg.norm(B, 2)
    x_star = rng.uniform(-spec.scale, spec.scale, size=n)
    c = A @ x_star - B @ np.abs(x_star)
    logger.debug(f"Generated GAVE n={n}, gap={spec.gap}, seed={spec.seed}")
    return GaveProblem(A=A, B=B, c=c), x_star


def _spd_eigenvalues(rng: np.random.Generator, size: int) -> Vector:
    below = (1.0 - MU_HOLE) - MU_LOW
    above = MU_HIGH - (1.0 + MU_HOLE)
    u = rng.uniform(0.0, below + above, size=size)
    return np.where(u < below, MU_LOW + u, 1.0 + MU_HOLE + (u - below))


def random_spd_lcp(size: int, seed: int) -> LcpProblem:
    """
    Random symmetric positive definite LCP whose GAVE form is certified.

    M = Q diag(mu) Q^T with mu in [0.5, 0.9] U [1.1, 2.0] and q uniform in
    [-1, 1]^l. Then sigma_min(M + I) = mu_min + 1 >= 1.5 > 1 >= ||M - I||,
    and M - I stays invertible for the solution recovery.
    """
    if size < 1:
        raise ParameterError(f"l must be at least 1, got {size}")
    rng = _rng(seed)
    q_factor = _orthogonal(rng, size)
    mu = _spd_eigenvalues(rng, size)
    M = (q_factor * mu) @ q_factor.T
    M = 0.5 * (M + M.T)
    q = rng.uniform(-1.0, 1.0, size=size)
    logger.debug(f"Generated SPD LCP l={size}, seed={seed}")
    return LcpProblem(M=M, q=q)


def offset_start(x_star: Vector, distance: float, seed: int) -> Vector:
    """Point at the given distance from x_star in a random direction."""
    if distance < 0:
        raise ParameterError(f"distance must be nonnegative, got {distance}")
    x_star = np.asarray(x_star, dtype=np.float64)
    rng = _rng(seed)
    direction = rng.standard_normal(x_star.shape[0])
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        direction = np.ones(x_star.shape[0])
        norm = float(np.linalg.norm(direction))
    return x_star + distance * direction / norm
