"""
Core data structures and types for the GAVE solver.

This module contains the fundamental data structures used throughout
the solver: problem data, certificates, flow parameters, settling-time
bounds, iteration logs and trajectories, complementarity problems, and
the exception hierarchy.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]

# Residual norms at or below ZERO_RESIDUAL_FACTOR * max(1, ||c||) count as r = 0
ZERO_RESIDUAL_FACTOR = 1e-14
# B is treated as the identity when every entry is within this distance of I
IDENTITY_TOL = 1e-12


class GaveError(Exception):
    """Custom exception for GAVE processing errors."""
    pass


class DimensionError(GaveError, ValueError):
    """Shapes of matrices or vectors do not agree."""
    pass


class ParameterError(GaveError, ValueError):
    """A tuning constant is outside its admissible range."""
    pass


class CertificationError(GaveError):
    """An operation needs sigma_min(A) > ||B|| but the certificate says otherwise."""
    pass


class SingularMatrixError(GaveError):
    """A linear solve met a numerically singular matrix."""
    pass


class DivergenceError(GaveError):
    """An iteration blew up."""
    pass


class ConvergenceError(GaveError):
    """An iteration stopped without meeting its tolerance."""
    pass


class StepUnderflowError(GaveError):
    """The step-halving guard shrank the step below its floor."""
    pass


class StepSearchError(GaveError):
    """No admissible Euler time-step was found."""
    pass


class TrajectoryTooShortError(GaveError):
    """A trajectory does not cover the requested horizon."""
    pass


class ProblemFormatError(GaveError):
    """A problem file could not be parsed."""
    pass


def _as_matrix(name: str, value: object) -> Matrix:
    array = np.array(value, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise DimensionError(f"{name} has non-finite entries")
    array.setflags(write=False)
    return array


def _as_vector(name: str, value: object) -> Vector:
    array = np.array(value, dtype=np.float64)
    if array.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise DimensionError(f"{name} has non-finite entries")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GaveProblem:
    """
    Generalized absolute value equation Ax - B|x| = c.

    Immutable after construction: the arrays are copied and marked read-only,
    so a problem can be shared freely between threads.

    Attributes:
        A: n x n coefficient matrix
        B: n x n coefficient matrix of the absolute-value term
        c: right-hand side of length n
    """
    A: Matrix
    B: Matrix
    c: Vector

    def __post_init__(self) -> None:
        """Validate shapes and finiteness after initialization."""
        A = _as_matrix("A", self.A)
        B = _as_matrix("B", self.B)
        c = _as_vector("c", self.c)
        if A.shape != B.shape:
            raise DimensionError(f"A is {A.shape} but B is {B.shape}")
        if c.shape[0] != A.shape[0]:
            raise DimensionError(f"c has length {c.shape[0]}, expected {A.shape[0]}")
        if A.shape[0] == 0:
            raise DimensionError("Problem dimension must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return int(self.c.shape[0])

    @property
    def zero_threshold(self) -> float:
        """Residual norm below which r(x) is treated as exactly zero."""
        return ZERO_RESIDUAL_FACTOR * max(1.0, float(np.linalg.norm(self.c)))

    @property
    def is_identity_b(self) -> bool:
        return bool(np.all(np.abs(self.B - np.eye(self.n)) <= IDENTITY_TOL))

    def check_vector(self, x: object, name: str = "x") -> Vector:
        """Coerce x to a float vector of length n or raise DimensionError."""
        array = np.asarray(x, dtype=np.float64)
        if array.shape != (self.n,):
            raise DimensionError(f"{name} has shape {array.shape}, expected ({self.n},)")
        return array

    def __repr__(self) -> str:
        return f"GaveProblem(n={self.n})"


@dataclass(frozen=True)
class Certificate:
    """
    Spectral certificate for unique solvability (sigma_min(A) > ||B||).

    Attributes:
        sigma_min_A: smallest singular value of A
        norm_B: spectral norm of B
        gap: sigma_min_A - norm_B
        certified: whether gap exceeds the tolerance
        norm_A: spectral norm of A
        tol: margin the verdict was taken with
    """
    sigma_min_A: float
    norm_B: float
    gap: float
    certified: bool
    norm_A: float
    tol: float

    def __post_init__(self) -> None:
        if self.certified and not self.gap > 0:
            raise ValueError("A certified verdict needs a positive gap")

    def require(self) -> None:
        """Raise CertificationError unless certified."""
        if not self.certified:
            raise CertificationError(
                f"sigma_min(A) - ||B|| = {self.gap:.6g} does not exceed tol {self.tol:.3g}"
            )


@dataclass(frozen=True)
class ErrorBracket:
    """Residual-based bracket lower <= ||x - x*|| <= upper."""
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if self.lower < 0 or self.lower > self.upper:
            raise ValueError(f"Invalid bracket [{self.lower}, {self.upper}]")

    def contains(self, distance: float, rel_slack: float = 0.0) -> bool:
        return (
            self.lower * (1.0 - rel_slack) <= distance <= self.upper * (1.0 + rel_slack)
        )


@dataclass(frozen=True)
class FlowParams:
    """
    Tuning constants of the fixed-time flow dx/dt = -rho(x) * gamma * A^T r(x).

    Attributes:
        gamma: gain of g(gamma, x) = gamma * A^T r(x)
        rho1: weight of the finite-time term
        rho2: weight of the fixed-time term
        lambda1: exponent in (0, 1)
        lambda2: exponent > 1
    """
    gamma: float = 1.0
    rho1: float = 1.0
    rho2: float = 1.0
    lambda1: float = 0.5
    lambda2: float = 1.5

    def __post_init__(self) -> None:
        for name in ("gamma", "rho1", "rho2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive, got {value}")
        if not 0.0 < self.lambda1 < 1.0:
            raise ParameterError(f"lambda1 must lie in (0, 1), got {self.lambda1}")
        if not (math.isfinite(self.lambda2) and self.lambda2 > 1.0):
            raise ParameterError(f"lambda2 must exceed 1, got {self.lambda2}")

    @classmethod
    def from_xi(
        cls, xi: float, gamma: float = 1.0, rho1: float = 1.0, rho2: float = 1.0
    ) -> "FlowParams":
        """Parameters with lambda1 = 1 - 2/xi and lambda2 = 1 + 2/xi."""
        if not xi > 2:
            raise ParameterError(f"xi must exceed 2, got {xi}")
        return cls(gamma, rho1, rho2, 1.0 - 2.0 / xi, 1.0 + 2.0 / xi)

    @property
    def xi(self) -> Optional[float]:
        """The xi of the exponents when they have the xi-form, else None."""
        xi = 2.0 / (1.0 - self.lambda1)
        if abs(self.lambda2 - (1.0 + 2.0 / xi)) <= 1e-12:
            return xi
        return None

    def matches_xi(self, xi: float) -> bool:
        return (
            abs(self.lambda1 - (1.0 - 2.0 / xi)) <= 1e-12
            and abs(self.lambda2 - (1.0 + 2.0 / xi)) <= 1e-12
        )


@dataclass(frozen=True)
class SettlingBound:
    """Constants of the Lyapunov inequality dV/dt <= -c1 V^k1 - c2 V^k2 and T_max."""
    c1: float
    c2: float
    kappa1: float
    kappa2: float
    t_max: float

    def __post_init__(self) -> None:
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")
        if not (0.5 < self.kappa1 < 1.0 and self.kappa2 > 1.0):
            raise ValueError(f"Invalid exponents kappa1={self.kappa1}, kappa2={self.kappa2}")


@dataclass(frozen=True)
class EulerConfig:
    """
    Forward-Euler settings.

    Attributes:
        eta: time-step
        xi: exponent parameter, lambda1 = 1 - 2/xi and lambda2 = 1 + 2/xi
        max_iter: iteration cap
        tol: residual stop
        safeguard: halve steps that do not lower the residual
    """
    eta: float = 0.1
    xi: float = 4.0
    max_iter: int = 10**6
    tol: float = 1e-8
    safeguard: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if not self.xi > 2:
            raise ParameterError(f"xi must exceed 2, got {self.xi}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be positive, got {self.max_iter}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")

    @property
    def lambda1(self) -> float:
        return 1.0 - 2.0 / self.xi

    @property
    def lambda2(self) -> float:
        return 1.0 + 2.0 / self.xi


@dataclass(frozen=True, eq=False)
class IterateLog:
    """
    Discrete solution x_d(k) = x^(k) of the forward-Euler scheme.

    Attributes:
        iterates: (steps_taken + 1) x n array, row k is x^(k)
        residual_norms: ||r(x^(k))|| for every row
        steps_taken: number of updates performed
        converged: residual reached the tolerance
        eta: time-step used
        safeguarded: run used step halving instead of the plain iteration
        halvings: total number of halvings performed
    """
    iterates: Matrix
    residual_norms: Vector
    steps_taken: int
    converged: bool
    eta: float
    safeguarded: bool = False
    halvings: int = 0

    def __post_init__(self) -> None:
        rows = self.iterates.shape[0]
        if rows != self.residual_norms.shape[0] or rows != self.steps_taken + 1:
            raise ValueError("Iterate log lengths are inconsistent")

    @property
    def final(self) -> Vector:
        return self.iterates[-1]

    @property
    def final_residual(self) -> float:
        return float(self.residual_norms[-1])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Samples of a continuous-time solution x(t; x0).

    Attributes:
        times: strictly increasing sample times starting at 0
        states: one row per sample time
        residual_norms: ||r(x(t))|| per sample
        settled: integration stopped because the residual vanished
    """
    times: Vector
    states: Matrix
    residual_norms: Vector
    settled: bool = False

    def __post_init__(self) -> None:
        if self.times.shape[0] == 0 or self.times[0] != 0.0:
            raise ValueError("Trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Trajectory times must be strictly increasing")
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("Trajectory times and states differ in length")
        if self.residual_norms.shape[0] != self.times.shape[0]:
            raise ValueError("Trajectory times and residuals differ in length")

    @property
    def final(self) -> Vector:
        return self.states[-1]

    @property
    def final_residual(self) -> float:
        return float(self.residual_norms[-1])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True, eq=False)
class LcpProblem:
    """Linear complementarity problem: w = Mz + q >= 0, z >= 0, w^T z = 0."""
    M: Matrix
    q: Vector

    def __post_init__(self) -> None:
        M = _as_matrix("M", self.M)
        q = _as_vector("q", self.q)
        if q.shape[0] != M.shape[0]:
            raise DimensionError(f"q has length {q.shape[0]}, expected {M.shape[0]}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "q", q)

    @property
    def size(self) -> int:
        return int(self.q.shape[0])


@dataclass(frozen=True, eq=False)
class HlcpProblem:
    """Horizontal LCP: Cz - Dw = p, z >= 0, w >= 0, w^T z = 0."""
    C: Matrix
    D: Matrix
    p: Vector

    def __post_init__(self) -> None:
        C = _as_matrix("C", self.C)
        D = _as_matrix("D", self.D)
        p = _as_vector("p", self.p)
        if C.shape != D.shape:
            raise DimensionError(f"C is {C.shape} but D is {D.shape}")
        if p.shape[0] != C.shape[0]:
            raise DimensionError(f"p has length {p.shape[0]}, expected {C.shape[0]}")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "p", p)

    @property
    def size(self) -> int:
        return int(self.p.shape[0])


@dataclass(frozen=True)
class ComplementarityReport:
    """Feasibility and complementarity of a candidate (z, w) pair."""
    min_z: float
    min_w: float
    inner_product: float
    feasible: bool
    complementary: bool
    equation_residual: float = 0.0

    @property
    def ok(self) -> bool:
        return self.feasible and self.complementary


@dataclass(frozen=True)
class GeneratorSpec:
    """
    Parameters of a random certified GAVE instance.

    Attributes:
        n: dimension
        gap: requested sigma_min(A) - ||B||
        scale: entries of the embedded solution lie in [-scale, scale]
        seed: 64-bit seed of the Philox generator
        identity_b: use B = I instead of a random normalized B
    """
    n: int
    gap: float = 1.0
    scale: float = 1.0
    seed: int = 0
    identity_b: bool = False

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"n must be at least 1, got {self.n}")
        if not self.gap > 0:
            raise ParameterError(f"gap must be positive, got {self.gap}")
        if not self.scale > 0:
            raise ParameterError(f"scale must be positive, got {self.scale}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class BenchRow:
    """
    One row of the benchmark table.

    t_max_lyyhc is None unless the instance has B = I.
    """
    seed: int
    n: int
    gap: float
    t_max: float
    t_max_lyyhc: Optional[float]
    k_star: int
    steps_used: int
    final_residual: float
    reference_residual: float
    wall_time: float
