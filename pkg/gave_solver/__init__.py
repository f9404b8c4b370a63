"""
Main GAVE solver module.

This module provides the main interface for solving generalized absolute
value equations Ax - B|x| = c with the fixed-time flow: certification →
settling-time bounds → forward Euler, reference flow or baseline network →
verified solution. Linear complementarity problems go through the same
pipeline after reformulation.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .algorithms import certify_unique, error_bounds, lu_factorize, residual_norm
from .algorithms.dynamics import (
    settling_time_bound,
    settling_time_bound_lyyhc,
    settling_time_from,
)
from .algorithms.euler import fixed_step_count, forward_euler_solve
from .algorithms.reformulations import lcp_to_gave, recover_lcp_solution, verify_lcp
from .algorithms.runge_kutta import (
    baseline_flow_solve,
    default_reference_step,
    reference_flow_solve,
)
from .core import (
    Certificate,
    ComplementarityReport,
    ConvergenceError,
    EulerConfig,
    FlowParams,
    GaveError,
    GaveProblem,
    IterateLog,
    LcpProblem,
    ParameterError,
    SettlingBound,
    Trajectory,
    Vector,
)

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

METHODS = ("euler", "reference", "baseline")
# Reference-flow horizon when no settling-time bound is available (forced runs)
FALLBACK_T_END = 100.0


@dataclass
class RunReport:
    """Result of one GAVE solve."""
    certificate: Certificate
    bound: Optional[SettlingBound]
    bound_lyyhc: Optional[SettlingBound]
    method: str
    x: Vector
    final_residual: float
    steps: int
    time_used: float
    converged: bool
    k_star: Optional[int] = None
    settling_estimate: Optional[float] = None
    log: Optional[IterateLog] = None
    trajectory: Optional[Trajectory] = None
    output_paths: List[str] = field(default_factory=list)


@dataclass
class LcpRunReport:
    """Result of solving an LCP through its GAVE form."""
    gave: RunReport
    z: Vector
    w: Vector
    complementarity: ComplementarityReport


class GaveSolver:
    """
    Fixed-time neurodynamic solver for the GAVE.

    Holds the flow constants and the Euler settings; every solve is
    independent, so one solver may be shared between threads.
    """

    def __init__(self, params: Optional[FlowParams] = None, config: Optional[EulerConfig] = None):
        """
        Initialize the solver.

        Args:
            params: flow constants; defaults to the xi-form of config.xi
            config: forward-Euler settings; defaults to the safeguarded iteration
        """
        self.config = config or EulerConfig(safeguard=True)
        self.params = params or FlowParams.from_xi(self.config.xi)
        logger.info(f"Initialized GaveSolver with {self.params} and {self.config}")

    def certify(self, problem: GaveProblem) -> Certificate:
        cert = certify_unique(problem)
        logger.info(
            f"Certificate for n={problem.n}: gap={cert.gap:.6g}, certified={cert.certified}"
        )
        return cert

    def bounds(
        self, problem: GaveProblem, cert: Certificate
    ) -> Tuple[Optional[SettlingBound], Optional[SettlingBound]]:
        """
        Settling-time bounds of the flow for a problem.

        Returns:
            Tuple of (bound, earlier bound); the first is None when the problem
            is not certified, the second unless B = I and sigma_min(A) > 1
        """
        if not cert.certified:
            return None, None
        bound = settling_time_bound(self.params, cert)
        earlier = None
        if problem.is_identity_b and cert.sigma_min_A > 1.0:
            earlier = settling_time_bound_lyyhc(self.params, problem.A)
        return bound, earlier

    def _k_star(self, cert: Certificate) -> Optional[int]:
        if not (cert.certified and self.params.matches_xi(self.config.xi)):
            return None
        return fixed_step_count(self.config, self.params, cert)

    def solve(
        self,
        problem: GaveProblem,
        method: str = "euler",
        x0: Optional[Vector] = None,
        force: bool = False,
        h: Optional[float] = None,
        t_end: Optional[float] = None,
        rho_scale: float = 1.0,
        x_star: Optional[Vector] = None,
    ) -> RunReport:
        """
        Solve a GAVE with the selected method.

        Args:
            problem: GAVE instance
            method: 'euler', 'reference' or 'baseline'
            x0: starting point (zero when omitted)
            force: run even when the problem is not certified
            h: base step of the reference flow or the baseline network
            t_end: horizon of the reference flow or the baseline network
            rho_scale: scaling constant of the baseline network
            x_star: known solution, enables the Lyapunov guard of the reference flow

        Returns:
            RunReport with the solution, its residual and the bounds

        Raises:
            CertificationError: If the problem is not certified and force is off
            ConvergenceError: If the residual did not reach config.tol
            GaveError: For every other failure along the way
        """
        if method not in METHODS:
            raise ParameterError(f"Unknown method '{method}', expected one of {METHODS}")
        x0 = np.zeros(problem.n) if x0 is None else problem.check_vector(x0, "x0")
        if method == "baseline":
            lu_factorize(problem.A, "A")

        cert = self.certify(problem)
        if not cert.certified:
            if not force:
                cert.require()
            logger.warning(
                f"Solving an uncertified problem (gap={cert.gap:.6g}); no guarantees apply"
            )
        bound, earlier = self.bounds(problem, cert)
        k_star = self._k_star(cert)
        estimate = None
        xi = self.params.xi
        if cert.certified and xi is not None:
            estimate = settling_time_from(
                self.params, cert, xi, error_bounds(problem, cert, x0).upper
            )

        logger.info(f"Solving n={problem.n} with method={method}")
        try:
            log = None
            trajectory = None
            if method == "euler":
                log = forward_euler_solve(
                    problem, self.params, self.config, x0, cert=cert, force=force
                )
                x = log.final
                steps = log.steps_taken
                time_used = steps * self.config.eta
            elif method == "reference":
                if t_end is None:
                    t_end = bound.t_max if bound is not None else FALLBACK_T_END
                if h is None:
                    h = default_reference_step(self.config.eta, t_end)
                trajectory = reference_flow_solve(problem, self.params, h, t_end, x0, x_star)
                x = trajectory.final
                steps = len(trajectory.times) - 1
                time_used = trajectory.end_time
            else:
                h = 0.1 / rho_scale if h is None else h
                t_end = 1000.0 / rho_scale if t_end is None else t_end
                trajectory = baseline_flow_solve(
                    problem, rho_scale, h, t_end, x0, self.config.tol
                )
                x = trajectory.final
                steps = len(trajectory.times) - 1
                time_used = trajectory.end_time
        except GaveError:
            raise
        except Exception as e:
            logger.error(f"Error solving n={problem.n} with method={method}: {e}")
            raise GaveError(f"Error solving the problem with method '{method}': {e}") from e

        final = residual_norm(problem, x)
        report = RunReport(
            certificate=cert,
            bound=bound,
            bound_lyyhc=earlier,
            method=method,
            x=x,
            final_residual=final,
            steps=steps,
            time_used=time_used,
            converged=final <= self.config.tol,
            k_star=k_star,
            settling_estimate=estimate,
            log=log,
            trajectory=trajectory,
        )
        if not report.converged:
            raise ConvergenceError(
                f"Method '{method}' stopped after {steps} steps with residual "
                f"{final:.3e} > tol {self.config.tol:.3e}"
            )
        logger.info(f"Solved in {steps} steps, residual={final:.3e}")
        return report

    def solve_lcp(
        self,
        lcp: LcpProblem,
        method: str = "euler",
        tol: float = 1e-8,
        x0: Optional[Vector] = None,
    ) -> LcpRunReport:
        """
        Solve an LCP through (M + I)x - (M - I)|x| = q and recover z.

        The GAVE residual is driven to min(config.tol, 1e-4 * tol) so the
        recovered pair passes the complementarity check at tol.

        Raises:
            SingularMatrixError: If M - I is numerically singular
            CertificationError: If the induced GAVE is not certified
        """
        problem = lcp_to_gave(lcp)
        inner = GaveSolver(
            self.params,
            EulerConfig(
                eta=self.config.eta,
                xi=self.config.xi,
                max_iter=self.config.max_iter,
                tol=min(self.config.tol, 1e-4 * tol),
                safeguard=self.config.safeguard,
            ),
        )
        report = inner.solve(problem, method=method, x0=x0)
        z = recover_lcp_solution(lcp, report.x)
        w = lcp.M @ z + lcp.q
        check = verify_lcp(lcp, z, tol)
        logger.info(
            f"LCP l={lcp.size}: feasible={check.feasible}, complementary={check.complementary}"
        )
        return LcpRunReport(gave=report, z=z, w=w, complementarity=check)
