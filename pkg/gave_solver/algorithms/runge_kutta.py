"""
Classical Runge-Kutta integration of the continuous-time solvers.

The reference integrator stands in for the exact solution x(t; x0) of the
fixed-time flow. It takes fourth-order steps of at most h, checked by step
doubling against the residual, and halves a step whenever it would increase
the residual norm (and, if the solution is known, the Lyapunov value). The
same stepper drives the Gao-Wang network with a fixed step.
"""

import logging
import math
from typing import Callable, List, Optional

import numpy as np

from ..core import (
    DivergenceError,
    FlowParams,
    GaveProblem,
    ParameterError,
    StepUnderflowError,
    Trajectory,
    Vector,
)
from . import residual, spectral_norm
from .dynamics import GaoWangBaseline, flow_field, lyapunov

logger = logging.getLogger(__name__)

# Integration stops once ||r|| <= SETTLE_FACTOR * max(1, ||c||)
SETTLE_FACTOR = 1e-12
# Step halving gives up below UNDERFLOW_FACTOR * h
UNDERFLOW_FACTOR = 1e-12
# Allowed gap between one full RK4 step and two half-steps, relative to ||r||
RESIDUAL_RTOL = 0.1

Field = Callable[[Vector], Vector]


def rk4_step(f: Field, h: float, y0: Vector) -> Vector:
    """Classic 4th order step of an autonomous system."""
    k = np.empty((4, len(y0)), dtype=y0.dtype)
    k[0] = f(y0)
    k[1] = f(y0 + 0.5 * h * k[0])
    k[2] = f(y0 + 0.5 * h * k[1])
    k[3] = f(y0 + h * k[2])
    return y0 + h * (1 / 6 * k[0] + 1 / 3 * k[1] + 1 / 3 * k[2] + 1 / 6 * k[3])


def _check_horizon(h: float, t_end: float) -> None:
    if not (math.isfinite(h) and h > 0):
        raise ParameterError(f"h must be positive, got {h}")
    if not (math.isfinite(t_end) and t_end > 0):
        raise ParameterError(f"t_end must be positive, got {t_end}")


def default_reference_step(eta: float, t_max: float) -> float:
    """Base step min(eta / 10, T_max / 10^4) used when comparing against Euler."""
    return min(eta / 10.0, t_max / 1e4)


def reference_flow_solve(
    problem: GaveProblem,
    params: FlowParams,
    h: float,
    t_end: float,
    x0: Vector,
    x_star: Optional[Vector] = None,
) -> Trajectory:
    """
    Integrate the fixed-time flow from x0 up to t_end.

    Steps are capped at h (the last one is shortened to land on t_end). A step
    is taken as two RK4 half-steps and accepted when it agrees with the single
    full step to RESIDUAL_RTOL relative to ||r||, does not increase ||r||
    beyond rounding and does not flip the sign of r. With x_star given,
    V(x) = ||x - x*||^2 / 2 must not increase either. A rejected step is
    halved; after an accepted step the trial step doubles again up to h.

    Args:
        problem: certified GAVE instance
        params: flow constants
        h: base step
        t_end: final time
        x0: starting point
        x_star: known solution enabling the Lyapunov guard

    Returns:
        Trajectory of accepted samples; settled when the residual vanished early

    Raises:
        StepUnderflowError: If a step has to shrink below 1e-12 * h
    """
    _check_horizon(h, t_end)
    x = problem.check_vector(x0, "x0").copy()
    if x_star is not None:
        x_star = problem.check_vector(x_star, "x_star")

    def field(y: Vector) -> Vector:
        return flow_field(params, problem, y)

    norm_ab = spectral_norm(problem.A) + spectral_norm(problem.B)
    c_norm = float(np.linalg.norm(problem.c))
    settle = SETTLE_FACTOR * max(1.0, c_norm)
    eps = np.finfo(float).eps

    t = 0.0
    r = residual(problem, x)
    r_norm = float(np.linalg.norm(r))
    times: List[float] = [t]
    states: List[Vector] = [x.copy()]
    norms: List[float] = [r_norm]
    settled = r_norm <= settle
    trial = h
    halvings = 0

    logger.info(f"Reference flow: n={problem.n}, h={h}, t_end={t_end}, |r0|={r_norm:.3e}")
    while not settled and t < t_end:
        step = min(trial, t_end - t)
        x_norm = float(np.linalg.norm(x))
        r_slack = 16.0 * eps * (norm_ab * x_norm + c_norm)
        if x_star is not None:
            v_now = lyapunov(x, x_star)
            v_slack = 16.0 * eps * (x_norm + float(np.linalg.norm(x_star))) * math.sqrt(
                2.0 * v_now
            )
        while True:
            with np.errstate(over="ignore", invalid="ignore"):
                coarse = rk4_step(field, step, x)
                candidate = rk4_step(field, 0.5 * step, rk4_step(field, 0.5 * step, x))
                r_new = residual(problem, candidate)
                cand_norm = float(np.linalg.norm(r_new))
                error = float(np.linalg.norm(residual(problem, coarse) - r_new))
                same_side = float(r_new @ r) >= 0.0
            accepted = (
                cand_norm <= r_norm + r_slack
                and error <= RESIDUAL_RTOL * cand_norm + r_slack
                and (same_side or cand_norm <= r_slack)
            )
            if accepted and x_star is not None:
                accepted = lyapunov(candidate, x_star) <= v_now + v_slack
            if accepted:
                break
            step *= 0.5
            halvings += 1
            if step < UNDERFLOW_FACTOR * h:
                raise StepUnderflowError(
                    f"Step fell below {UNDERFLOW_FACTOR * h:.3g} at t={t:.6g} "
                    f"(|r|={r_norm:.3e})"
                )
        if t + step <= t:
            raise StepUnderflowError(f"Step {step:.3g} no longer advances t={t:.6g}")

        t = t_end if t_end - (t + step) <= 1e-12 * t_end else t + step
        trial = min(h, 2.0 * step)
        x = candidate
        r = r_new
        r_norm = cand_norm
        times.append(t)
        states.append(x.copy())
        norms.append(r_norm)
        settled = r_norm <= settle

    logger.info(
        f"Reference flow stopped at t={t:.6g} after {len(times) - 1} steps "
        f"({halvings} halvings), |r|={r_norm:.3e}, settled={settled}"
    )
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        residual_norms=np.array(norms),
        settled=settled,
    )


def baseline_flow_solve(
    problem: GaveProblem,
    rho_scale: float,
    h: float,
    t_end: float,
    x0: Optional[Vector] = None,
    tol: float = 1e-8,
) -> Trajectory:
    """
    Integrate the Gao-Wang network with fixed-step RK4.

    The recorded states are the network outputs x = A^-1 (Bz + c), not the
    internal state z. Integration stops early once ||r(x)|| <= tol.

    Raises:
        SingularMatrixError: If A is numerically singular
        DivergenceError: If the state stops being finite
    """
    _check_horizon(h, t_end)
    network = GaoWangBaseline(problem, rho_scale)
    z = network.initial_state(x0)

    t = 0.0
    x = network.output(z)
    r_norm = float(np.linalg.norm(residual(problem, x)))
    times: List[float] = [t]
    states: List[Vector] = [x]
    norms: List[float] = [r_norm]
    settled = r_norm <= tol

    logger.info(f"Baseline network: n={problem.n}, rho={rho_scale}, h={h}, t_end={t_end}")
    while not settled and t < t_end:
        step = min(h, t_end - t)
        with np.errstate(over="ignore", invalid="ignore"):
            z = rk4_step(network.field, step, z)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"Baseline state became non-finite at t={t:.6g}")
        t = t_end if t_end - (t + step) <= 1e-12 * t_end else t + step
        x = network.output(z)
        r_norm = float(np.linalg.norm(residual(problem, x)))
        times.append(t)
        states.append(x)
        norms.append(r_norm)
        settled = r_norm <= tol

    logger.info(
        f"Baseline network stopped at t={t:.6g} after {len(times) - 1} steps, "
        f"|r|={r_norm:.3e}"
    )
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        residual_norms=np.array(norms),
        settled=settled,
    )
