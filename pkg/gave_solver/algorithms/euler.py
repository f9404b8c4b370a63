"""
Forward-Euler discretization of the fixed-time flow.

This module implements the explicit iteration
x^(k+1) = x^(k) - eta * rho(x^(k)) * gamma * A^T r(x^(k)), the fixed number
of steps k* after which the iterates stay in an eps-neighbourhood of the
solution, the continuous decay envelopes the iterates are compared against,
the (T, eps)-closeness test between a discrete and a continuous solution,
and a geometric search for an admissible time-step.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from ..core import (
    Certificate,
    DivergenceError,
    EulerConfig,
    FlowParams,
    GaveProblem,
    IterateLog,
    ParameterError,
    StepSearchError,
    Trajectory,
    TrajectoryTooShortError,
    Vector,
)
from . import certify_unique, residual, spectral_norm
from .dynamics import flow_field, settling_time_bound

logger = logging.getLogger(__name__)

# Divergence: residual exceeds DIVERGENCE_FACTOR times the starting residual
DIVERGENCE_FACTOR = 1e6
# Safeguarded mode gives up on a step after this many halvings
MAX_HALVINGS = 60
# find_step tries eta0 * 2^-j for j = 0..MAX_STEP_HALVINGS
MAX_STEP_HALVINGS = 40


@dataclass
class EulerStep:
    """One accepted iterate of the forward-Euler scheme."""
    k: int
    x: Vector
    residual_norm: float
    halvings: int = 0


def _rounding_floor(problem: GaveProblem, norm_ab: float, x: Vector) -> float:
    """Residual changes below this are floating-point noise."""
    scale = norm_ab * float(np.linalg.norm(x)) + float(np.linalg.norm(problem.c))
    return 16.0 * np.finfo(float).eps * scale


def iterate_euler(
    problem: GaveProblem,
    params: FlowParams,
    eta: float,
    x0: Vector,
    safeguard: bool = False,
) -> Iterator[EulerStep]:
    """
    Yield the forward-Euler iterates x^(0), x^(1), ... without end.

    With safeguard on, a step is accepted only if it strictly decreases ||r||
    or lands within rounding of r = 0; otherwise it is retried with a halved
    step. After MAX_HALVINGS failed retries the generator stops.

    Raises:
        DivergenceError: If, with safeguard off, the residual grows by
            DIVERGENCE_FACTOR over the starting residual or stops being finite
    """
    x = problem.check_vector(x0, "x0").copy()
    r_norm = float(np.linalg.norm(residual(problem, x)))
    start = r_norm
    norm_ab = spectral_norm(problem.A) + spectral_norm(problem.B) if safeguard else 0.0
    k = 0
    yield EulerStep(k, x.copy(), r_norm)

    while True:
        step = eta
        halvings = 0
        with np.errstate(over="ignore", invalid="ignore"):
            direction = flow_field(params, problem, x)
            candidate = x + step * direction
            cand_norm = float(np.linalg.norm(residual(problem, candidate)))
            if safeguard:
                floor = max(_rounding_floor(problem, norm_ab, x), problem.zero_threshold)
                while not (cand_norm < r_norm or cand_norm <= floor):
                    halvings += 1
                    if halvings > MAX_HALVINGS:
                        logger.warning(
                            f"Safeguard could not decrease the residual at step {k}; stopping"
                        )
                        return
                    step *= 0.5
                    candidate = x + step * direction
                    cand_norm = float(np.linalg.norm(residual(problem, candidate)))

        if not safeguard and (
            not math.isfinite(cand_norm) or cand_norm > DIVERGENCE_FACTOR * max(start, 1e-300)
        ):
            raise DivergenceError(
                f"Residual grew from {start:.3g} to {cand_norm:.3g} at step {k + 1} (eta={eta})"
            )
        k += 1
        x = candidate
        r_norm = cand_norm
        yield EulerStep(k, x.copy(), r_norm, halvings)


def forward_euler_solve(
    problem: GaveProblem,
    params: FlowParams,
    config: EulerConfig,
    x0: Vector,
    cert: Optional[Certificate] = None,
    force: bool = False,
) -> IterateLog:
    """
    Run the forward-Euler iteration until ||r|| <= tol or max_iter steps.

    Args:
        problem: GAVE instance, certified unless force is set
        params: flow constants
        config: time-step, xi, stop rules and safeguard switch
        x0: starting point
        cert: certificate of problem, computed when omitted
        force: run without a certificate

    Returns:
        IterateLog with every iterate and residual norm

    Raises:
        CertificationError: If the problem is not certified and force is off
        DivergenceError: If the unsafeguarded iteration blows up
    """
    if not force:
        if cert is None:
            cert = certify_unique(problem)
        cert.require()
    if config.safeguard:
        logger.warning(
            "Safeguarded Euler: steps that do not lower the residual are halved, "
            "which departs from the plain forward-Euler scheme"
        )
    logger.info(
        f"Forward Euler: n={problem.n}, eta={config.eta}, tol={config.tol}, "
        f"max_iter={config.max_iter}"
    )

    iterates: List[Vector] = []
    norms: List[float] = []
    halvings = 0
    converged = False
    for step in iterate_euler(problem, params, config.eta, x0, config.safeguard):
        iterates.append(step.x)
        norms.append(step.residual_norm)
        halvings += step.halvings
        if step.residual_norm <= config.tol:
            converged = True
            break
        if step.k >= config.max_iter:
            break

    logger.info(
        f"Forward Euler finished after {len(iterates) - 1} steps, "
        f"residual={norms[-1]:.3e}, converged={converged}"
    )
    return IterateLog(
        iterates=np.array(iterates),
        residual_norms=np.array(norms),
        steps_taken=len(iterates) - 1,
        converged=converged,
        eta=config.eta,
        safeguarded=config.safeguard,
        halvings=halvings,
    )


def _ceil(value: float) -> int:
    """Ceiling that ignores rounding noise just above an integer."""
    return max(1, math.ceil(value - 1e-12 * abs(value)))


def _xi_root(config: EulerConfig, params: FlowParams, cert: Certificate) -> float:
    if not params.matches_xi(config.xi):
        raise ParameterError(
            f"lambda1={params.lambda1}, lambda2={params.lambda2} are not of the "
            f"xi-form for xi={config.xi}"
        )
    bound = settling_time_bound(params, cert)
    return math.sqrt(bound.c1 * bound.c2)


def fixed_step_count(config: EulerConfig, params: FlowParams, cert: Certificate) -> int:
    """
    Number of steps k* = ceil(pi * xi / (2 * eta * sqrt(c1 c2))).

    Raises:
        CertificationError: If the certificate is not certified
        ParameterError: If the exponents are not of the xi-form
    """
    root = _xi_root(config, params, cert)
    return _ceil(math.pi * config.xi / (2.0 * config.eta * root))


def envelope_horizon(config: EulerConfig, params: FlowParams, cert: Certificate) -> float:
    """Time pi * xi / (2 sqrt(c1 c2)) at which the continuous envelope reaches 0."""
    return math.pi * config.xi / (2.0 * _xi_root(config, params, cert))


def continuous_envelope(
    config: EulerConfig, params: FlowParams, cert: Certificate, t: float
) -> float:
    """
    Bound on ||x(t) - x*|| that holds for every starting point.

        sqrt(2) * (sqrt(c1/c2) * tan(pi/2 - sqrt(c1 c2) t / xi))^(xi/2)   for t < T_hat
        0                                                                  for t >= T_hat

    Returns +inf at t = 0.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return math.inf
    bound = settling_time_bound(params, cert)
    root = _xi_root(config, params, cert)
    angle = math.pi / 2.0 - root * t / config.xi
    if angle <= 0:
        return 0.0
    return _envelope_value(bound.c1, bound.c2, config.xi, angle)


def initial_condition_envelope(
    config: EulerConfig,
    params: FlowParams,
    cert: Certificate,
    distance: float,
    t: float,
) -> float:
    """
    Bound on ||x(t) - x*|| for a start at the given distance from x*.

    Same shape as continuous_envelope with pi/2 replaced by
    arctan(sqrt(c2/c1) * V0^(1/xi)), V0 = distance^2 / 2, so it never exceeds it.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    bound = settling_time_bound(params, cert)
    root = _xi_root(config, params, cert)
    v0 = 0.5 * distance**2
    start_angle = math.atan(math.sqrt(bound.c2 / bound.c1) * v0 ** (1.0 / config.xi))
    angle = start_angle - root * t / config.xi
    if angle <= 0:
        return 0.0
    return _envelope_value(bound.c1, bound.c2, config.xi, angle)


def _envelope_value(c1: float, c2: float, xi: float, angle: float) -> float:
    try:
        return math.sqrt(2.0) * math.pow(math.sqrt(c1 / c2) * math.tan(angle), xi / 2.0)
    except OverflowError:
        return math.inf


def closeness_check(
    traj: Trajectory,
    log: IterateLog,
    eta: float,
    horizon: float,
    eps: float,
) -> bool:
    """
    Test whether the discrete and continuous solutions are (T, eps)-close.

    True iff ||x^(k) - x(eta k)|| <= eps for every k with eta * k <= horizon,
    where x(eta k) is linearly interpolated between trajectory samples. A
    trajectory that stopped because it settled is held at its last state.

    Raises:
        TrajectoryTooShortError: If either solution does not reach the horizon
    """
    if not (eta > 0 and eps > 0 and horizon >= 0):
        raise ValueError("eta and eps must be positive and horizon nonnegative")
    if traj.end_time < horizon and not traj.settled:
        raise TrajectoryTooShortError(
            f"Trajectory ends at t={traj.end_time:.6g}, horizon is {horizon:.6g}"
        )
    last_k = int(math.floor(horizon / eta + 1e-9))
    if log.steps_taken < last_k and not log.converged:
        raise TrajectoryTooShortError(
            f"Iterate log has {log.steps_taken} steps, horizon needs {last_k}"
        )
    last_k = min(last_k, log.steps_taken)

    times = eta * np.arange(last_k + 1)
    reference = np.column_stack(
        [np.interp(times, traj.times, traj.states[:, i]) for i in range(traj.states.shape[1])]
    )
    deviations = np.linalg.norm(log.iterates[: last_k + 1] - reference, axis=1)
    worst = float(deviations.max())
    logger.debug(f"Closeness over {last_k + 1} grid points: max deviation {worst:.3e}")
    return worst <= eps


def _satisfies_termination(
    problem: GaveProblem,
    params: FlowParams,
    config: EulerConfig,
    cert: Certificate,
    eps: float,
    x0: Vector,
    x_star: Optional[Vector],
    tail_steps: Optional[int],
) -> bool:
    k_star = fixed_step_count(config, params, cert)
    last = k_star + (k_star if tail_steps is None else tail_steps)
    for step in iterate_euler(problem, params, config.eta, x0):
        if x_star is not None:
            distance = float(np.linalg.norm(step.x - x_star))
        else:
            distance = step.residual_norm / cert.gap
        if step.k <= k_star:
            limit = continuous_envelope(config, params, cert, config.eta * step.k) + eps
        else:
            limit = eps
        if not distance <= limit:
            logger.debug(
                f"eta={config.eta:.6g} rejected at k={step.k} (k*={k_star}): "
                f"distance {distance:.3e} > {limit:.3e}"
            )
            return False
        if step.k >= last:
            return True
    return False


def find_step(
    problem: GaveProblem,
    params: FlowParams,
    xi: float,
    eps: float,
    eta0: float,
    x0: Vector,
    cert: Optional[Certificate] = None,
    x_star: Optional[Vector] = None,
    tail_steps: Optional[int] = None,
) -> float:
    """
    Largest eta = eta0 * 2^-j (0 <= j <= 40) with the finite-termination property.

    The property: ||x^(k) - x*|| <= envelope(eta k) + eps for k <= k* and
    ||x^(k) - x*|| <= eps for k* < k <= k* + tail_steps (tail_steps defaults
    to k*). Without x_star the distance is replaced by the certified upper
    bound ||r(x)|| / gap, which can only make the test stricter.

    Raises:
        CertificationError: If the problem is not certified
        StepSearchError: If no eta passes within 40 halvings
    """
    if cert is None:
        cert = certify_unique(problem)
    cert.require()
    if not (eps > 0 and eta0 > 0):
        raise ValueError("eps and eta0 must be positive")
    if x_star is not None:
        x_star = problem.check_vector(x_star, "x_star")

    eta = eta0
    for j in range(MAX_STEP_HALVINGS + 1):
        config = EulerConfig(eta=eta, xi=xi)
        try:
            accepted = _satisfies_termination(
                problem, params, config, cert, eps, x0, x_star, tail_steps
            )
        except DivergenceError as e:
            logger.debug(f"eta={eta:.6g} rejected: {e}")
            accepted = False
        if accepted:
            logger.info(f"Accepted eta={eta:.6g} after {j} halvings")
            return eta
        eta *= 0.5
    raise StepSearchError(f"No admissible eta within {MAX_STEP_HALVINGS} halvings of {eta0}")
