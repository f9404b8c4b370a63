"""
Unit tests for the forward-Euler scheme, k*, the envelopes, closeness and
the step-size search.
"""

import logging
import math
from itertools import islice

import numpy as np
import pytest

from gave_solver.algorithms import certify_unique
from gave_solver.algorithms.dynamics import settling_time_bound
from gave_solver.algorithms.euler import (
    closeness_check,
    continuous_envelope,
    envelope_horizon,
    find_step,
    fixed_step_count,
    forward_euler_solve,
    initial_condition_envelope,
    iterate_euler,
)
from gave_solver.algorithms.runge_kutta import default_reference_step, reference_flow_solve
from gave_solver.core import (
    Certificate,
    CertificationError,
    DivergenceError,
    EulerConfig,
    FlowParams,
    GaveProblem,
    IterateLog,
    ParameterError,
    Trajectory,
    TrajectoryTooShortError,
)


@pytest.fixture
def scalar_problem():
    """2x - |x| = 1, solved by x = 1, gap 1."""
    return GaveProblem(A=[[2.0]], B=[[1.0]], c=[1.0])


@pytest.fixture
def cert(scalar_problem):
    return certify_unique(scalar_problem)


@pytest.mark.unit
class TestForwardEuler:
    """Test cases for forward_euler_solve and iterate_euler."""

    def test_first_iterate(self, scalar_problem):
        """Test x1 = 0 - 0.1 * 2 * (-2) = 0.4."""
        log = forward_euler_solve(
            scalar_problem, FlowParams(), EulerConfig(eta=0.1, max_iter=1), [0.0]
        )
        assert log.steps_taken == 1
        assert log.iterates[1, 0] == pytest.approx(0.4)
        assert log.residual_norms[1] == pytest.approx(0.6)
        assert not log.converged

    def test_start_at_solution(self, scalar_problem):
        """Test convergence at step 0 when x0 solves the problem."""
        log = forward_euler_solve(scalar_problem, FlowParams(), EulerConfig(), [1.0])
        assert log.converged
        assert log.steps_taken == 0
        assert log.iterates.shape == (1, 1)

    def test_reaches_neighbourhood_within_k_star(self, scalar_problem, cert):
        """Test |x(k) - 1| <= 1e-3 for some k <= k* at eta = 0.01."""
        config = EulerConfig(eta=0.01)
        k_star = fixed_step_count(config, FlowParams(), cert)
        assert k_star == 629
        log = forward_euler_solve(
            scalar_problem, FlowParams(), EulerConfig(eta=0.01, max_iter=k_star), [0.0]
        )
        errors = np.abs(log.iterates[:, 0] - 1.0)
        assert errors.min() <= 1e-3
        np.testing.assert_allclose(
            log.residual_norms,
            np.abs(2 * log.iterates[:, 0] - np.abs(log.iterates[:, 0]) - 1.0),
        )

    def test_plain_iteration_chatters(self, scalar_problem):
        """Test that the plain scheme at eta = 0.1 stalls near residual eta^2."""
        log = forward_euler_solve(
            scalar_problem, FlowParams(), EulerConfig(eta=0.1, max_iter=500), [0.0]
        )
        assert not log.converged
        assert log.residual_norms[-100:].max() < 0.05
        assert log.residual_norms[-100:].max() > 1e-4

    def test_safeguard_converges(self, scalar_problem, caplog):
        """Test that the safeguarded scheme reaches tol and is flagged."""
        config = EulerConfig(eta=0.1, safeguard=True)
        with caplog.at_level(logging.WARNING):
            log = forward_euler_solve(scalar_problem, FlowParams(), config, [0.0])
        assert log.converged
        assert log.safeguarded
        assert log.final_residual <= 1e-8
        assert abs(log.final[0] - 1.0) <= 1e-8
        assert np.all(np.diff(log.residual_norms) <= 1e-13)
        assert "Safeguarded Euler" in caplog.text

    def test_divergence(self, scalar_problem):
        """Test that a huge step is reported as divergence."""
        with pytest.raises(DivergenceError):
            forward_euler_solve(scalar_problem, FlowParams(), EulerConfig(eta=1e6), [0.0])

    def test_generator_yields_start(self, scalar_problem):
        """Test that iterate_euler starts with x0 at k = 0."""
        steps = iterate_euler(scalar_problem, FlowParams(), 0.1, [0.0])
        first = next(steps)
        second = next(steps)
        assert first.k == 0
        assert first.x[0] == 0.0
        assert first.residual_norm == pytest.approx(1.0)
        assert second.k == 1
        assert second.x[0] == pytest.approx(0.4)

    def test_safeguard_does_not_cycle_on_sign_flips(self):
        """Test 3x - |x| = -1 from 0, where sign-flipping steps keep ||r|| at 1/9."""
        problem = GaveProblem(A=[[3.0]], B=[[1.0]], c=[-1.0])
        config = EulerConfig(eta=0.1, tol=1e-12, safeguard=True)
        log = forward_euler_solve(problem, FlowParams(), config, [0.0])
        assert log.converged
        assert log.final[0] == pytest.approx(-0.25, abs=1e-12)
        assert np.all(np.diff(log.residual_norms) < 0)

    def test_safeguard_steps_strictly_decrease(self):
        """Test that every safeguarded step lowers ||r|| until r vanishes."""
        problem = GaveProblem(A=[[3.0]], B=[[1.0]], c=[-1.0])
        steps = list(islice(iterate_euler(problem, FlowParams(), 0.1, [0.0], True), 200))
        norms = [step.residual_norm for step in steps]
        for before, after in zip(norms, norms[1:]):
            assert after < before or after <= 1e-14
        assert norms[-1] <= 1e-14

    def test_uncertified_problem_is_rejected(self):
        """Test that x - |x| = 1 needs force to run."""
        problem = GaveProblem(A=[[1.0]], B=[[1.0]], c=[1.0])
        config = EulerConfig(eta=0.1, max_iter=5)
        with pytest.raises(CertificationError):
            forward_euler_solve(problem, FlowParams(), config, [0.0])
        log = forward_euler_solve(problem, FlowParams(), config, [0.0], force=True)
        assert log.steps_taken == 5
        assert not log.converged

    def test_given_certificate_is_checked(self, scalar_problem):
        """Test that a supplied uncertified certificate blocks the run."""
        cert = Certificate(1.0, 1.0, 0.0, False, 1.0, 1e-10)
        with pytest.raises(CertificationError):
            forward_euler_solve(scalar_problem, FlowParams(), EulerConfig(), [0.0], cert=cert)


@pytest.mark.unit
class TestFixedStepCount:
    """Test cases for k*."""

    @pytest.mark.parametrize("eta, expected", [(0.1, 63), (0.2, 32), (2 * math.pi, 1)])
    def test_worked_examples(self, cert, eta, expected):
        """Test k* = ceil(pi * xi / (2 eta sqrt(c1 c2))) with sqrt(c1 c2) = 1."""
        assert fixed_step_count(EulerConfig(eta=eta), FlowParams(), cert) == expected

    def test_monotone_in_eta(self, cert):
        """Test that k* does not increase with eta."""
        counts = [
            fixed_step_count(EulerConfig(eta=eta), FlowParams(), cert)
            for eta in (0.01, 0.05, 0.1, 0.5, 1.0)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_monotone_in_gap(self):
        """Test that k* does not increase with the gap."""
        counts = [
            fixed_step_count(
                EulerConfig(), FlowParams(), Certificate(1.0 + g, 1.0, g, True, 1.0 + g, 1e-10)
            )
            for g in (0.5, 1.0, 2.0, 4.0)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_uncertified(self):
        """Test that an uncertified certificate is rejected."""
        with pytest.raises(CertificationError):
            fixed_step_count(
                EulerConfig(), FlowParams(), Certificate(1.0, 1.0, 0.0, False, 1.0, 1e-10)
            )

    def test_needs_xi_form(self, cert):
        """Test that exponents must match config.xi."""
        with pytest.raises(ParameterError, match="xi-form"):
            fixed_step_count(EulerConfig(xi=5.0), FlowParams(), cert)


@pytest.mark.unit
class TestEnvelopes:
    """Test cases for the continuous and initial-condition envelopes."""

    def test_infinite_at_zero(self, cert):
        """Test the tangent pole at t = 0."""
        assert continuous_envelope(EulerConfig(), FlowParams(), cert, 0.0) == math.inf

    def test_value_at_quarter_angle(self, cert):
        """Test t = pi: angle pi/4, value sqrt(2) * (2^-1/4)^2 = 1."""
        value = continuous_envelope(EulerConfig(), FlowParams(), cert, math.pi)
        assert value == pytest.approx(1.0)

    def test_zero_after_horizon(self, cert):
        """Test that the envelope vanishes from T_hat = 2 pi on."""
        assert envelope_horizon(EulerConfig(), FlowParams(), cert) == pytest.approx(2 * math.pi)
        assert continuous_envelope(EulerConfig(), FlowParams(), cert, 2 * math.pi) == pytest.approx(
            0.0, abs=1e-12
        )
        assert continuous_envelope(EulerConfig(), FlowParams(), cert, 7.0) == 0.0

    def test_decreasing(self, cert):
        """Test that the envelope decreases in t."""
        values = [
            continuous_envelope(EulerConfig(), FlowParams(), cert, t)
            for t in np.linspace(0.1, 6, 30)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_negative_time(self, cert):
        """Test that t < 0 is rejected."""
        with pytest.raises(ValueError):
            continuous_envelope(EulerConfig(), FlowParams(), cert, -1.0)

    def test_initial_condition_envelope_starts_at_distance(self, cert):
        """Test that the x0-dependent envelope equals ||x0 - x*|| at t = 0."""
        value = initial_condition_envelope(EulerConfig(), FlowParams(), cert, 3.0, 0.0)
        assert value == pytest.approx(3.0)

    def test_initial_condition_envelope_below_uniform(self, cert):
        """Test that the x0-dependent envelope never exceeds the uniform one."""
        for distance in (0.1, 1.0, 100.0):
            for t in np.linspace(0.05, 7.0, 40):
                tight = initial_condition_envelope(EulerConfig(), FlowParams(), cert, distance, t)
                loose = continuous_envelope(EulerConfig(), FlowParams(), cert, t)
                assert tight <= loose * (1 + 1e-12)

    def test_initial_condition_envelope_reaches_zero(self, cert):
        """Test that a unit start settles by t = pi."""
        assert initial_condition_envelope(EulerConfig(), FlowParams(), cert, 1.0, 3.2) == 0.0


def _log_from(states, eta):
    states = np.asarray(states, dtype=float)
    return IterateLog(
        iterates=states,
        residual_norms=np.zeros(states.shape[0]),
        steps_taken=states.shape[0] - 1,
        converged=False,
        eta=eta,
    )


@pytest.mark.unit
class TestCloseness:
    """Test cases for closeness_check."""

    @pytest.fixture
    def traj(self):
        times = np.linspace(0.0, 2.0, 21)
        states = np.column_stack([np.sin(times), np.cos(times)])
        return Trajectory(times, states, np.zeros(21))

    def test_sampled_log_is_close(self, traj):
        """Test that a log sampled from the trajectory is close for any eps."""
        log = _log_from(traj.states[::2], 0.2)
        assert closeness_check(traj, log, 0.2, 2.0, 1e-12)

    def test_shifted_log_is_not_close(self, traj):
        """Test that a uniform shift by 2 eps fails."""
        eps = 0.01
        shift = np.array([2 * eps, 0.0])
        log = _log_from(traj.states[::2] + shift, 0.2)
        assert not closeness_check(traj, log, 0.2, 2.0, eps)

    def test_interpolation(self, traj):
        """Test that off-grid times use linear interpolation."""
        log = _log_from(traj.states[::2], 0.2)
        assert closeness_check(traj, log, 0.2, 1.0, 1e-12)
        offgrid = _log_from(
            [[np.interp(k * 0.15, traj.times, traj.states[:, 0])] for k in range(14)], 0.15
        )
        single = Trajectory(traj.times, traj.states[:, :1], np.zeros(21))
        assert closeness_check(single, offgrid, 0.15, 1.95, 1e-12)

    def test_trajectory_too_short(self, traj):
        """Test that a horizon past the trajectory is an error."""
        log = _log_from(np.zeros((40, 2)), 0.1)
        with pytest.raises(TrajectoryTooShortError):
            closeness_check(traj, log, 0.1, 3.0, 0.1)

    def test_log_too_short(self, traj):
        """Test that a log shorter than the horizon is an error."""
        log = _log_from(traj.states[:3], 0.1)
        with pytest.raises(TrajectoryTooShortError):
            closeness_check(traj, log, 0.1, 2.0, 0.1)

    def test_settled_trajectory_is_held(self):
        """Test that a settled trajectory is held at its last state."""
        traj = Trajectory(
            np.array([0.0, 0.5]), np.array([[0.0], [1.0]]), np.array([1.0, 0.0]), settled=True
        )
        log = _log_from([[0.0], [1.0], [1.0], [1.0]], 0.5)
        assert closeness_check(traj, log, 0.5, 1.5, 1e-12)

    def test_scalar_euler_and_flow(self, scalar_problem):
        """Test eta = 0.01, horizon 10, eps 0.05 on the scalar instance."""
        params = FlowParams()
        eta = 0.01
        t_max = settling_time_bound(params, certify_unique(scalar_problem)).t_max
        traj = reference_flow_solve(
            scalar_problem, params, default_reference_step(eta, t_max), 10.0, [0.0]
        )
        config = EulerConfig(eta=eta, max_iter=1000)
        log = forward_euler_solve(scalar_problem, params, config, [0.0])
        assert closeness_check(traj, log, eta, 10.0, 0.05)


@pytest.mark.unit
class TestFindStep:
    """Test cases for the step-size search."""

    def test_search_from_one(self, scalar_problem):
        """Test that the search returns a power-of-two fraction of eta0."""
        eta = find_step(scalar_problem, FlowParams(), 4.0, 1e-2, 1.0, [0.0])
        assert 0 < eta <= 1.0
        j = round(-math.log2(eta))
        assert eta == 2.0**-j

    def test_accepted_step_is_stable(self, scalar_problem):
        """Test that restarting at the accepted step accepts it at once."""
        eta = find_step(scalar_problem, FlowParams(), 4.0, 1e-2, 1.0, [0.0])
        assert find_step(scalar_problem, FlowParams(), 4.0, 1e-2, eta, [0.0]) == eta

    def test_accepted_step_satisfies_property(self, scalar_problem, cert):
        """Test the termination property on the accepted step with the true x*."""
        eps = 1e-2
        eta = find_step(scalar_problem, FlowParams(), 4.0, eps, 1.0, [0.0], x_star=[1.0])
        config = EulerConfig(eta=eta)
        k_star = fixed_step_count(config, FlowParams(), cert)
        log = forward_euler_solve(
            scalar_problem, FlowParams(), EulerConfig(eta=eta, max_iter=2 * k_star), [0.0]
        )
        for k, x in enumerate(log.iterates):
            distance = abs(x[0] - 1.0)
            if k <= k_star:
                assert distance <= continuous_envelope(config, FlowParams(), cert, eta * k) + eps
            else:
                assert distance <= eps

    def test_huge_initial_step(self, scalar_problem):
        """Test that divergent trial steps are rejected."""
        eta = find_step(scalar_problem, FlowParams(), 4.0, 1e-2, 1e6, [0.0])
        assert eta < 1e6

    def test_uncertified(self):
        """Test that an uncertified problem is rejected."""
        problem = GaveProblem(A=[[1.0]], B=[[1.0]], c=[1.0])
        with pytest.raises(CertificationError):
            find_step(problem, FlowParams(), 4.0, 1e-2, 1.0, [0.0])
