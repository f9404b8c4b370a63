"""
Unit tests for the fixed-time flow, its constants and the baseline network.
"""

import math

import numpy as np
import pytest

from gave_solver.algorithms import certify_unique, residual_norm, verify_solution
from gave_solver.algorithms.dynamics import (
    GaoWangBaseline,
    baseline_gw_field,
    flow_field,
    lipschitz_constant,
    lyapunov,
    rho,
    settling_time_bound,
    settling_time_bound_lyyhc,
    settling_time_from,
)
from gave_solver.core import (
    ZERO_RESIDUAL_FACTOR,
    Certificate,
    CertificationError,
    FlowParams,
    GaveProblem,
    ParameterError,
    SingularMatrixError,
)

# T_max for gamma = rho1 = rho2 = 1, lambda1 = 0.5, gap = 1
T_MAX_XI4 = 8.1204141210
T_MAX_LAMBDA2_3 = 5.2568284600
T_MAX_EARLIER_2I = 18.4934147714


@pytest.fixture
def scalar_problem():
    return GaveProblem(A=[[2.0]], B=[[1.0]], c=[1.0])


@pytest.fixture
def unit_gap_cert():
    return Certificate(
        sigma_min_A=2.0, norm_B=1.0, gap=1.0, certified=True, norm_A=2.0, tol=1e-10
    )


@pytest.mark.unit
class TestRho:
    """Test cases for the time-scaling factor."""

    def test_rho_at_unit_residual(self):
        """Test rho = rho1 + rho2 at ||r|| = 1."""
        assert rho(FlowParams(), 1.0) == pytest.approx(2.0)

    def test_rho_general(self):
        """Test rho at ||r|| = 4 with lambda = (0.5, 1.5)."""
        assert rho(FlowParams(rho1=2.0, rho2=3.0), 4.0) == pytest.approx(2.0 * 0.5 + 3.0 * 2.0)

    def test_rho_zero_residual(self):
        """Test that rho is 0 at r = 0."""
        assert rho(FlowParams(), 0.0) == 0.0

    def test_rho_inside_zero_band(self):
        """Test that tiny residuals count as zero."""
        assert rho(FlowParams(), 1e-15, zero_threshold=1e-14) == 0.0
        assert rho(FlowParams(), 1e-13, zero_threshold=1e-14) > 0.0


@pytest.mark.unit
class TestFlowField:
    """Test cases for the flow field and its Lipschitz constant."""

    def test_field_at_origin(self, scalar_problem):
        """Test -rho * gamma * A^T r at x = 0: r = -1, rho = 2, A^T r = -2."""
        np.testing.assert_allclose(flow_field(FlowParams(), scalar_problem, [0.0]), [4.0])

    def test_field_vanishes_at_solution(self, scalar_problem):
        """Test that the solution is an equilibrium."""
        np.testing.assert_array_equal(flow_field(FlowParams(), scalar_problem, [1.0]), [0.0])

    def test_field_scales_with_gamma(self, scalar_problem):
        """Test linearity in gamma."""
        base = flow_field(FlowParams(), scalar_problem, [0.3])
        scaled = flow_field(FlowParams(gamma=2.5), scalar_problem, [0.3])
        np.testing.assert_allclose(scaled, 2.5 * base)

    def test_lipschitz_constant(self, scalar_problem):
        """Test gamma * (||A^T A|| + ||A^T B||) = 4 + 2."""
        assert lipschitz_constant(FlowParams(), scalar_problem) == pytest.approx(6.0)
        assert lipschitz_constant(FlowParams(gamma=0.5), scalar_problem) == pytest.approx(3.0)

    def test_field_magnitude_bound(self):
        """Test ||field|| <= gamma ||A|| (rho1 ||r||^lambda1 + rho2 ||r||^lambda2)."""
        rng = np.random.default_rng(3)
        params = FlowParams(gamma=1.7, rho1=0.8, rho2=2.5, lambda1=0.4, lambda2=1.8)
        for _ in range(20):
            A = 3.0 * np.eye(3) + rng.normal(scale=0.3, size=(3, 3))
            B = rng.normal(scale=0.2, size=(3, 3))
            problem = GaveProblem(A=A, B=B, c=rng.normal(size=3))
            norm_a = float(np.linalg.norm(A, 2))
            for _ in range(10):
                x = rng.normal(scale=5.0, size=3)
                r_norm = residual_norm(problem, x)
                bound = params.gamma * norm_a * (
                    params.rho1 * r_norm**params.lambda1 + params.rho2 * r_norm**params.lambda2
                )
                field_norm = float(np.linalg.norm(flow_field(params, problem, x)))
                assert field_norm <= bound * (1.0 + 1e-12)

    def test_zero_field_iff_verified(self):
        """Test field(x) = 0 exactly when x passes verification at the zero band."""
        rng = np.random.default_rng(9)
        for _ in range(20):
            A = 3.0 * np.eye(3) + rng.normal(scale=0.3, size=(3, 3))
            B = rng.normal(scale=0.2, size=(3, 3))
            x_star = rng.normal(size=3)
            problem = GaveProblem(A=A, B=B, c=A @ x_star - B @ np.abs(x_star))
            points = [x_star] + [x_star + rng.normal(scale=s, size=3) for s in (1e-3, 1.0)]
            for x in points:
                vanishes = not np.any(flow_field(FlowParams(), problem, x))
                assert vanishes == verify_solution(problem, x, ZERO_RESIDUAL_FACTOR)
            assert verify_solution(problem, x_star, ZERO_RESIDUAL_FACTOR)


@pytest.mark.unit
class TestSettlingTime:
    """Test cases for the settling-time bounds."""

    def test_default_params(self, unit_gap_cert):
        """Test c1, c2, kappa and T_max for lambda = (0.5, 1.5), gap = 1."""
        bound = settling_time_bound(FlowParams(), unit_gap_cert)
        assert bound.c1 == pytest.approx(2.0**-0.25)
        assert bound.c2 == pytest.approx(2.0**0.25)
        assert bound.kappa1 == pytest.approx(0.75)
        assert bound.kappa2 == pytest.approx(1.25)
        assert bound.t_max == pytest.approx(T_MAX_XI4, abs=1e-6)

    def test_worked_constants(self, unit_gap_cert):
        """Test lambda2 = 3: c2 = 2, kappa2 = 2, T_max = 5.2568284."""
        bound = settling_time_bound(FlowParams(lambda1=0.5, lambda2=3.0), unit_gap_cert)
        assert bound.c1 == pytest.approx(0.8408964, abs=1e-7)
        assert bound.c2 == pytest.approx(2.0)
        assert bound.kappa2 == pytest.approx(2.0)
        assert bound.t_max == pytest.approx(T_MAX_LAMBDA2_3, abs=1e-6)

    def test_gap_scaling(self):
        """Test that a larger gap shortens T_max."""
        small = Certificate(1.5, 1.0, 0.5, True, 1.5, 1e-10)
        large = Certificate(3.0, 1.0, 2.0, True, 3.0, 1e-10)
        params = FlowParams()
        assert settling_time_bound(params, large).t_max < settling_time_bound(params, small).t_max

    def test_uncertified(self):
        """Test that an uncertified certificate is rejected."""
        cert = Certificate(1.0, 1.0, 0.0, False, 1.0, 1e-10)
        with pytest.raises(CertificationError):
            settling_time_bound(FlowParams(), cert)

    def test_from_certificate_of_problem(self, scalar_problem):
        """Test the bound computed from a real certificate."""
        bound = settling_time_bound(FlowParams(), certify_unique(scalar_problem))
        assert bound.t_max == pytest.approx(T_MAX_XI4, abs=1e-6)


@pytest.mark.unit
class TestEarlierBound:
    """Test cases for the B = I bound that the flow improves on."""

    def test_worked_constants(self):
        """Test A = 2I with lambda = (0.5, 3)."""
        bound = settling_time_bound_lyyhc(FlowParams(lambda1=0.5, lambda2=3.0), 2.0 * np.eye(3))
        assert bound.c1 == pytest.approx(0.2365021, abs=1e-7)
        assert bound.c2 == pytest.approx(0.6328125)
        assert bound.t_max == pytest.approx(T_MAX_EARLIER_2I, abs=1e-6)

    def test_improvement(self, unit_gap_cert):
        """Test c1 > c1', c2 > c2' and T_max < T_max' at A = 2I."""
        params = FlowParams(lambda1=0.5, lambda2=3.0)
        new = settling_time_bound(params, unit_gap_cert)
        old = settling_time_bound_lyyhc(params, 2.0 * np.eye(2))
        assert new.c1 > old.c1
        assert new.c2 > old.c2
        assert new.t_max < old.t_max

    def test_needs_sigma_min_above_one(self):
        """Test that sigma_min(A) <= 1 is rejected."""
        with pytest.raises(CertificationError, match="sigma_min"):
            settling_time_bound_lyyhc(FlowParams(), 0.9 * np.eye(2))

    def test_singular(self):
        """Test that a singular A is rejected."""
        with pytest.raises(SingularMatrixError):
            settling_time_bound_lyyhc(FlowParams(), np.array([[1.0, 1.0], [1.0, 1.0]]))


@pytest.mark.unit
class TestInitialConditionSettlingTime:
    """Test cases for settling_time_from and the Lyapunov function."""

    def test_unit_distance(self, unit_gap_cert):
        """Test distance 1, xi = 4: 4 * arctan(1) = pi."""
        assert settling_time_from(FlowParams(), unit_gap_cert, 4.0, 1.0) == pytest.approx(math.pi)

    def test_bounded_by_uniform_time(self, unit_gap_cert):
        """Test that every distance settles before pi * xi / 2."""
        for distance in (0.0, 1e-3, 1.0, 1e3, 1e6):
            t = settling_time_from(FlowParams(), unit_gap_cert, 4.0, distance)
            assert 0.0 <= t <= 2.0 * math.pi

    def test_zero_distance(self, unit_gap_cert):
        """Test that the solution settles at once."""
        assert settling_time_from(FlowParams(), unit_gap_cert, 4.0, 0.0) == 0.0

    def test_needs_xi_form(self, unit_gap_cert):
        """Test that general exponents are rejected."""
        with pytest.raises(ParameterError):
            settling_time_from(FlowParams(lambda1=0.5, lambda2=3.0), unit_gap_cert, 4.0, 1.0)

    def test_lyapunov(self):
        """Test V(x) = ||x - x*||^2 / 2."""
        assert lyapunov([1.0, 2.0], [0.0, 0.0]) == pytest.approx(2.5)
        assert lyapunov([1.0, 2.0], [1.0, 2.0]) == 0.0


@pytest.mark.unit
class TestBaseline:
    """Test cases for the Gao-Wang network."""

    def test_output(self, scalar_problem):
        """Test x = A^-1 (Bz + c) = (z + 1) / 2."""
        network = GaoWangBaseline(scalar_problem)
        np.testing.assert_allclose(network.output([0.0]), [0.5])
        np.testing.assert_allclose(network.output([3.0]), [2.0])

    def test_equilibrium(self, scalar_problem):
        """Test that z = |x*| = 1 is an equilibrium."""
        np.testing.assert_allclose(GaoWangBaseline(scalar_problem).field([1.0]), [0.0], atol=1e-15)

    def test_field_scaling(self, scalar_problem):
        """Test the rho / 2 factor: at z = 0 the field is rho / 2 * 0.5."""
        np.testing.assert_allclose(GaoWangBaseline(scalar_problem, 2.0).field([0.0]), [0.5])
        np.testing.assert_allclose(baseline_gw_field(scalar_problem, 2.0, [0.0]), [0.5])

    def test_initial_state(self, scalar_problem):
        """Test the natural start |x0|."""
        network = GaoWangBaseline(scalar_problem)
        np.testing.assert_array_equal(network.initial_state([-3.0]), [3.0])
        np.testing.assert_array_equal(network.initial_state(), [0.0])

    def test_singular_a(self):
        """Test that a singular A is rejected at construction."""
        problem = GaveProblem(A=np.zeros((2, 2)), B=np.zeros((2, 2)), c=np.ones(2))
        with pytest.raises(SingularMatrixError, match="A is numerically singular"):
            GaoWangBaseline(problem)

    def test_invalid_scale(self, scalar_problem):
        """Test that rho_scale must be positive."""
        with pytest.raises(ParameterError):
            GaoWangBaseline(scalar_problem, 0.0)
