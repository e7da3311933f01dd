import math
from fractions import Fraction
from math import comb, factorial

import numpy as np
import pytest

from freejacobi import (
    DomainError,
    IntegrationError,
    JacobiParams,
    MomentState,
    TailCertificationError,
    chebyshev_functional,
    integrate_moments,
    log_functional,
    log_identity_residual,
    m1_exact,
    moment_rhs,
    resolvent_functional,
    stationary_log_potentials,
    stationary_measure,
    stationary_moments,
    support_edges,
)
from freejacobi.moments import (
    arcsine_recurrence_check,
    catalan_identity_check,
    catalan_number,
    relaxation_rate,
    shifted_chebyshev_coefficients,
    validate_moment_vector,
)

ARCSINE = JacobiParams(1.0, 0.5)
INTERIOR = JacobiParams(0.5, 0.5)


def state(params, m):
    return MomentState(0.0, np.asarray(m, dtype=float), params)


class TestRhs:
    def test_stationary_fixed_point(self):
        for p in (ARCSINE, INTERIOR, JacobiParams(0.8, 0.3)):
            rhs = moment_rhs(state(p, stationary_moments(p, 24)))
            assert np.max(np.abs(rhs)) <= 1e-6

    def test_identity_start(self):
        # m_n = 1: the quadratic sum telescopes away, dm_n/dt = n (theta - 1)
        p = JacobiParams(0.7, 0.4)
        rhs = moment_rhs(state(p, np.ones(9)))
        n = np.arange(9, dtype=float)
        assert np.allclose(rhs, n * (p.theta - 1.0), atol=1e-14)

    def test_degenerate_start(self):
        # m_n = 0 for n >= 1
        p = JacobiParams(0.7, 0.4)
        m = np.zeros(6)
        m[0] = 1.0
        rhs = moment_rhs(state(p, m))
        assert rhs[1] == pytest.approx(p.theta)
        assert rhs[2] == 0.0

    def test_mass_conserved(self):
        rhs = moment_rhs(state(INTERIOR, 0.3 ** np.arange(12)))
        assert rhs[0] == 0.0


class TestIntegration:
    def test_stationary_trajectory_constant(self):
        m0 = stationary_moments(INTERIOR, 24)
        traj = integrate_moments(INTERIOR, m0, T=10.0, h=1e-2, N=24, record_every=100)
        assert np.max(np.abs(traj.moments - m0)) <= 1e-6

    def test_m1_against_closed_form(self):
        traj = integrate_moments(ARCSINE, 0.25, T=1.0, h=1e-3, N=10)
        assert traj.moments[-1, 1] == pytest.approx(0.5 - 0.25 * math.exp(-1.0), abs=1e-8)

    def test_relaxation_to_stationary(self):
        traj = integrate_moments(INTERIOR, 0.25, T=30.0, h=5e-3, N=10, record_every=1000)
        mst = stationary_moments(INTERIOR, 10)
        assert np.max(np.abs(traj.moments[-1] - mst)) <= 1e-6

    def test_monotone_along_trajectory(self):
        traj = integrate_moments(INTERIOR, 0.6, T=2.0, h=1e-3, N=20, record_every=100)
        for row in traj.moments:
            assert np.all(np.diff(row) <= 1e-9)

    def test_invalid_starts(self):
        with pytest.raises(DomainError):
            integrate_moments(INTERIOR, 1.5, T=1.0)
        with pytest.raises(DomainError):
            integrate_moments(INTERIOR, np.array([1.0, 0.2, 0.3]), T=1.0, N=2)

    def test_blowup_reports_time_and_component(self):
        # an absurd step puts RK4 far outside its stability region; the
        # per-step monotonicity guard must catch it with location info
        with pytest.raises(IntegrationError) as exc:
            integrate_moments(INTERIOR, 0.5, T=4.0, h=2.0, N=30)
        assert exc.value.t is not None and exc.value.n is not None

    def test_measure_start(self):
        mu = stationary_measure(INTERIOR, grid_size=128)
        traj = integrate_moments(INTERIOR, mu, T=0.5, h=1e-3, N=8, record_every=100)
        assert np.max(np.abs(traj.moments[-1] - traj.moments[0])) <= 1e-6

    def test_validator(self):
        with pytest.raises(DomainError):
            validate_moment_vector(np.array([1.0, 0.2, 0.5, 0.1, 0.05]))


class TestM1Exact:
    def test_endpoints(self):
        assert m1_exact(INTERIOR, 0.25, 0.0) == 0.25
        assert m1_exact(INTERIOR, 0.25, 50.0) == pytest.approx(0.5, abs=1e-15)

    def test_value(self):
        assert m1_exact(ARCSINE, 0.25, 1.0) == pytest.approx(0.40803013970714, abs=1e-12)


class TestChebyshev:
    def test_low_orders(self):
        m = [1.0, 0.3, 0.2, 0.15]
        assert chebyshev_functional(m, 0) == 1.0
        assert chebyshev_functional(m, 1) == pytest.approx(2 * 0.3 - 1.0)
        assert chebyshev_functional(m, 2) == pytest.approx(8 * 0.2 - 8 * 0.3 + 1.0)

    def test_coefficients_against_sympy(self):
        sympy = pytest.importorskip("sympy")
        x = sympy.Symbol("x")
        for k in range(9):
            expanded = sympy.Poly(sympy.chebyshevt(k, 2 * x - 1), x).all_coeffs()[::-1]
            assert [int(c) for c in expanded] == shifted_chebyshev_coefficients(k)

    def test_truncation_error(self):
        with pytest.raises(DomainError):
            chebyshev_functional([1.0, 0.5], 3)

    def test_arcsine_orthogonality(self):
        # stationary arcsine moments annihilate every T_k(2x-1), k >= 1
        m = stationary_moments(ARCSINE, 8)
        for k in range(1, 8):
            assert chebyshev_functional(m, k) == pytest.approx(0.0, abs=1e-9)


class TestScaledChebyshevDecay:
    """Behaviour of e^{kt} c_k(t) along the hierarchy at (1, 1/2).

    Constancy holds exactly for k <= 1 from any start.  For k >= 2 and a
    non-stationary start the scaled coefficients drift polynomially; the
    hierarchy reproduces the classical free unitary Brownian motion moments
    E tr Y_s^k = e^{-ks/2} sum_j (-s)^j/j! C(k, j+1) k^{j-1} at s = 2t for the
    identity start, which pins the drift law independently.
    """

    @staticmethod
    def scaled(traj, k):
        ck = np.array([chebyshev_functional(m, k) for m in traj.moments])
        return np.exp(k * traj.times) * ck

    def test_k1_constant_any_start(self):
        for c in (0.25, 0.7):
            traj = integrate_moments(ARCSINE, c, T=5.0, h=1e-3, N=6, record_every=100)
            s = self.scaled(traj, 1)
            assert np.max(np.abs(s - s[0])) <= 1e-9

    def test_stationary_start_all_k_vanish(self):
        m0 = stationary_moments(ARCSINE, 8)
        traj = integrate_moments(ARCSINE, m0, T=5.0, h=1e-3, N=8, record_every=100)
        for k in range(1, 6):
            ck = np.array([chebyshev_functional(m, k) for m in traj.moments])
            assert np.max(np.abs(ck)) <= 1e-9

    def test_identity_start_matches_unitary_bm_moments(self):
        def biane(k, s):
            return math.exp(-k * s / 2.0) * sum(
                (-s) ** j / factorial(j) * comb(k, j + 1) * k ** (j - 1) for j in range(k)
            )

        traj = integrate_moments(ARCSINE, np.ones(9), T=2.0, h=1e-3, N=8, record_every=100)
        for k in (2, 3):
            ck = np.array([chebyshev_functional(m, k) for m in traj.moments])
            ref = np.array([biane(k, 2.0 * t) for t in traj.times])
            assert np.max(np.abs(ck - ref)) <= 1e-9

    def test_k2_drift_law_from_c_start(self):
        # e^{2t} c_2(t) = c_2(0) - 8 (m_1(0) - 1/2)^2 t
        c = 0.25
        traj = integrate_moments(ARCSINE, c, T=5.0, h=1e-3, N=4, record_every=100)
        s = self.scaled(traj, 2)
        predicted = s[0] - 8.0 * (c - 0.5) ** 2 * traj.times
        assert np.max(np.abs(s - predicted)) <= 1e-8


class TestSeriesFunctionals:
    def test_geometric_log(self):
        for c in (0.2, 0.5):
            st = state(ARCSINE, c ** np.arange(41, dtype=float))
            assert log_functional(st, rho=c) == pytest.approx(math.log(1.0 - c), abs=1e-12)

    def test_zero_tail(self):
        m = np.zeros(21)
        m[0] = 1.0
        st = state(ARCSINE, m)
        assert resolvent_functional(st) == 1.0
        assert log_functional(st) == 0.0

    def test_stationary_log_matches_closed_form(self):
        st = state(INTERIOR, stationary_moments(INTERIOR, 80, method="quadrature"))
        closed, _ = stationary_log_potentials(INTERIOR)
        _, xp = support_edges(INTERIOR)
        assert log_functional(st, rho=xp) == pytest.approx(closed, abs=1e-6)

    def test_stationary_resolvent(self):
        # two independent references: quadrature of 1/(1-x) and the closed
        # ratio (1 - lt)/(1 - theta - lt) from the stationary balance
        from freejacobi import quadrature, stationary_density

        st = state(INTERIOR, stationary_moments(INTERIOR, 80, method="quadrature"))
        _, xp = support_edges(INTERIOR)
        val = resolvent_functional(st, rho=xp)
        xm, xph = support_edges(INTERIOR)
        byquad = quadrature(
            lambda x: stationary_density(INTERIOR, x) / (1.0 - x), xm, xph
        )
        assert val == pytest.approx(byquad, abs=1e-6)
        assert val == pytest.approx(3.0, abs=1e-6)

    def test_rho_ge_one_refused(self):
        st = state(ARCSINE, stationary_moments(ARCSINE, 40))
        with pytest.raises(TailCertificationError):
            resolvent_functional(st, rho=1.0)

    def test_uncertain_tail_reports_required_order(self):
        # slowly decaying arcsine moments at tiny N cannot certify 1e-10
        st = state(INTERIOR, stationary_moments(INTERIOR, 12))
        _, xp = support_edges(INTERIOR)
        with pytest.raises(TailCertificationError) as exc:
            resolvent_functional(st, rho=xp, tol=1e-10)
        assert exc.value.required_n is not None
        assert exc.value.required_n > 12


class TestLogIdentity:
    def test_stationary_start(self):
        m0 = stationary_moments(INTERIOR, 60, method="quadrature")
        traj = integrate_moments(INTERIOR, m0, T=2.0, h=1e-3, N=60, record_every=10)
        _, xp = support_edges(INTERIOR)
        res = log_identity_residual(traj, rho=xp)
        assert np.max(np.abs(res)) <= 1e-6

    def test_c_start(self):
        traj = integrate_moments(INTERIOR, 0.25, T=2.0, h=1e-3, N=80, record_every=10)
        _, xp = support_edges(INTERIOR)
        res = log_identity_residual(traj, rho=max(0.25, xp))
        assert np.max(np.abs(res)) <= 1e-5

    def test_boundary_coefficient_drops(self):
        # theta (1 + lambda) = 1: the resolvent term is skipped and the
        # computed residual reduces to L(t) - L(0) + (1 - lt) t
        p = JacobiParams(1.0, 0.5)
        traj = integrate_moments(p, 0.25, T=0.5, h=1e-3, N=40, record_every=50)
        res = log_identity_residual(traj)
        L = np.array([log_functional(traj.state(i)) for i in range(len(traj))])
        reduced = L - L[0] + (1.0 - p.alpha) * traj.times
        assert np.allclose(res, reduced, atol=1e-14)


class TestExactIdentities:
    def test_catalan_values(self):
        assert [catalan_number(p) for p in range(6)] == [1, 1, 2, 5, 14, 42]

    def test_catalan_identity(self):
        assert all(catalan_identity_check(n) for n in range(1, 31))

    def test_catalan_n3_decomposition(self):
        # D_3 = D_2 D_0 + D_1 D_1 + D_0 D_2 = 2 + 1 + 2
        assert catalan_number(3) == 5 == 2 + 1 + 2

    def test_arcsine_recurrence_exact(self):
        assert all(arcsine_recurrence_check(n) for n in range(1, 9))

    def test_recurrence_n4_explicit(self):
        m = [Fraction(comb(2 * j, j), 4 ** j) for j in range(6)]
        lhs = Fraction(1, 2) * m[4]
        rhs = Fraction(1, 2) * sum(m[3 - k] * (m[k] - m[k + 1]) for k in range(4))
        assert lhs == rhs


class TestRelaxationRate:
    def test_rate_is_minus_one(self):
        traj = integrate_moments(INTERIOR, 0.25, T=6.0, h=1e-3, N=8, record_every=50)
        assert relaxation_rate(traj) == pytest.approx(-1.0, abs=0.01)

    def test_stationary_trajectory_rejected(self):
        m0 = stationary_moments(INTERIOR, 8)
        traj = integrate_moments(INTERIOR, m0, T=1.0, h=1e-2, N=8, record_every=10)
        with pytest.raises(DomainError):
            relaxation_rate(traj)
