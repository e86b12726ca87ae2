import numpy as np
import pytest

from frontlab.evolve import (
    InstabilityError, Recorder, Simulation, SolutionState, Trajectory,
    comparison_slack, interpolate_snapshots, residual, run, stable_dt,
    state_from_function, step, window_adequacy,
)
from frontlab.medium import (
    hat_ignition, homogeneous_field, identity_coefficients,
    periodic_amplitude_field, periodic_diffusion_1d, shear_flow_2d,
    zero_profile,
)

F0 = homogeneous_field(hat_ignition(0.25, 1.0))
ZERO = homogeneous_field(zero_profile())
ID1 = identity_coefficients(1, 64)


def overlap_equal(a, b, atol=0.0):
    off = round((b.x0 - a.x0) / a.dx)
    lo1, lo2 = max(0, off), max(0, -off)
    n = min(a.values.shape[0] - lo1, b.values.shape[0] - lo2)
    assert n > 10
    if atol == 0.0:
        return np.array_equal(a.values[lo1:lo1 + n], b.values[lo2:lo2 + n])
    return np.max(np.abs(a.values[lo1:lo1 + n] - b.values[lo2:lo2 + n])) <= atol


class TestStableDt:
    def test_pure_diffusion_instance(self):
        assert stable_dt(ID1, ZERO, 0.1) == pytest.approx(0.0025)

    def test_reaction_instance(self):
        # K = 10 with A = I, q = 0, dx = 0.1: dt = 0.5 / (200 + 10)
        f = homogeneous_field(hat_ignition(0.25, 10 * 0.375))
        assert f.lipschitz_K == pytest.approx(10.0)
        assert stable_dt(ID1, f, 0.1) == pytest.approx(0.5 / 210.0)

    def test_2d_instance(self):
        coeffs = shear_flow_2d(8, 8, strength=1.0, diffusion=2.0)
        got = stable_dt(coeffs, ZERO, 0.05, dy=0.05)
        assert got == pytest.approx(0.5 / (2 * 2 * 2 / 0.05 ** 2 + 1 / 0.05))


class TestEquilibria:
    def test_zero_stays_zero(self):
        st = state_from_function(lambda x: 0.0 * x, -4, 4, 0.1, 0.0, 0.0)
        out, _ = run(st, ID1, F0, 0.5)
        assert np.max(np.abs(out.values)) == 0.0

    def test_one_stays_one(self):
        st = state_from_function(lambda x: 1.0 + 0.0 * x, -4, 4, 0.1, 1.0, 1.0)
        out, _ = run(st, ID1, F0, 0.5)
        assert np.min(out.values) == 1.0


class TestConservation:
    def test_discrete_mass_conserved_without_reaction(self):
        st = state_from_function(lambda x: np.exp(-4 * x ** 2), -20, 20, 0.05, 0.0, 0.0)
        m0 = np.sum(st.values) * st.dx
        dt = stable_dt(ID1, ZERO, 0.05)
        n_steps = 1600
        out, _ = run(st, ID1, ZERO, n_steps * dt)
        m1 = np.sum(out.values) * out.dx
        assert abs(m1 - m0) <= 1e-12 * n_steps


class TestDeterminism:
    def test_bit_identical_reruns(self):
        st = state_from_function(lambda x: np.where(x < 0, 0.5, 0.0), -25, 25,
                                 0.05, 1.0, 0.0)
        a, _ = run(st, ID1, F0, 2.0)
        b, _ = run(st, ID1, F0, 2.0)
        assert a.x0 == b.x0 and np.array_equal(a.values, b.values)

    def test_split_run_identity(self):
        st = state_from_function(lambda x: np.where(x < 0, 0.5, 0.0), -25, 25,
                                 0.05, 1.0, 0.0)
        dt = stable_dt(ID1, F0, 0.05)
        T = 4000 * dt
        whole, _ = run(st, ID1, F0, T)
        half, _ = run(st, ID1, F0, T / 2)
        resumed, _ = run(half, ID1, F0, T)
        assert overlap_equal(whole, resumed)

    def test_zero_length_run_is_identity(self):
        st = state_from_function(lambda x: np.where(x < 0, 0.4, 0.0), -10, 10,
                                 0.1, 0.0, 0.0)
        out, _ = run(st, ID1, F0, st.time)
        assert np.array_equal(out.values[:st.n], st.values) or overlap_equal(out, st)


class TestComparisonPrinciple:
    def test_1d_ordering_preserved(self):
        slack = comparison_slack(ID1, F0, n_pairs=50, n_steps=2000, nx=128,
                                 dx=0.05, seed=7)
        assert slack >= -1e-12

    def test_periodic_medium_ordering(self):
        coeffs = periodic_diffusion_1d(64)
        fld = periodic_amplitude_field(hat_ignition(0.3, 1.0),
                                       1.0 + 0.5 * np.cos(2 * np.pi * np.arange(8) / 8),
                                       1.0)
        slack = comparison_slack(coeffs, fld, n_pairs=30, n_steps=1000, nx=96,
                                 dx=0.05, seed=3)
        assert slack >= -1e-12

    def test_2d_shear_ordering(self):
        slack = comparison_slack(shear_flow_2d(16, 16), F0, n_pairs=15,
                                 n_steps=400, nx=48, dx=0.05, ny=8, seed=5)
        assert slack >= -1e-12


class TestAccuracy:
    def test_heat_kernel_order_at_least_1_8(self):
        # exact solution of u_t = u_xx from a Gaussian bump
        s0 = 0.5
        T = 0.25

        def exact(x, t):
            return s0 / np.sqrt(s0 ** 2 + 2 * t) * np.exp(-x ** 2 / (2 * (s0 ** 2 + 2 * t)))

        errs = []
        for dx in (0.1, 0.05, 0.025):
            st = state_from_function(lambda x: exact(x, 0.0), -12, 12, dx, 0.0, 0.0)
            out, _ = run(st, ID1, ZERO, T)
            xs = out.xs()
            errs.append(np.max(np.abs(out.values - exact(xs, T))))
        order1 = np.log2(errs[0] / errs[1])
        order2 = np.log2(errs[1] / errs[2])
        assert min(order1, order2) >= 1.8

    def test_translation_equivariance_periodic_media(self):
        coeffs = periodic_diffusion_1d(64)
        amps = 1.0 + 0.5 * np.cos(2 * np.pi * np.arange(4) / 4)
        fld = periodic_amplitude_field(hat_ignition(0.3, 1.0), amps, 1.0)
        st = state_from_function(lambda x: np.where(x < 0, 0.6, 0.0), -20, 20,
                                 0.0625, 1.0, 0.0)
        shifted = SolutionState(st.time, st.x0 + 1.0, st.dx, st.values.copy(),
                                st.left_fill, st.right_fill)
        a, _ = run(st, coeffs, fld, 1.0)
        b, _ = run(shifted, coeffs, fld, 1.0)
        moved = SolutionState(b.time, b.x0 - 1.0, b.dx, b.values, b.left_fill,
                              b.right_fill)
        assert overlap_equal(a, moved, atol=1e-12)


class TestStep:
    def test_single_step_matches_manual_stencil(self):
        st = state_from_function(lambda x: np.exp(-x ** 2), -8, 8, 0.1, 0.0, 0.0,
                                 dt=0.002)
        out = step(st, ID1, F0)
        u = st.values
        lap = np.zeros_like(u)
        lap[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / 0.1 ** 2
        f = np.array([np.interp(v, F0.ubreaks, F0.node_rates[0]) for v in u])
        expect = u + 0.002 * (lap + f)
        xs_out = out.xs()
        sel = (xs_out >= st.x0 + 0.05) & (xs_out <= st.window[1] - 0.05)
        inner = out.values[sel]
        assert inner.shape == u[1:-1].shape or abs(inner.size - u[1:-1].size) <= 4
        got = np.interp(st.xs()[1:-1], xs_out, out.values)
        assert np.max(np.abs(got - expect[1:-1])) < 1e-14

    def test_instability_reported_with_cell(self):
        st = state_from_function(lambda x: np.where(np.abs(x) < 1, 1.0, 0.0),
                                 -6, 6, 0.1, 0.0, 0.0, dt=0.01)  # dt >> stable
        with pytest.raises((InstabilityError, ValueError)):
            sim = Simulation(st, ID1, ZERO, t_hint=1.0)
            sim.advance_steps(200)


class TestRecorder:
    def test_records_at_sample_times_with_interpolation(self):
        st = state_from_function(lambda x: np.where(x < 0, 0.6, 0.0), -15, 15,
                                 0.05, 1.0, 0.0)
        rec = Recorder(sample_times=np.array([0.3, 0.7, 1.1]))
        out, rec = run(st, ID1, F0, 1.5, rec)
        assert len(rec.trajectory.snapshots) == 3
        for snap, t in zip(rec.trajectory.snapshots, [0.3, 0.7, 1.1]):
            assert snap.time == pytest.approx(t, abs=1e-12)
        assert out.time == pytest.approx(1.5)

    def test_trajectory_time_interpolation(self):
        st = state_from_function(lambda x: np.where(x < 0, 0.6, 0.0), -15, 15,
                                 0.05, 1.0, 0.0)
        rec = Recorder(sample_times=np.linspace(0.2, 1.4, 7))
        _, rec = run(st, ID1, F0, 1.5, rec)
        mid = rec.trajectory.at(0.5)
        lo = rec.trajectory.at(0.4)
        hi = rec.trajectory.at(0.6)
        assert np.all(mid.values >= np.minimum(lo.value_on(mid.xs()),
                                               hi.value_on(mid.xs())) - 1e-12)

    def test_monotone_sample_times_enforced(self):
        with pytest.raises(ValueError):
            Recorder(sample_times=np.array([0.5, 0.4]))


class TestResidual:
    def test_constant_zero_is_a_subsolution(self):
        vals = np.zeros(101)
        rep = residual(vals, ID1, F0, "sub", x0=-5.0, dx=0.1)
        assert rep.worst == 0.0
        assert rep.admissible(1e-12)

    def test_exact_traveling_supersolution_of_linear_problem(self):
        # psi(t,x) = exp(-lam (x - c t)) solves u_t = u_xx + xi u when
        # c = (xi + lam^2)/lam; as a supersolution its residual is -O(dx^2)
        lam, xi = 1.0, 0.5
        c = (xi + lam ** 2) / lam
        dx = 0.02
        xs = np.arange(-5, 5 + dx / 2, dx)
        dt_c = 1e-3
        linear = lambda x, u: xi * u

        def psi(t):
            return np.minimum(np.exp(-lam * (xs - c * t)), 1e6) / 1e6  # scaled to [0,1]

        u_t = (psi(dt_c) - psi(-dt_c)) / (2 * dt_c)
        rep = residual(psi(0.0), ID1, linear, "super", x0=-5.0, dx=dx, u_t=u_t)
        assert rep.worst >= -5e-4     # normalized residual only -O(dx^2)
        assert rep.worst <= 0.0 + 1e-10

    def test_kink_sign_convention(self):
        # convex corner max(0, -x): admissible subsolution kink, rejected super
        xs = np.arange(-2, 2 + 0.05, 0.05)
        vals = np.clip(np.maximum(0.0, -xs) * 0.2, 0.0, 1.0)
        rep = residual(vals, ID1, ZERO, "sub", x0=-2.0, dx=0.05)
        k = int(np.argmin(np.abs(xs)))
        assert k in rep.kink_indices
        assert rep.kink_ok
        rep2 = residual(vals, ID1, ZERO, "super", x0=-2.0, dx=0.05)
        assert not rep2.kink_ok


class TestWindowAdequacy:
    def test_adequate_window(self):
        st = state_from_function(lambda x: np.exp(-x ** 2), -20, 20, 0.1, 0.0, 0.0)
        assert window_adequacy(st, 5.0)["ok"]

    def test_inadequate_window_flagged(self):
        st = state_from_function(lambda x: np.exp(-0.01 * x ** 2), -10, 10, 0.1,
                                 0.0, 0.0)
        assert not window_adequacy(st, 5.0)["ok"]
