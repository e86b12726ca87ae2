import numpy as np
import pytest
import scipy.linalg as sla

from frontlab.cell import (
    EigenSolution, KappaEvaluator, build_profile, kappa_shape_check, min_speed,
    principal_eigen, solve_corrector, tilted_operator, zeta_for_speed,
)
from frontlab.medium import (
    identity_coefficients, periodic_diffusion_1d, shear_flow_2d,
)


class TestCorrector:
    def test_identity_coefficients_give_zero(self):
        cf = solve_corrector(identity_coefficients(1, 64))
        assert np.max(np.abs(cf.values)) < 1e-12
        cf2 = solve_corrector(identity_coefficients(2, 16))
        assert np.max(np.abs(cf2.values)) < 1e-12

    def test_1d_harmonic_mean_oracle(self):
        # a (v' + 1) is constant; quadrature oracle v' = 1 - c/a, c = harmonic mean
        coeffs = periodic_diffusion_1d(256)
        cf = solve_corrector(coeffs, +1)
        a = coeffs.a11
        n = a.size
        h = coeffs.period_p / n
        charm = 1.0 / np.mean(1.0 / a)
        vp = 1.0 - charm / a
        v_ex = np.zeros(n)
        for i in range(1, n):
            v_ex[i] = v_ex[i - 1] + 0.5 * (vp[i - 1] + vp[i]) * h
        v_ex -= v_ex.mean()
        assert np.max(np.abs(cf.values - v_ex)) < 5e-5
        assert abs(np.mean(cf.values)) < 1e-14
        assert cf.residual_norm < 1e-10

    def test_reverse_direction_flips_sign(self):
        coeffs = periodic_diffusion_1d(128)
        vp = solve_corrector(coeffs, +1)
        vm = solve_corrector(coeffs, -1)
        assert np.allclose(vm.values, -vp.values, atol=1e-12)

    def test_2d_shear_residual_and_mean(self):
        cf = solve_corrector(shear_flow_2d(24, 24))
        assert cf.residual_norm < 1e-10
        assert abs(np.mean(cf.values)) < 1e-13
        assert np.max(np.abs(cf.values)) > 1e-4   # nontrivial solution


class TestPrincipalEigen:
    def test_identity_gives_lambda_squared(self):
        coeffs = identity_coefficients(1, 256)
        for lam in (0.25, 0.5, 1.0, 2.0, 4.0):
            e = principal_eigen(coeffs, lam)
            assert abs(e.kappa - lam ** 2) <= 1e-8 * lam ** 2
            assert np.allclose(e.gamma, 1.0)

    def test_lambda_zero_exact(self):
        e = principal_eigen(periodic_diffusion_1d(64), 0.0)
        assert e.kappa == 0.0
        assert np.all(e.gamma == 1.0)
        assert e.residual_norm == 0.0

    def test_dense_eigensolve_cross_check(self):
        coeffs = periodic_diffusion_1d(64)
        M = tilted_operator(coeffs, 1.0).toarray()
        evals = sla.eigvals(M)
        dense = float(np.max(evals.real))
        mine = principal_eigen(coeffs, 1.0)
        assert abs(mine.kappa - dense) < 1e-9
        assert np.min(mine.gamma) == pytest.approx(1.0)

    def test_gamma_positive_and_normalized(self):
        e = principal_eigen(periodic_diffusion_1d(128), 2.0)
        assert np.min(e.gamma) == pytest.approx(1.0)
        assert np.all(e.gamma > 0)

    def test_lower_bound_a_lower_lambda_sq(self):
        coeffs = periodic_diffusion_1d(128)
        for lam in (0.5, 1.0, 3.0):
            e = principal_eigen(coeffs, lam)
            assert e.kappa >= 0.5 * lam ** 2 - 1e-8

    def test_direction_symmetry_for_even_medium(self):
        # a(x) = 1 + 0.5 cos(2 pi x) is even in x; both directions coincide
        n = 128
        x = np.arange(n) / n
        from frontlab.medium import CoefficientField
        coeffs = CoefficientField(1, 1.0, 1.0 + 0.5 * np.cos(2 * np.pi * x),
                                  ellipticity=(0.5, 1.5))
        ep = principal_eigen(coeffs, 1.3, +1)
        em = principal_eigen(coeffs, 1.3, -1)
        assert abs(ep.kappa - em.kappa) < 1e-9

    def test_2d_shear_eigen(self):
        coeffs = shear_flow_2d(16, 16)
        e = principal_eigen(coeffs, 1.0)
        assert e.kappa >= 1.0 - 1e-8    # kappa >= A_lower lam^2 with A = I
        assert np.min(e.gamma) == pytest.approx(1.0)
        # dense cross-check
        M = tilted_operator(coeffs, 1.0).toarray()
        dense = float(np.max(sla.eigvals(M).real))
        assert abs(e.kappa - dense) < 1e-8

    def test_refinement_order_at_least_1_8(self):
        vals = {}
        for n in (64, 128, 256):
            vals[n] = principal_eigen(periodic_diffusion_1d(n), 1.0).kappa
        e1 = abs(vals[64] - vals[128])
        e2 = abs(vals[128] - vals[256])
        order = np.log2(e1 / e2)
        assert order >= 1.8


class TestKappaShape:
    def test_identity_grid(self):
        rep = kappa_shape_check(identity_coefficients(1, 128),
                                [0.0, 0.5, 1.0, 2.0])
        assert np.allclose(rep.kappas, [0.0, 0.25, 1.0, 4.0], rtol=1e-9)
        assert rep.ok

    def test_single_zero_sample(self):
        rep = kappa_shape_check(identity_coefficients(1, 64), [0.0])
        assert rep.kappa0_ok and rep.ok

    def test_periodic_medium_convexity(self):
        lams = np.linspace(0.0, 4.0, 33)
        rep = kappa_shape_check(periodic_diffusion_1d(256), lams)
        assert rep.convexity_slack >= -1e-8
        assert rep.lower_bound_slack >= -1e-8
        assert rep.monotone_slack >= -1e-10
        assert rep.fd0_ok


class TestMinSpeed:
    def test_unit_zeta_analytic(self):
        s = min_speed(identity_coefficients(1, 128), 1.0)
        assert s.c_zeta == pytest.approx(2.0, rel=1e-8)
        assert s.lambda_zeta == pytest.approx(1.0, rel=1e-6)
        assert s.optimality_ok

    def test_small_zeta_analytic(self):
        s = min_speed(identity_coefficients(1, 128), 0.09)
        assert s.c_zeta == pytest.approx(0.6, rel=1e-8)
        assert s.lambda_zeta == pytest.approx(0.3, rel=1e-6)

    def test_dense_scan_oracle_periodic_medium(self):
        coeffs = periodic_diffusion_1d(128)
        zeta = 0.25
        ev = KappaEvaluator(coeffs)
        s = min_speed(coeffs, zeta, evaluator=ev)
        lams = np.linspace(0.05, 3.0, 10000)
        dense = min((zeta + ev(l)) / l for l in lams)
        assert s.c_zeta <= dense + 1e-6
        assert abs(s.c_zeta - dense) < 1e-6

    def test_c_zeta_above_two_sqrt_alower_zeta(self):
        coeffs = periodic_diffusion_1d(128)
        for zeta in (0.04, 0.3, 1.1):
            s = min_speed(coeffs, zeta)
            assert s.c_zeta >= 2.0 * np.sqrt(0.5 * zeta) - 1e-8

    def test_monotone_in_zeta(self):
        coeffs = periodic_diffusion_1d(64)
        rng = np.random.default_rng(0)
        ev = KappaEvaluator(coeffs)
        for _ in range(5):
            z1, z2 = sorted(rng.uniform(0.02, 2.0, 2))
            c1 = min_speed(coeffs, z1, evaluator=ev).c_zeta
            c2 = min_speed(coeffs, z2, evaluator=ev).c_zeta
            assert c1 <= c2 + 1e-10

    def test_zeta_for_speed_inverts(self):
        coeffs = identity_coefficients(1, 64)
        z0 = zeta_for_speed(coeffs, 1.0)
        assert z0 == pytest.approx(0.25, rel=1e-7)


class TestProfiles:
    def test_identity_psi_is_pure_exponential(self):
        e = principal_eigen(identity_coefficients(1, 64), 1.0)
        psi = build_profile(e, "Psi")
        ss = np.linspace(-3, 3, 13)
        assert np.allclose(psi(ss, 0.3), np.exp(-ss))

    def test_psi_at_zero_at_least_one(self):
        e = principal_eigen(periodic_diffusion_1d(128), 0.8)
        psi = build_profile(e, "Psi")
        xs = np.linspace(0, 1, 257)
        assert np.min(psi(0.0, xs)) >= 1.0 - 1e-12

    def test_phi_dominates_shifted_psi(self):
        coeffs = periodic_diffusion_1d(128)
        zeta = 0.25
        s = min_speed(coeffs, zeta)
        e_main = principal_eigen(coeffs, s.lambda_zeta)
        e_half = principal_eigen(coeffs, s.lambda_zeta / 2.0)
        phi = build_profile(e_half, "Phi", main_eig=e_main)
        psi = build_profile(e_main, "Psi")
        xs = np.linspace(0, 1, 65)
        lam = s.lambda_zeta
        for sv in np.linspace(-5, 5, 41):
            slack = phi(sv, xs) - np.exp(lam * sv / 2.0) * psi(sv, xs)
            assert np.min(slack) >= -1e-12 * max(1.0, np.exp(-lam * sv / 2) * phi.scale)

    def test_kappa_half_below_half_kappa(self):
        # convexity consequence used by the slow envelope: k(l/2) <= k(l)/2
        coeffs = periodic_diffusion_1d(128)
        ev = KappaEvaluator(coeffs)
        for lam in (0.5, 1.0, 2.0):
            assert ev(lam / 2) <= 0.5 * ev(lam) + 1e-10
