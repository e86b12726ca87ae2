import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frontlab.medium import (
    CoefficientField, ReactionField, ReactionProfile, alpha_f, alpha_on_grid, amplitude_field,
    cell_amplitude, check_hypotheses, check_majorizes, coeffs_from_json,
    coeffs_to_json, eval_reaction, field_from_json, field_to_json,
    hat_ignition, homogeneous_field, identity_coefficients, majorant_floor,
    periodic_diffusion_1d, pl_linearized, profile_from_json, profile_to_json,
    sample_random_reaction, shear_flow_2d, smallest_rate_root, tent_positive,
    theta_bracket, zero_profile,
)


def ramp_ignition(theta=0.25, cap=0.75):
    """f(u) = u - theta on [theta, cap], linearly capped to 0 at u = 1."""
    ub = np.array([0.0, theta, cap, 1.0])
    r = np.array([0.0, 0.0, cap - theta, 0.0])
    return ReactionProfile(ub, r, "ignition", theta, decreasing_from=1.0 - cap)


class TestReactionProfile:
    def test_endpoints_enforced(self):
        with pytest.raises(ValueError):
            ReactionProfile(np.array([0.0, 1.0]), np.array([0.1, 0.0]), "positive", 0.0, 0.5)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            ReactionProfile(np.array([0.0, 0.5, 1.0]), np.array([0.0, -0.1, 0.0]),
                            "positive", 0.0, 0.5)

    def test_ignition_zero_below_theta(self):
        with pytest.raises(ValueError):
            ReactionProfile(np.array([0.0, 0.2, 0.6, 1.0]), np.array([0.0, 0.1, 1.0, 0.0]),
                            "ignition", 0.25, 0.375)

    def test_tail_monotonicity_enforced(self):
        with pytest.raises(ValueError):
            ReactionProfile(np.array([0.0, 0.5, 0.95, 1.0]), np.array([0.0, 0.1, 0.5, 0.0]),
                            "positive", 0.0, decreasing_from=0.25)

    def test_lipschitz_reported(self):
        p = hat_ignition(0.25, 1.0)
        assert p.lipschitz == pytest.approx(1.0 / (0.625 - 0.25))


class TestEvalReaction:
    def test_zero_at_origin_everywhere(self):
        fld = homogeneous_field(ramp_ignition())
        for x in (-3.0, 0.0, 7.5):
            assert eval_reaction(fld, x, 0.0) == 0.0

    def test_below_ignition_threshold(self):
        fld = homogeneous_field(ramp_ignition(0.25))
        assert eval_reaction(fld, 1.3, 0.2) == 0.0

    def test_hand_evaluated_ramp(self):
        # f(u) = u - 0.25 on [0.25, 0.75]; f(0.5) = 0.25 by hand
        fld = homogeneous_field(ramp_ignition(0.25))
        assert eval_reaction(fld, 0.0, 0.5) == pytest.approx(0.25, abs=1e-15)

    def test_domain_error(self):
        fld = homogeneous_field(ramp_ignition())
        with pytest.raises(ValueError):
            eval_reaction(fld, 0.0, 1.5)

    def test_linear_x_interpolation(self):
        base = hat_ignition(0.25, 1.0)
        fld = amplitude_field(base, np.array([1.0, 3.0]), period=1.0, interp="linear")
        mid = eval_reaction(fld, 0.5, 0.625)
        assert mid == pytest.approx(2.0, abs=1e-14)

    def test_cell_constant_interpolation(self):
        base = hat_ignition(0.25, 1.0)
        fld = amplitude_field(base, np.array([1.0, 3.0]), period=1.0, interp="cell")
        assert eval_reaction(fld, 0.99, 0.625) == pytest.approx(1.0)
        assert eval_reaction(fld, 1.01, 0.625) == pytest.approx(3.0)


class TestAlphaF:
    def test_zero_reaction_gives_one(self):
        fld = homogeneous_field(zero_profile())
        assert alpha_f(fld, 1.0, 0.0) == 1.0

    def test_bracketed_by_envelope_roots(self):
        # alpha_f(x) must lie in [theta_1, theta_0] computed from the envelopes
        base = hat_ignition(0.25, 1.0)
        fld = amplitude_field(base, np.array([0.6, 1.0, 1.4]), period=1.0,
                              amp_lo=0.5, amp_hi=1.5, interp="linear")
        zeta = 0.3
        th1, th0 = theta_bracket(fld, zeta)
        assert 0 < th1 <= th0 < 1
        for x in np.linspace(-0.5, 3.5, 23):
            a = alpha_f(fld, zeta, x)
            assert th1 - 1e-12 <= a <= th0 + 1e-12

    def test_dense_scan_oracle_on_chord_profile(self):
        # piecewise-linearized u(1-u) vs zeta*u, brute-force step 1e-6
        prof = pl_linearized(lambda u: u * (1 - u), 16, "positive")
        fld = homogeneous_field(prof)
        zeta = 0.5
        a = alpha_f(fld, zeta, 0.0)
        us = np.arange(1e-6, 1.0, 1e-6)
        hits = us[np.interp(us, prof.ubreaks, prof.rates) >= zeta * us]
        oracle = hits[0] if hits.size else 1.0
        assert abs(a - oracle) <= 1e-6

    def test_dense_scan_oracle_random_fields(self):
        rng = np.random.default_rng(42)
        base = hat_ignition(0.25, 1.0)
        for _ in range(100):
            amps = rng.uniform(0.5, 2.0, size=4)
            fld = amplitude_field(base, amps, period=1.0, amp_lo=0.4, amp_hi=2.1)
            zeta = rng.uniform(0.05, 1.5)
            x = rng.uniform(-1.0, 5.0)
            a = alpha_f(fld, zeta, x)
            us = np.arange(1e-6, 1.0, 1e-6)
            fu = np.interp(us, fld.ubreaks, fld.rates_at(x))
            hits = us[fu >= zeta * us]
            oracle = hits[0] if hits.size else 1.0
            assert abs(a - oracle) <= 1e-6

    @settings(max_examples=40, deadline=None)
    @given(z1=st.floats(0.05, 2.0), z2=st.floats(0.05, 2.0),
           amp=st.floats(0.5, 2.0), x=st.floats(-2.0, 2.0))
    def test_monotone_in_zeta(self, z1, z2, amp, x):
        # the admissible set shrinks as zeta grows, so alpha is non-decreasing
        fld = homogeneous_field(hat_ignition(0.3, amp))
        lo, hi = min(z1, z2), max(z1, z2)
        assert alpha_f(fld, lo, x) <= alpha_f(fld, hi, x) + 1e-15

    def test_smallest_rate_root_requires_zeta_above_slope(self):
        prof = tent_positive(1.0)   # initial slope 1.0
        with pytest.raises(ValueError):
            smallest_rate_root(prof, 0.5)
        r = smallest_rate_root(hat_ignition(0.25, 1.0), 0.4)
        # rising piece: (u - 0.25)/0.375 = 0.4 u
        assert r == pytest.approx((0.25 / 0.375) / (1 / 0.375 - 0.4), abs=1e-14)


class TestMajorization:
    def test_g_must_be_positive(self):
        fld = homogeneous_field(ramp_ignition())
        bad_g = ramp_ignition()   # vanishes below theta
        res = check_majorizes(fld, 0.3, bad_g)
        assert not res.ok
        assert "positive" in res.reason

    def test_floor_witness(self):
        base = hat_ignition(0.25, 1.0)
        fld = amplitude_field(base, np.array([0.7, 1.0, 1.8]), period=1.0)
        zeta = 0.3
        g = majorant_floor(fld, zeta)
        res = check_majorizes(fld, zeta, g)
        assert res.ok
        w = res.witness
        assert w.alpha_values.shape == (3,)
        # oracle: dense-grid minimum of f - g above every node's alpha
        us = np.linspace(0, 1, 20001)
        for k, x in enumerate(fld.x_nodes):
            fu = np.interp(us, fld.ubreaks, fld.node_rates[k])
            gu = np.interp(us, g.ubreaks, g.rates)
            sel = us >= w.alpha_values[k]
            assert np.min((fu - gu)[sel]) >= -1e-12

    def test_dead_zone_failure_names_the_zone(self):
        # node rate vanishing on (alpha, beta), beta < 1: majorization fails there
        ub = np.array([0.0, 0.25, 0.4, 0.5, 0.6, 0.8, 1.0])
        row = np.array([0.0, 0.0, 0.3, 0.0, 0.0, 0.4, 0.0])
        upper = ReactionProfile(ub, np.array([0.0, 0.3, 0.4, 0.35, 0.4, 0.5, 0.0]),
                                "positive", 0.0, decreasing_from=0.2)
        fld = ReactionField(zero_profile(), upper, 10.0, np.array([0.0]),
                            ub, row[None, :])
        g = tent_positive(0.01)
        res = check_majorizes(fld, 0.5, g)
        assert not res.ok
        x, u, slack = res.violation
        assert 0.5 <= u <= 0.6 and slack < 0

    @settings(max_examples=25, deadline=None)
    @given(zeta=st.floats(0.2, 0.8), bump=st.floats(0.01, 3.0))
    def test_majorizing_survives_zeta_increase(self, zeta, bump):
        base = hat_ignition(0.25, 1.0)
        fld = amplitude_field(base, np.array([0.8, 1.2]), period=1.0)
        g = majorant_floor(fld, zeta)
        assert check_majorizes(fld, zeta, g).ok
        assert check_majorizes(fld, zeta + bump, g).ok


class TestHypotheses:
    def test_all_pass_by_construction(self):
        base = hat_ignition(0.25, 1.0)
        fld = sample_random_reaction(3, base, (0.5, 2.0), 16, 1.0)
        rep = check_hypotheses(fld, identity_coefficients(1, 64))
        assert rep.ok, rep.summary()

    def test_planted_sandwich_violation(self):
        base = hat_ignition(0.25, 1.0)
        fld = amplitude_field(base, np.array([1.0, 1.0]), period=1.0,
                              amp_lo=0.5, amp_hi=1.5)
        rates = fld.node_rates.copy()
        peak = int(np.argmax(base.rates))
        rates[1, peak] = 1.5 * base.rates[peak] + 0.01
        bumped = ReactionField(fld.lower, fld.upper, fld.lipschitz_K + 1.0,
                               fld.x_nodes, fld.ubreaks, rates, fld.interp,
                               fld.period, unchecked=True)
        rep = check_hypotheses(bumped, identity_coefficients(1, 16))
        clause = rep.clause("sandwich_upper")
        assert not clause.passed
        assert clause.slack == pytest.approx(-0.01, abs=1e-12)

    def test_shear_flow_incompressible_to_tolerance(self):
        rep = check_hypotheses(homogeneous_field(hat_ignition(0.25, 1.0)),
                               shear_flow_2d(24, 24))
        # discrete divergence of a shear flow vanishes identically
        assert abs(np.max(np.abs(shear_flow_2d(24, 24).divergence_q()))) < 1e-12
        assert rep.clause("incompressible").passed
        assert rep.clause("mean_zero_q1").passed

    def test_one_d_advection_rejected(self):
        with pytest.raises(ValueError):
            CoefficientField(1, 1.0, np.ones(8), q1=np.full(8, 0.3),
                             ellipticity=(1.0, 1.0))

    def test_ellipticity_violation_rejected(self):
        with pytest.raises(ValueError):
            CoefficientField(1, 1.0, np.array([1.0, 0.1, 1.0, 1.0]),
                             ellipticity=(0.5, 1.5))


class TestRandomSampling:
    def test_degenerate_range_equals_base(self):
        base = hat_ignition(0.25, 1.0)
        fld = sample_random_reaction(11, base, (1.0, 1.0), 8, 1.0)
        for k in range(8):
            assert np.allclose(fld.node_rates[k], base.rates)

    def test_same_seed_reproduces(self):
        base = hat_ignition(0.25, 1.0)
        a = sample_random_reaction(5, base, (0.5, 2.0), 12, 1.0)
        b = sample_random_reaction(5, base, (0.5, 2.0), 12, 1.0)
        assert np.array_equal(a.node_rates, b.node_rates)

    def test_amplitude_mean_within_three_stderr(self):
        fld = sample_random_reaction(1, hat_ignition(0.25, 1.0), (0.5, 2.0), 100, 1.0)
        amps = fld.amplitudes
        # oracle: recompute the mean of the drawn amplitudes directly
        assert np.mean(amps) == pytest.approx(np.mean([a for a in amps]))
        se = np.sqrt((2.0 - 0.5) ** 2 / 12.0 / 100)
        assert abs(np.mean(amps) - 1.25) <= 3 * se

    def test_counter_based_shift_identity(self):
        base = hat_ignition(0.25, 1.0)
        a = sample_random_reaction(9, base, (0.5, 2.0), 10, 1.0, k_lo=0)
        b = sample_random_reaction(9, base, (0.5, 2.0), 10, 1.0, k_lo=3)
        assert np.array_equal(a.amplitudes[3:], b.amplitudes[:7])
        assert cell_amplitude(9, -2, 0.5, 2.0) == cell_amplitude(9, -2, 0.5, 2.0)

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError):
            sample_random_reaction(1, hat_ignition(0.25, 1.0), (0.0, 2.0), 4, 1.0)
        with pytest.raises(ValueError):
            sample_random_reaction(1, hat_ignition(0.25, 1.0), (1.1, 2.0), 4, 1.0)

    def test_sandwich_and_lipschitz_hold_after_sampling(self):
        fld = sample_random_reaction(17, hat_ignition(0.3, 2.0), (0.5, 2.0), 32, 0.5)
        rep = check_hypotheses(fld, identity_coefficients(1, 16))
        assert rep.clause("sandwich_lower").passed
        assert rep.clause("sandwich_upper").passed
        assert rep.clause("lipschitz").passed


class TestSerialization:
    def test_profile_roundtrip(self):
        p = hat_ignition(0.25, 1.3)
        q = profile_from_json(json.loads(json.dumps(profile_to_json(p))))
        assert np.array_equal(p.ubreaks, q.ubreaks)
        assert np.array_equal(p.rates, q.rates)
        assert (p.kind, p.theta) == (q.kind, q.theta)

    def test_field_roundtrip_with_seed(self):
        fld = sample_random_reaction(7, hat_ignition(0.25, 1.0), (0.5, 2.0), 6, 1.0)
        doc = json.loads(json.dumps(field_to_json(fld)))
        assert doc["seed"] == 7 and len(doc["amplitudes"]) == 6
        back = field_from_json(doc)
        assert np.array_equal(back.node_rates, fld.node_rates)
        assert back.interp == "cell"

    def test_coeffs_roundtrip(self):
        for c in (periodic_diffusion_1d(32), shear_flow_2d(8, 8)):
            back = coeffs_from_json(json.loads(json.dumps(coeffs_to_json(c))))
            assert back.dim == c.dim
            assert np.allclose(back.a11, c.a11)
