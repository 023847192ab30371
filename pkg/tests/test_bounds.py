import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellab.core import AnalyzerAngle, ProbTriple, QmSource, quad_from_phi
from bellab.bounds import (SinglesProfile, averaged_rows_under_assumption_a,
                           enumerate_extremes, f_function, f_statistic,
                           g_from_components, g_function, g_statistic,
                           qm_distributions_for_quad,
                           qm_distributions_for_three_settings,
                           qm_f_closed_form, qm_g_closed_form, scan_violation,
                           three_setting_angles)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestGFunction:
    def test_all_zero(self):
        assert g_from_components(0, 0, 0, 0, 0, 0) == 0.0

    def test_row_four_product(self):
        # only the same-direction a' slots occupied
        assert g_from_components(0, 0, 0.7, 0, 0.6, 0) == pytest.approx(-0.42)

    def test_ideal_all_ones(self):
        assert g_from_components(1, 1, 1, 1, 1, 1) == 0.0

    def test_profile_component_picks(self):
        prof = SinglesProfile(
            p1_a=ProbTriple(0.5, 0.3, 0.2),
            p1_ap=ProbTriple(0.1, 0.7, 0.2),
            p1_b=ProbTriple(0.4, 0.4, 0.2),
            p2_b=ProbTriple(0.6, 0.2, 0.2),
            p2_bp=ProbTriple(0.3, 0.5, 0.2),
            p2_ap=ProbTriple(0.2, 0.6, 0.2),
        )
        expected = g_from_components(0.3, 0.2, 0.7, 0.5, 0.6, 0.4)
        assert g_function(prof, -1, -1) == pytest.approx(expected, abs=1e-15)


class TestFFunction:
    def test_all_zero(self):
        assert f_function(0, 0, 0, 0, 0) == 0.0

    def test_single_coincidence(self):
        assert f_function(1, 0, 1, 0, 0) == pytest.approx(-1.0)

    def test_ideal_saturates_upper_bound(self):
        assert f_function(1, 1, 1, 1, 1) == 0.0


class TestEnumerateExtremes:
    def test_sixteen_rows(self):
        rows = enumerate_extremes((1.0,) * 6)
        assert len(rows) == 16
        assert [r.row_index for r in rows] == list(range(1, 17))

    def test_parallel_polarization_coupling(self):
        # wing-1 a' slot occupied iff wing-2 a' slot is; same for b slots
        for r in enumerate_extremes((1.0,) * 6):
            assert r.occupancy[2] == r.occupancy[4]
            assert r.occupancy[1] == r.occupancy[5]

    def test_ideal_limits(self):
        rows = enumerate_extremes((1.0,) * 6)
        assert max(r.g_numeric for r in rows) == 0.0
        assert min(r.g_numeric for r in rows) == -1.0

    def test_row_six_positive(self):
        rows = enumerate_extremes((1.0, 0.5, 1.0, 1.0, 0.5, 0.5))
        row6 = rows[5]
        assert row6.g_numeric == pytest.approx(0.5)
        assert row6.g_symbolic == pytest.approx(0.5)

    def test_row_eleven_equal_efficiency_cancels(self):
        rows = enumerate_extremes((0.7, 0.9, 0.2, 0.3, 0.4, 0.7))
        assert rows[10].g_numeric == pytest.approx(0.0, abs=1e-15)

    @given(st.tuples(unit, unit, unit, unit, unit, unit))
    def test_numeric_matches_symbolic(self, caps):
        for r in enumerate_extremes(caps):
            assert abs(r.g_numeric - r.g_symbolic) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.tuples(unit, unit, unit, unit, unit, unit),
           st.lists(unit, min_size=6, max_size=6))
    def test_no_interior_extremum(self, caps, fracs):
        # g is multilinear: any point of the box is bounded by the vertex
        # values, so nothing interior can beat the extreme assignments
        import itertools

        vertex_vals = [g_from_components(*(o * c for o, c in zip(occ, caps)))
                       for occ in itertools.product((0, 1), repeat=6)]
        hi, lo = max(vertex_vals), min(vertex_vals)
        interior = [f * c for f, c in zip(fracs, caps)]
        v = g_from_components(*interior)
        assert lo - 1e-9 <= v <= hi + 1e-9

    def test_rejects_bad_caps(self):
        with pytest.raises(ValueError):
            enumerate_extremes((1.2, 0, 0, 0, 0, 0))
        with pytest.raises(ValueError):
            enumerate_extremes((0.5,) * 5)


def _factorized_dist(p0_1, p0_2):
    """Joint distribution with independent per-wing losses and uniform
    detected outcomes."""
    from bellab.core import JointDistribution

    d1, d2 = 1 - p0_1, 1 - p0_2
    t = np.zeros((3, 3))
    t[:2, :2] = d1 * d2 / 4
    t[:2, 2] = d1 * p0_2 / 2
    t[2, :2] = p0_1 * d2 / 2
    t[2, 2] = p0_1 * p0_2
    return JointDistribution(t)


class TestAveragedRows:
    def test_direction_independent_losses_vanish(self):
        dists = {k: _factorized_dist(0.1, 0.1)
                 for k in ("ab", "abp", "apb", "apbp", "apap", "bb")}
        vals = averaged_rows_under_assumption_a(dists)
        assert set(vals) == {6, 11, 12, 15, 16}
        for v in vals.values():
            assert v == pytest.approx(0.0, abs=1e-12)

    def test_row_eleven_closed_form(self):
        # wing-1 losses differ between a and b: the row-11 average is
        # (1 - P0_2(b)) (P0_1(b) - P0_1(a))
        dists = {"ab": _factorized_dist(0.1, 0.1),
                 "bb": _factorized_dist(0.2, 0.1)}
        vals = averaged_rows_under_assumption_a(dists, rows=(11,))
        assert vals[11] == pytest.approx(0.9 * 0.1, abs=1e-12)

    def test_dead_second_wing(self):
        dists = {"ab": _factorized_dist(0.1, 1.0),
                 "bb": _factorized_dist(0.5, 1.0)}
        vals = averaged_rows_under_assumption_a(dists, rows=(11,))
        assert vals[11] == pytest.approx(0.0, abs=1e-12)

    def test_missing_pair(self):
        with pytest.raises(KeyError):
            averaged_rows_under_assumption_a(
                {"ab": _factorized_dist(0.1, 0.1)}, rows=(11,))

    def test_unknown_row(self):
        with pytest.raises(ValueError):
            averaged_rows_under_assumption_a({}, rows=(3,))


class TestGStatistic:
    def test_matches_closed_form_at_max(self):
        src = QmSource()
        rep = g_statistic(qm_distributions_for_quad(
            src, quad_from_phi(math.pi / 4)), 1, 1)
        assert rep.value == pytest.approx((2 * math.sqrt(2) - 2) / 4,
                                          abs=1e-12)
        assert rep.bound_violated

    def test_within_bounds_at_half_pi(self):
        src = QmSource()
        rep = g_statistic(qm_distributions_for_quad(
            src, quad_from_phi(math.pi / 2)), 1, 1)
        assert rep.value == pytest.approx(-0.5, abs=1e-12)
        assert not rep.bound_violated

    def test_closed_form_equality_on_grid(self):
        src = QmSource(eta_overall=0.37, F=0.85)
        for i in range(1, 65):
            phi = 2 * math.pi / 3 * i / 64
            rep = g_statistic(qm_distributions_for_quad(
                src, quad_from_phi(phi)), 1, 1)
            assert rep.value == pytest.approx(
                qm_g_closed_form(src, phi), abs=1e-12)

    def test_other_outcome_pairs(self):
        src = QmSource(eta_overall=0.5, F=0.9)
        phi = 0.8
        for r, q in ((1, -1), (-1, 1), (-1, -1)):
            rep = g_statistic(qm_distributions_for_quad(
                src, quad_from_phi(phi)), r, q)
            assert rep.value == pytest.approx(
                qm_g_closed_form(src, phi, r, q), abs=1e-12)

    def test_missing_pair(self):
        with pytest.raises(KeyError):
            g_statistic({"ab": _factorized_dist(0.1, 0.1)}, 1, 1)


class TestScanViolation:
    def test_violation_interval_endpoint(self):
        res = scan_violation(QmSource(), phi_grid=256)
        assert len(res.violation_intervals) == 1
        lo, hi = res.violation_intervals[0]
        assert lo == pytest.approx(0.0, abs=1e-9)
        assert hi == pytest.approx(math.acos((math.sqrt(3) - 1) / 2),
                                   abs=1e-9)

    def test_maximizer(self):
        res = scan_violation(QmSource(), phi_grid=64)
        assert res.phi_max == pytest.approx(math.pi / 4, abs=1e-6)
        assert res.g_max == pytest.approx((2 * math.sqrt(2) - 2) / 4,
                                          abs=1e-10)

    def test_efficiency_independent_sign(self):
        flags = None
        for eta in (1e-3, 1e-1, 1.0):
            res = scan_violation(QmSource(eta_overall=eta), phi_grid=64)
            cur = [pt.violated for pt in res.points]
            if flags is not None:
                assert cur == flags
            flags = cur

    def test_no_violation_without_correlation(self):
        res = scan_violation(QmSource(F=0.0), phi_grid=64)
        assert res.violation_intervals == ()
        assert not any(pt.violated for pt in res.points)

    def test_rejects_small_grid(self):
        with pytest.raises(ValueError):
            scan_violation(QmSource(), phi_grid=32)


class TestFStatistic:
    def test_violation_at_theta_pi_third(self):
        src = QmSource()
        rep = f_statistic(qm_distributions_for_three_settings(
            src, math.pi / 3), 1, 1)
        assert rep.value == pytest.approx(1 / 8, abs=1e-12)
        assert rep.bound_violated

    def test_degenerate_theta_zero(self):
        rep = f_statistic(qm_distributions_for_three_settings(
            QmSource(), 0.0), 1, 1)
        assert rep.value == pytest.approx(0.0, abs=1e-12)

    def test_theta_half_pi(self):
        rep = f_statistic(qm_distributions_for_three_settings(
            QmSource(), math.pi / 2), 1, 1)
        assert rep.value == pytest.approx(0.0, abs=1e-12)

    def test_matches_closed_form(self):
        src = QmSource(eta_overall=0.3, F=0.7)
        for theta in (0.2, 0.7, 1.2, math.pi / 3):
            rep = f_statistic(qm_distributions_for_three_settings(
                src, theta), 1, 1)
            assert rep.value == pytest.approx(
                qm_f_closed_form(src, theta), abs=1e-12)

    def test_geometry(self):
        a, b, ap = three_setting_angles(math.pi / 3)
        assert a.separation(b) == pytest.approx(math.pi / 3)
        assert ap.separation(b) == pytest.approx(math.pi / 6)
        assert ap.separation(a) == pytest.approx(math.pi / 6)

    def test_missing_pair(self):
        with pytest.raises(KeyError):
            f_statistic({"ab": _factorized_dist(0.0, 0.0)}, 1, 1)


def _lhv_quad_dists(model, quad, nodes=4096):
    from bellab.lhv import analytic_distribution

    a, b, ap, bp = quad.a, quad.b, quad.a_prime, quad.b_prime
    return {
        "ab": analytic_distribution(model, a, b, nodes),
        "abp": analytic_distribution(model, a, bp, nodes),
        "apb": analytic_distribution(model, ap, b, nodes),
        "apbp": analytic_distribution(model, ap, bp, nodes),
        "apap": analytic_distribution(model, ap, ap, nodes),
        "bb": analytic_distribution(model, b, b, nodes),
    }


class TestLhvStatisticBounds:
    """The [-1, 0] bound binds models whose same-direction probabilities obey
    the parallel-polarization coupling (both extreme together). The sign model
    is in that class; the independent-wings Malus model is not -- it fails
    perfect same-direction correlation and can push G above zero."""

    def test_det_sign_g_within_bounds(self):
        from bellab.lhv import DetSignModel

        for eta in (1.0, 0.5):
            model = DetSignModel(eta=eta)
            for phi in (0.3, math.pi / 4, 1.0, 2.0):
                rep = g_statistic(_lhv_quad_dists(model, quad_from_phi(phi)),
                                  1, 1)
                assert -1.0 - 1e-9 <= rep.value <= 1e-9

    def test_det_sign_f_within_bounds(self):
        from bellab.lhv import DetSignModel, analytic_distribution

        model = DetSignModel()
        for theta in (0.2, math.pi / 3, 1.0, 1.5):
            a, b, ap = three_setting_angles(theta)
            dists = {
                "ab": analytic_distribution(model, a, b, 4096),
                "apb": analytic_distribution(model, ap, b, 4096),
                "apa": analytic_distribution(model, ap, a, 4096),
                "apap": analytic_distribution(model, ap, ap, 4096),
            }
            rep = f_statistic(dists, 1, 1)
            assert -1.0 - 1e-9 <= rep.value <= 1e-9

    def test_uncoupled_malus_escapes_the_bound(self):
        # independent wings at fixed lambda: same-direction outcomes are not
        # perfectly correlated, the coupled-vertex enumeration does not apply,
        # and G turns positive at the equal-spacing geometry
        from bellab.lhv import MalusModel

        rep = g_statistic(_lhv_quad_dists(MalusModel(),
                                          quad_from_phi(math.pi / 4)), 1, 1)
        expected = (3 * math.cos(math.pi / 4)
                    - math.cos(3 * math.pi / 4) - 2) / 8
        assert rep.value == pytest.approx(expected, abs=1e-9)
        assert rep.value > 0.1
