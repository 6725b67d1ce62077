import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import matrix_distance, matrix_phase, phase_grid_argmin
from polarnet.manifold import (
    CartesianComplex,
    GroupElement,
    PolarComplex,
    TangentVector,
    act,
    compose,
    distance,
    exp_map,
    from_polar,
    geodesic_interpolate,
    log_map,
    random_group,
    random_points,
    to_polar,
    transporter,
    wrap_phase,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)
phases = st.floats(-math.pi, math.pi, exclude_min=True)
mags = st.floats(1e-6, 1e6)
polar = st.builds(PolarComplex, mags, phases)
groups = st.builds(GroupElement, st.floats(1e-3, 1e3), st.floats(-10, 10))


class TestConversions:
    def test_axis_point(self):
        p = to_polar(CartesianComplex(0.0, 1.0))
        assert p.magnitude == 1.0 and p.phase == pytest.approx(math.pi / 2, abs=1e-15)

    def test_negative_real_axis_is_plus_pi(self):
        assert to_polar(CartesianComplex(-1.0, 0.0)).phase == math.pi
        assert to_polar(CartesianComplex(-1.0, -0.0)).phase == math.pi

    def test_origin_is_clamped(self):
        p = to_polar(CartesianComplex(0.0, 0.0), eps=1e-6)
        assert (p.magnitude, p.phase) == (1e-6, 0.0)

    def test_tiny_values_clamped_with_zero_phase(self):
        p = to_polar(CartesianComplex(-1e-9, 1e-9), eps=1e-6)
        assert (p.magnitude, p.phase) == (1e-6, 0.0)

    @pytest.mark.parametrize("re,im", [(np.nan, 0.0), (0.0, np.inf), (-np.inf, 1.0)])
    def test_non_finite_rejected(self, re, im):
        with pytest.raises(ValueError, match="non-finite complex value"):
            to_polar(CartesianComplex(re, im))

    def test_from_polar_examples(self):
        z = from_polar(PolarComplex(1.0, 0.0))
        assert (z.re, z.im) == (1.0, 0.0)
        z = from_polar(PolarComplex(2.0, math.pi))
        assert z.re == pytest.approx(-2.0) and z.im == pytest.approx(0.0, abs=1e-15)
        z = from_polar(PolarComplex(1.5, 100 * math.pi / 180))
        assert z.re == pytest.approx(-0.2605, abs=5e-5) and z.im == pytest.approx(1.4772, abs=5e-5)

    # at |z| == eps the cos/sin rounding may dip under the clamp, so stay above it
    @given(st.builds(PolarComplex, st.floats(2e-6, 1e6), phases))
    def test_round_trip(self, p):
        q = to_polar(from_polar(p))
        assert q.magnitude == pytest.approx(p.magnitude, rel=1e-12)
        assert abs(wrap_phase(q.phase - p.phase)) < 1e-12

    def test_invalid_polar_rejected(self):
        with pytest.raises(ValueError):
            PolarComplex(0.0, 0.0)
        with pytest.raises(ValueError):
            PolarComplex(1.0, -math.pi)
        with pytest.raises(ValueError):
            GroupElement(-1.0, 0.0)


class TestWrap:
    def test_examples(self):
        assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
        assert wrap_phase(-math.pi) == math.pi
        assert wrap_phase(0.25) == 0.25
        assert wrap_phase(math.pi) == math.pi

    @given(finite)
    def test_range_and_idempotence(self, x):
        w = wrap_phase(x)
        assert -math.pi < w <= math.pi
        assert wrap_phase(w) == w

    @given(st.floats(-1e3, 1e3))
    def test_differs_by_whole_turns(self, x):
        k = (x - wrap_phase(x)) / (2 * math.pi)
        assert abs(k - round(k)) < 1e-9

    @given(phases)
    def test_agrees_with_matrix_angle(self, x):
        assert abs(wrap_phase(x) - matrix_phase(x)) < 1e-9 or abs(abs(x) - math.pi) < 1e-9


class TestDistance:
    def test_pure_magnitude(self):
        assert distance(PolarComplex(1, 0), PolarComplex(math.e ** 2, 0)) == pytest.approx(2.0, abs=1e-15)

    def test_pure_rotation_uses_frobenius_factor(self):
        d = distance(PolarComplex(1, 0), PolarComplex(1, math.pi / 2))
        assert d == pytest.approx(2.221441, abs=1e-6)

    def test_matches_matrix_logarithm(self):
        a, b = PolarComplex(2.0, math.pi / 4), PolarComplex(6.0, -math.pi / 3)
        assert abs(distance(a, b) - matrix_distance(2.0, math.pi / 4, 6.0, -math.pi / 3)) < 1e-12

    def test_matches_matrix_logarithm_random(self, rng):
        for _ in range(200):
            r1, r2 = np.exp(rng.normal(size=2))
            t1, t2 = rng.uniform(-math.pi, math.pi, 2)
            ref = matrix_distance(r1, t1, r2, t2)
            assert abs(distance(PolarComplex(r1, t1), PolarComplex(r2, t2)) - ref) < 1e-9

    @given(polar, polar)
    def test_symmetric_nonnegative(self, a, b):
        d = distance(a, b)
        assert d >= 0 and d == pytest.approx(distance(b, a), abs=1e-12)

    @given(polar)
    def test_zero_iff_equal(self, a):
        assert distance(a, a) == 0.0

    def test_triangle_inequality(self, rng):
        a, b, c = (random_points(rng, 10_000) for _ in range(3))
        assert np.all(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12)

    def test_isometry(self, rng):
        g = random_group(rng, 10_000)
        a, b = random_points(rng, 10_000), random_points(rng, 10_000)
        assert np.max(np.abs(distance(act(g, a), act(g, b)) - distance(a, b))) < 1e-9

    def test_chart_consistency(self, rng):
        a, b = random_points(rng, 5_000), random_points(rng, 5_000)
        la, lb = log_map(a), log_map(b)
        chart = np.hypot(lb.d_logr - la.d_logr, math.sqrt(2) * wrap_phase(lb.d_theta - la.d_theta))
        assert np.max(np.abs(chart - distance(a, b))) < 1e-12


class TestGroup:
    def test_identity_action(self, rng):
        p = random_points(rng, 100)
        q = act(GroupElement.identity(), p)
        assert np.array_equal(q.magnitude, p.magnitude) and np.array_equal(q.phase, p.phase)

    def test_scale_rotate_action(self):
        p = act(GroupElement(1.5, 100 * math.pi / 180), PolarComplex(1.0, 0.0))
        assert p.magnitude == 1.5 and p.phase == pytest.approx(1.74533, abs=1e-5)

    @given(groups, groups, polar)
    def test_compatibility(self, g, h, p):
        assert distance(act(g, act(h, p)), act(compose(g, h), p)) < 1e-9

    @given(groups, groups, groups)
    def test_associative(self, f, g, h):
        lhs, rhs = compose(compose(f, g), h), compose(f, compose(g, h))
        assert lhs.scale == pytest.approx(rhs.scale, rel=1e-12)
        assert abs(wrap_phase(lhs.angle - rhs.angle)) < 1e-12

    @given(groups)
    def test_inverse(self, g):
        e = g @ g.inverse()
        assert e.scale == pytest.approx(1.0, rel=1e-12) and abs(e.angle) < 1e-12

    def test_transporter_examples(self):
        g = transporter(PolarComplex(1.3, 0.2), PolarComplex(1.3, 0.2))
        assert (g.scale, g.angle) == (1.0, 0.0)
        g = transporter(PolarComplex(1.0, 0.0), PolarComplex(2.0, math.pi / 2))
        assert (g.scale, g.angle) == (2.0, math.pi / 2)

    def test_transitivity(self, rng):
        a, b = random_points(rng, 10_000), random_points(rng, 10_000)
        assert np.max(distance(act(transporter(a, b), a), b)) < 1e-12


class TestMaps:
    def test_examples(self):
        v = log_map(PolarComplex(1.0, 0.0))
        assert (v.d_logr, v.d_theta) == (0.0, 0.0)
        v = log_map(PolarComplex(math.e, math.pi / 3))
        assert v.d_logr == pytest.approx(1.0) and v.d_theta == pytest.approx(math.pi / 3)
        p = exp_map(TangentVector(-1.0, 3 * math.pi / 2))
        assert p.magnitude == pytest.approx(1 / math.e) and p.phase == pytest.approx(-math.pi / 2)

    @given(polar)
    def test_exp_log_round_trip(self, p):
        q = exp_map(log_map(p))
        assert q.magnitude == pytest.approx(p.magnitude, rel=1e-12)
        assert abs(wrap_phase(q.phase - p.phase)) < 1e-12


class TestGeodesic:
    def test_endpoints_exact(self, rng):
        a, b = random_points(rng, 50), random_points(rng, 50)
        p0, p1 = geodesic_interpolate(a, b, 0.0), geodesic_interpolate(a, b, 1.0)
        assert np.array_equal(p0.magnitude, a.magnitude) and np.array_equal(p0.phase, a.phase)
        assert np.array_equal(p1.magnitude, b.magnitude) and np.array_equal(p1.phase, b.phase)

    def test_geometric_midpoint(self):
        p = geodesic_interpolate(PolarComplex(1.0, 0.0), PolarComplex(math.e ** 2, 0.0), 0.5)
        assert p.magnitude == pytest.approx(math.e) and p.phase == 0.0

    def test_crosses_branch_cut(self):
        a, b = PolarComplex(1.0, 3 * math.pi / 4), PolarComplex(1.0, -3 * math.pi / 4)
        p = geodesic_interpolate(a, b, 0.5)
        best, step = phase_grid_argmin([a.phase, b.phase], [1.0, 1.0])
        assert p.magnitude == 1.0 and p.phase == pytest.approx(math.pi)
        assert abs(wrap_phase(p.phase - best)) <= step

    def test_antipodal_tie_goes_positive(self):
        p = geodesic_interpolate(PolarComplex(1.0, 0.0), PolarComplex(1.0, math.pi), 0.5)
        assert p.phase == pytest.approx(math.pi / 2)

    def test_rejects_t_outside_unit_interval(self):
        with pytest.raises(ValueError):
            geodesic_interpolate(PolarComplex(1.0, 0.0), PolarComplex(2.0, 0.0), 1.5)

    @given(polar, polar, st.floats(0, 1))
    def test_splits_distance(self, a, b, t):
        m = geodesic_interpolate(a, b, t)
        d = distance(a, b)
        assert distance(a, m) == pytest.approx(t * d, abs=1e-9 * max(1.0, d))
        assert distance(m, b) == pytest.approx((1 - t) * d, abs=1e-9 * max(1.0, d))
