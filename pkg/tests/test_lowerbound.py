import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavlab.errors import DomainError
from cavlab.geom2d import Circle, Vec2
from cavlab.lowerbound import (
    BallCollection,
    distortion_lower_estimate,
    distortion_rhs,
    distortion_triple,
    fit_distortion_constant,
    grow,
    pro1_bound,
    thLB_terms,
)
from cavlab.raster import RasterSet, fraenkel, max_intersection_bruteforce

# frozen regression values (non-normative): largest constant certified by the three-ball
# optimum on the default grid, and the rounded-down value used by the command line
FITTED_CN = 0.0537
FROZEN_CN = 0.05


def test_two_small_balls_merge_at_their_distance():
    eps, d = 0.01, 1.0
    balls = BallCollection.from_points([(0.0, 0.0), (d, 0.0)], [eps, eps])
    out, events = grow(balls, 2.0)
    assert len(events) == 1
    assert events[0].t == pytest.approx(d, rel=1e-12)
    assert events[0].merged.radius == pytest.approx(d, rel=1e-12)
    assert events[0].merged.center == pytest.approx((0.5, 0.0))
    assert len(out.balls) == 1 and out.t == pytest.approx(2.0, rel=1e-15)


def test_single_ball_only_scales():
    out, events = grow(BallCollection.from_points([(1.0, 2.0)], [0.5]), 3.0)
    assert events == []
    assert out.balls[0] == Circle(Vec2(1.0, 2.0), 3.0)


def test_grow_rejects_shrinking():
    with pytest.raises(DomainError):
        grow(BallCollection.from_points([(0.0, 0.0)], [1.0]), 0.5)


def ring_points(circle, count=360):
    t = np.linspace(0, 2 * math.pi, count, endpoint=False)
    return np.column_stack([circle.center.x + circle.radius * np.cos(t), circle.center.y + circle.radius * np.sin(t)])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_growth_invariants(seed, count):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-3, 3, (count, 2))
    radii = np.full(count, 1e-3)
    balls = BallCollection.from_points(centers, radii)
    t_mid = float(rng.uniform(0.01, 3.0))
    mid, ev1 = grow(balls, t_mid)
    end, ev2 = grow(mid, t_mid * 2)
    for coll, t in ((mid, t_mid), (end, 2 * t_mid)):
        assert coll.t == pytest.approx(t, rel=1e-12)
        assert coll.disjoint()
    # the earlier union lies in the later one
    for b in mid.balls:
        pts = ring_points(b) * (1 - 1e-12) + np.asarray(b.center) * 1e-12
        assert np.all(end.contains(pts))
    for ev in ev1 + ev2:
        for parent in (ev.first, ev.second):
            assert np.all(ev.merged.contains(ring_points(parent), closed=True) | (
                np.abs(np.hypot(*(ring_points(parent) - np.asarray(ev.merged.center)).T) - ev.merged.radius) < 1e-12
            ))


def test_hole_bound_examples():
    assert pro1_bound([math.pi], [0.01], 1.0) == pytest.approx(math.pi * math.log(50))
    assert pro1_bound([0.0, 0.0], [0.1, 0.1], 1.0) == 0.0
    base = pro1_bound([1.0, 0.5], [0.01, 0.02], 2.0)
    assert base - pro1_bound([1.0, 0.5], [0.02, 0.04], 2.0) == pytest.approx(1.5 * math.log(2))
    assert pro1_bound([1.0, 0.5], [0.01, 0.02], 2.0, include=[True, False]) == pytest.approx(
        math.log(2.0 / 0.06)
    )


def test_interaction_term_clamps():
    # pi d^2 large compared with min(v)^2 / (v1 + v2): no interaction
    assert thLB_terms(1.0, 1.0, 1.0, 0.01, 0.01, 10.0, 1.0)[1] == 0.0
    assert thLB_terms(1.0, 0.0, 0.01, 0.001, 0.001, 10.0, 1.0)[1] == 0.0
    lead, inter = thLB_terms(1.0, 0.5, 0.05, 0.001, 0.002, 10.0, 2.0)
    assert lead == pytest.approx(math.log(10 / 0.002) + 0.5 * math.log(10 / 0.004))
    excess = (0.5 / 1.5) ** 2 - math.pi * 0.0025 / 1.5
    arg = min((1.5 / (4 * math.pi * 0.0025)) ** 0.25, 10 / 0.05, 0.05 / 0.002)
    assert inter == pytest.approx(2.0 * 1.5 * excess * math.log(arg))


def test_interaction_vanishes_as_holes_meet():
    eps, v1, v2, R = 0.01, 1.0, 0.5, 10.0
    for d in np.linspace(0.2, eps, 40):
        term = thLB_terms(v1, v2, d, eps, eps, R, 1.0)[1]
        caps = ((v1 + v2) / (4 * math.pi * d * d)) ** 0.25, R / d, d / eps
        if caps[2] == min(caps):
            excess = (v2 / (v1 + v2)) ** 2 - math.pi * d * d / (v1 + v2)
            assert term == pytest.approx((v1 + v2) * excess * math.log(d / eps), abs=1e-14)
    assert thLB_terms(v1, v2, 0.05, eps, eps, R, 1.0)[1] > 0
    assert thLB_terms(v1, v2, eps, eps, eps, R, 1.0)[1] == pytest.approx(0.0, abs=1e-15)


def test_equal_radii_chord_height():
    tri = distortion_triple(1.5, 1.0, 1.0)
    assert tri.h == pytest.approx(math.sqrt(7 / 12), abs=1e-10)
    assert tri.distance_residual() < 1e-12
    assert tri.q1 < 0 < tri.q2


def test_tangent_triple():
    tri = distortion_triple(1.0, 0.6, 0.4)
    assert tri.h == 0.0
    assert tri.q1 == pytest.approx(-0.4) and tri.q2 == pytest.approx(0.6)


def test_triple_preconditions():
    with pytest.raises(DomainError):
        distortion_triple(3.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        distortion_triple(1.0, 1.2, 0.5)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 0.999))
def test_triple_geometry(ratio, frac):
    R1, R2 = 1.0, ratio
    R = max(R1, R2) + 1e-9 + frac * (R1 + R2 - max(R1, R2) - 1e-9)
    if not R < R1 + R2:
        return
    tri = distortion_triple(R, R1, R2)
    assert tri.distance_residual() < 1e-10
    # chord positions are ill-conditioned when two centers nearly coincide
    if min(abs(tri.q1), tri.q2, tri.q2 - tri.q1) > 1e-4:
        heights = tri.chord_half_heights()
        assert heights == pytest.approx((tri.h, tri.h, tri.h), abs=1e-7)
    assert tri.lens_lower_bound <= tri.triple_intersection + 1e-12


def test_analytic_optimum_beats_random_placements():
    tri = distortion_triple(1.5, 1.0, 1.0)
    brute = max_intersection_bruteforce(1.5, 1.0, 1.0, trials=2000, seed=1)
    assert tri.max_intersection >= brute.best * 0.99
    assert brute.best == pytest.approx(tri.max_intersection, rel=0.01)


def test_distortion_rhs_examples():
    assert distortion_rhs((1.0 + 0.5) ** 2, 1.0, 0.25, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert distortion_rhs(3.0, 1.0, 0.0, 1.0) == 0.0
    assert distortion_rhs(2.0, 1.0, 1.0, 0.3) == pytest.approx(0.3 * 0.25)
    assert distortion_rhs(10.0, 1.0, 1.0, 1.0) < 0


def test_fitted_constant_is_frozen():
    assert fit_distortion_constant() == pytest.approx(FITTED_CN, abs=5e-4)
    assert FROZEN_CN <= fit_distortion_constant()
    # the lower estimate vanishes exactly when the three balls fit
    assert distortion_lower_estimate(math.pi * 4.0, math.pi, math.pi) == 0.0


def _raster_triple(rng, n=100):
    pix = 4.0 / n
    org = (-2.0, -2.0)
    r1 = rng.uniform(0.4, 0.8)
    r2 = rng.uniform(0.1, 1.0) * r1
    gap = rng.uniform(0.02, 0.3)
    E1 = RasterSet.disks([(-r1 - gap / 2, 0.0, r1)], org, pix, n, n)
    E2 = RasterSet.disks([(r2 + gap / 2, 0.0, r2)], org, pix, n, n) - E1
    ax, ay, rad = rng.uniform(0.5, 1.5), rng.uniform(0.2, 1.0), rng.uniform(0.1, 0.6)
    blob = RasterSet.grid(org, pix, n, n, lambda x, y: (x / ax) ** 2 + (y / ay) ** 2 <= rad * rad)
    return E1 | E2 | blob, E1, E2


def test_distortion_inequality_on_rasters():
    rng = np.random.default_rng(0)
    for _ in range(500):
        E, E1, E2 = _raster_triple(rng)
        union = (E1 | E2).area
        lhs = (E.area * fraenkel(E) ** 2 + E1.area * fraenkel(E1) ** 2 + E2.area * fraenkel(E2) ** 2) / (E.area + union)
        assert lhs >= distortion_rhs(E.area, E1.area, E2.area, FROZEN_CN) - 1e-3
