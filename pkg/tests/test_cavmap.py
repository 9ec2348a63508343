import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from cavlab.cavmap import OMEGA1, OMEGA2, OUTER, PiecewiseCavityMap, RadialCavityMap
from cavlab.errors import DomainError, SingularityError
from cavlab.geom2d import polygon_area
from cavlab.twoball import solve_geometry


def fd_grad(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def boundary_points(g, count, rng):
    """Points on the two ball boundaries that also bound a sub-domain."""
    pts = []
    while len(pts) < count:
        which = rng.integers(2)
        center, rho = (g.tilde_a1, g.rho1) if which == 0 else (g.tilde_a2, g.rho2)
        t = rng.uniform(0, 2 * math.pi)
        p = np.array([center.x + rho * math.cos(t), rho * math.sin(t)])
        if (which == 0 and p[0] <= g.a_hat) or (which == 1 and p[0] >= g.a_hat):
            pts.append(p)
    return np.array(pts)


@pytest.fixture(scope="module")
def umap(geometry_mid):
    return PiecewiseCavityMap.from_geometry(geometry_mid)


def test_boundary_maps_to_scaled_position(umap):
    g = umap.geometry
    pts = boundary_points(g, 1000, np.random.default_rng(3))
    assert np.allclose(umap.eval(pts), g.lam * pts, atol=1e-9 * g.d)
    # chord points too
    h = g.chord_half_height
    chord = np.column_stack([np.full(50, g.a_hat), np.linspace(-h, h, 50)])
    assert np.allclose(umap.eval(chord), g.lam * chord, atol=1e-9)


def test_adjacent_pieces_agree_on_interfaces(umap):
    g = umap.geometry
    pts = boundary_points(g, 1000, np.random.default_rng(4))
    left = pts[:, 0] <= g.a_hat
    inner = np.where(left[:, None], umap.eval_piece(OMEGA1, pts), umap.eval_piece(OMEGA2, pts))
    outer = umap.eval_piece(OUTER, pts)
    scale = np.linalg.norm(outer, axis=1)
    assert np.all(np.linalg.norm(inner - outer, axis=1) <= 1e-9 * scale)


def test_radial_map_values_and_singular_values():
    m = RadialCavityMap(A=0.7)
    x = np.array([0.3, -0.4])
    r = 0.5
    f = math.sqrt(0.49 + r * r)
    assert np.linalg.norm(m.eval(x)) == pytest.approx(f, rel=1e-14)
    sv = np.linalg.svd(m.grad(x), compute_uv=False)
    assert sorted(sv) == pytest.approx(sorted([f / r, r / f]), rel=1e-12)
    assert m.cavity_volume == pytest.approx(math.pi * 0.49)


def test_zero_strength_is_identity():
    g = solve_geometry(1.0, 0.0, 0.0, 0.0)
    m = PiecewiseCavityMap.from_geometry(g)
    pts = np.random.default_rng(0).uniform(-2, 2, (200, 2))
    pts = pts[m.distance_to_interfaces(pts) > 1e-6]
    assert np.allclose(m.eval(pts), pts, atol=1e-14)
    assert np.allclose(m.grad(pts), np.eye(2), atol=1e-13)
    ring = m.cavity_boundary(1, 0.01, 256)
    assert np.allclose(np.hypot(ring[:, 0] - g.a1.x, ring[:, 1] - g.a1.y), 0.01)


def test_singular_and_interface_errors(umap):
    g = umap.geometry
    with pytest.raises(SingularityError):
        umap.eval(np.array(g.a1))
    with pytest.raises(SingularityError):
        umap.grad(np.array([g.a_hat, 0.0]))
    with pytest.raises(DomainError):
        umap.cavity_boundary(1, 2 * g.d1, 128)


def admissible_samples(m, count, margin=1e-3, seed=0):
    g = m.geometry
    box = qmc.Halton(d=2, seed=seed).random(count)
    pts = np.column_stack([g.a1.x - 0.5 + box[:, 0] * (g.d + 1.0), -1.5 + 3.0 * box[:, 1]])
    return pts[m.distance_to_interfaces(pts) > margin]


@pytest.mark.parametrize("delta,ratio", [(0.0, 1.0), (0.4, 0.3), (0.9, 0.05), (1.0, 0.5)])
def test_analytic_determinant_is_one(delta, ratio):
    m = PiecewiseCavityMap.from_geometry(solve_geometry(1.0, delta, 1.2, 1.2 * ratio))
    pts = admissible_samples(m, 10_000)
    det = np.linalg.det(m.grad(pts))
    assert np.max(np.abs(det - 1.0)) < 1e-8


def test_gradient_matches_finite_differences(umap):
    pts = admissible_samples(umap, 400, margin=1e-2, seed=7)
    # stay off the corner rays, where the one-sided formulas differ
    labels = umap.smooth_labels(pts)
    keep = []
    for p, lab in zip(pts, labels):
        probe = p + 1e-5 * np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
        keep.append(np.all(umap.smooth_labels(probe) == lab))
    pts = pts[np.array(keep)]
    assert len(pts) > 300
    exact = umap.grad(pts)
    approx = fd_grad(umap.eval, pts)
    assert np.max(np.abs(exact - approx)) < 1e-5


def test_radial_cavity_area():
    m = RadialCavityMap(A=1.0)
    poly = m.cavity_boundary(1, 1e-3, 4096)
    assert polygon_area(poly) == pytest.approx(math.pi * (1 + 1e-6), rel=1e-3)


def test_piecewise_cavity_area_converges_at_second_order(umap):
    g = umap.geometry
    eps = 1e-3 * g.d
    errs = [abs(polygon_area(umap.cavity_boundary(1, eps, n)) - g.v1 - math.pi * eps**2) for n in (256, 512, 1024)]
    orders = [math.log2(errs[k] / errs[k + 1]) for k in range(2)]
    assert min(orders) >= 1.9
    fine = polygon_area(umap.cavity_boundary(2, eps, 4096))
    assert fine == pytest.approx(g.v2 + math.pi * eps**2, rel=1e-3)


def test_small_cavity_is_scaled_shape(umap):
    g = umap.geometry
    piece = umap.piece_om1
    ring = umap.cavity_boundary(1, 1e-6, 512)
    rel = ring - np.asarray(piece.target_origin)
    radius = np.hypot(rel[:, 0], rel[:, 1])
    t = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * math.pi)
    assert np.allclose(radius, math.sqrt(g.strength) * piece.shape.q(t), rtol=1e-6)


def test_injective_on_a_grid(umap):
    pts = admissible_samples(umap, 4000, margin=1e-3, seed=11)
    img = umap.eval(pts)
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(img).query(img, k=2)
    assert np.min(dist[:, 1]) > 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.01, 1.0), st.floats(0.05, 3.0))
def test_continuity_random_geometries(delta, ratio, v1):
    g = solve_geometry(1.0, delta, v1, ratio * v1)
    m = PiecewiseCavityMap.from_geometry(g)
    pts = boundary_points(g, 50, np.random.default_rng(0))
    assert np.allclose(m.eval(pts), g.lam * pts, atol=1e-9)
