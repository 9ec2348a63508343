"""Acceptance suite: one test per criterion, each reporting a single pass/fail line."""

import csv
import io
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.stats import qmc

from cavlab import cli
from cavlab.cavmap import PiecewiseCavityMap, RadialCavityMap
from cavlab.dacmoser import (
    build_wv,
    enclosed_area,
    make_spec,
    necessary_condition,
    solve_transition,
    w_inverse,
)
from cavlab.energy import annulus_energy, circle_quantities, log_coefficient, radial_annulus_exact
from cavlab.errors import ConfigurationError
from cavlab.geom2d import polygon_area
from cavlab.lowerbound import BallCollection, distortion_triple, grow
from cavlab.raster import RasterSet, fraenkel, max_intersection_bruteforce, verify_mod_continuity, verify_twoways
from cavlab.twoball import solve_geometry

FAST = ["--n-theta", "256", "--n-r", "16"]
TOTAL = math.pi * 1.5**2


def random_configurations(count=20, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        delta, ratio, v1 = rng.uniform(0, 1), rng.uniform(0.01, 1), rng.uniform(0.2, 3.0)
        out.append(solve_geometry(1.0, delta, v1, ratio * v1))
    return out


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def cli_rows(capsys, *argv):
    assert cli.main(list(argv)) == 0
    out, _ = capsys.readouterr()
    return table(out)


def test_incompressibility(verdict):
    start = time.perf_counter()
    worst_analytic = worst_fd = 0.0
    fewest = math.inf
    for k, g in enumerate(random_configurations()):
        umap = PiecewiseCavityMap.from_geometry(g)
        unit = qmc.Halton(d=2, seed=k).random(10_000)
        radius, angle = 2.0 * np.sqrt(unit[:, 0]), 2 * math.pi * unit[:, 1]
        pts = np.asarray(umap.piece_outer.origin) + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        pts = pts[umap.distance_to_interfaces(pts) > 1e-3]
        worst_analytic = max(worst_analytic, np.max(np.abs(np.linalg.det(umap.grad(pts)) - 1.0)))

        # step shrinks with the distance to the nearest cavitation point, where |Du| ~ 1/r
        cores = np.array([tuple(p) for p in umap.singular_points])
        near = np.min(np.linalg.norm(pts[:, None, :] - cores[None], axis=2), axis=1)
        step = (1e-6 * np.minimum(1.0, near))[:, None]
        labels = umap.smooth_labels(pts)
        same = np.ones(len(pts), dtype=bool)
        values = []
        for e in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            probe = pts + step * np.array(e, dtype=float)
            same &= umap.smooth_labels(probe) == labels
            values.append(umap.eval(probe))
        jac = np.stack([(values[0] - values[1]) / (2 * step), (values[2] - values[3]) / (2 * step)], axis=-1)
        worst_fd = max(worst_fd, np.max(np.abs(np.linalg.det(jac) - 1.0)[same]))
        fewest = min(fewest, int(same.sum()))
    elapsed = time.perf_counter() - start
    ok = worst_analytic < 1e-6 and worst_fd < 1e-4 and elapsed < 10.0 and fewest > 9000
    verdict(
        1,
        ok,
        f"det Du: analytic {worst_analytic:.2e}, finite difference {worst_fd:.2e}, "
        f"min samples {fewest}, {elapsed:.1f} s",
    )
    assert ok


def test_cavity_volumes(verdict):
    worst = 0.0
    for g in random_configurations():
        umap = PiecewiseCavityMap.from_geometry(g)
        eps = 1e-3 * g.d
        for i, vol in ((1, g.v1), (2, g.v2)):
            area = polygon_area(umap.cavity_boundary(i, eps, 4096))
            worst = max(worst, abs(area - (vol + math.pi * eps * eps)) / (vol + math.pi * eps * eps))
    ok = worst < 1e-3
    verdict(2, ok, f"cavity area relative error {worst:.2e}")
    assert ok


def test_radial_closed_form(verdict):
    umap = RadialCavityMap((0.0, 0.0), 1.0)
    numeric = annulus_energy(umap, (0.0, 0.0), 0.1, 1.0).value
    exact = radial_annulus_exact(1.0, 0.1, 1.0)
    err = abs(numeric - exact) / exact
    ok = err < 1e-6
    verdict(3, ok, f"radial annulus energy {numeric:.12f} vs {exact:.12f}, relative {err:.1e}")
    assert ok


def construction_circles(g, eps=1e-3, R=4.0):
    """Circles swept by the ball construction started from the two cavitation points."""
    start = BallCollection.from_points([tuple(g.a1), tuple(g.a2)], [eps, eps])
    before = np.geomspace(2 * eps, 0.95 * g.d, 20)
    after = np.linspace(1.05 * g.d, 0.9 * R, 10)
    for t in np.concatenate([before, after]):
        balls, _ = grow(start, float(t))
        yield from balls.balls


def test_circle_chain(verdict):
    worst = math.inf
    count = 0
    for delta in (0.4, 0.9):
        g = solve_geometry(1.0, delta, 1.0, 0.5)
        umap = PiecewiseCavityMap.from_geometry(g)
        for circle in construction_circles(g):
            center = np.array([circle.center.x, circle.center.y])
            enclosed = sum(v for a, v in ((g.a1, g.v1), (g.a2, g.v2)) if math.dist(a, center) < circle.radius)
            terms = circle_quantities(umap, center, circle.radius, N=1024).chain(enclosed)
            worst = min(worst, min(terms[k] - terms[k + 1] for k in range(3)))
            count += 1
    ok = count >= 50 and worst >= -1e-6
    verdict(4, ok, f"{count} circles, smallest chain slack {worst:.2e}")
    assert ok


def test_energy_sandwich_and_slope(verdict, capsys):
    rows = cli_rows(capsys, "sweep", "--axis", "delta", "--grid", "0,0.2,0.4,0.6,0.8,1", "--v1", "1", "--v2", "0.5", *FAST)
    distorted = cli_rows(capsys, "sweep", "--axis", "eps", "--grid", "1e-2,1e-3,1e-4", "--v1", "1", "--v2", "0.5", "--delta", "0.4", *FAST)
    rows += distorted

    round_err = 0.0
    for ratio in (0.1, 0.5, 1.0):
        sweep = cli_rows(
            capsys, "sweep", "--axis", "eps", "--grid", "1e-2,1e-3,1e-4", "--delta", "0",
            "--v1", "1", "--v2", str(ratio), *FAST,
        )
        rows += sweep
        round_err = max(round_err, abs(float(sweep[0]["sweep_slope"]) / (1 + ratio) - 1))

    # for distorted cavities the slope is the angular coefficient, which exceeds v1 + v2
    g = solve_geometry(1.0, 0.4, 1.0, 0.5)
    umap = PiecewiseCavityMap.from_geometry(g)
    coefficient = log_coefficient(umap.piece_om1) + log_coefficient(umap.piece_om2)
    distorted_err = abs(float(distorted[0]["sweep_slope"]) / coefficient - 1)

    ordered = all(float(r["E_lower_pro1"]) <= float(r["E_numeric"]) for r in rows)
    ok = ordered and round_err < 0.02 and distorted_err < 0.02
    verdict(
        5,
        ok,
        f"lower bound below energy on {len(rows)} rows; slope vs v1+v2 (round) {round_err:.1e}, "
        f"vs angular coefficient (delta 0.4) {distorted_err:.1e}",
    )
    assert ok


def test_distortion(verdict):
    rng = np.random.default_rng(11)
    worst_residual = 0.0
    lens_ok = True
    for _ in range(1000):
        R1 = rng.uniform(0.05, 1.0)
        R2 = rng.uniform(0.05, 1.0)
        low = max(R1, R2) * (1 + 1e-9)
        R = rng.uniform(low, R1 + R2)
        tri = distortion_triple(R, R1, R2)
        worst_residual = max(worst_residual, tri.distance_residual() / R)
        lens_ok &= tri.lens_lower_bound <= tri.triple_intersection * (1 + 1e-12)
    h_err = abs(distortion_triple(1.5, 1.0, 1.0).h - math.sqrt(7 / 12))

    brute_ok = True
    gap = math.inf
    for R, R1, R2 in ((1.5, 1.0, 1.0), (1.2, 1.0, 0.5), (1.0, 0.8, 0.6)):
        tri = distortion_triple(R, R1, R2)
        brute = max_intersection_bruteforce(R, R1, R2, trials=10_000, seed=3)
        brute_ok &= tri.max_intersection >= brute.best * 0.99
        gap = min(gap, tri.max_intersection / brute.best - 1)
    ok = worst_residual < 1e-10 and h_err < 1e-10 and brute_ok and lens_ok
    verdict(
        6,
        ok,
        f"residual {worst_residual:.1e}, h error {h_err:.1e}, analytic over brute force {gap:+.2e}, "
        f"lens bound {'holds' if lens_ok else 'violated'}",
    )
    assert ok


def random_disk_set(rng, n=128):
    circles = [(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 0.8)) for _ in range(rng.integers(1, 4))]
    return RasterSet.disks(circles, (-2.0, -2.0), 4.0 / n, n, n)


def test_set_identities_and_continuity(verdict):
    rng = np.random.default_rng(7)
    identities = all(
        verify_twoways(random_disk_set(rng), random_disk_set(rng), random_disk_set(rng)) == (0, 0) for _ in range(200)
    )
    worst = math.inf
    for _ in range(200):
        E, F = random_disk_set(rng), random_disk_set(rng)
        lhs1, rhs1, lhs2, rhs2 = verify_mod_continuity(E, F)
        slack = 8 * max(E.perimeter(), F.perimeter()) * E.pixel
        worst = min(worst, rhs1 + slack - lhs1, rhs2 + slack - lhs2)
    ok = identities and worst >= 0
    verdict(7, ok, f"set identities {'exact' if identities else 'broken'} on 200 triples, continuity margin {worst:.3f}")
    assert ok


def windowed_asymmetry(E, step_px):
    """Exhaustive minimum over a lattice of ball centers, counting only the ball's bounding box."""
    xs, ys = E.centers()
    r = math.sqrt(E.area / math.pi)
    span = int(math.ceil(r / E.pixel)) + 1
    offsets = (np.arange(-span, span + 1)) * E.pixel
    OX, OY = np.meshgrid(offsets, offsets)
    disk = OX**2 + OY**2 <= r * r
    ball_count = np.count_nonzero(disk)
    best = math.inf
    for j in range(span, len(ys) - span, step_px):
        for i in range(span, len(xs) - span, step_px):
            inside = np.count_nonzero(E.bits[j - span : j + span + 1, i - span : i + span + 1] & disk)
            best = min(best, E.count + ball_count - 2 * inside)
    return best / E.count


def test_fraenkel(verdict):
    n = 1024
    disk = RasterSet.disks([(0.13, -0.21, 1.0)], (-2.0, -2.0), 4.0 / n, n, n)
    round_value = fraenkel(disk)
    r = math.sqrt(1 / math.pi) * 0.5
    far = RasterSet.disks([(-2.0, 0.0, r), (2.0, 0.0, r)], (-4.0, -4.0), 8.0 / n, n, n)
    fast = fraenkel(far)
    oracle = windowed_asymmetry(far, 8)
    ok = round_value < 0.01 and abs(fast - 1) < 0.02 and abs(fast - oracle) < 0.02
    verdict(8, ok, f"disk {round_value:.2e}; far disks {fast:.4f} vs exhaustive {oracle:.4f}")
    assert ok


def test_transition(verdict):
    round_spec = make_spec(solve_geometry(1.0, 1.0, 1.0, 0.5), 2.0, 3.0)
    plain = solve_transition(round_spec)
    grid = np.repeat(plain.s_grid[:, None], plain.t_grid.size, axis=1)
    identity = plain.identity and np.all(plain.beta_table == 0.0) and np.array_equal(plain.h_table, grid)
    _, v = build_wv(round_spec)
    pts = plain.sample_points(1000, seed=1)
    identity &= np.allclose(plain.eval(pts), v(*w_inverse(round_spec, pts)), atol=1e-13)

    g = solve_geometry(1.0, 0.4, TOTAL / 1.3, 0.3 * TOTAL / 1.3)
    spec = make_spec(g)
    tmap = solve_transition(spec)
    det_err = float(np.max(np.abs(tmap.det_fd(tmap.sample_points(10_000, seed=5)) - 1.0)))
    area_err = max(
        abs(enclosed_area(spec, R) / (math.pi * R * R + g.v1 + g.v2) - 1) for R in np.linspace(spec.R1, spec.R2, 5)
    )
    passes, lhs, rhs = necessary_condition(spec.R1, spec.R2, g.v1, g.v2, g.delta)
    thin = make_spec(g, spec.R1, math.sqrt(spec.R1**2 + 1e-4))
    try:
        solve_transition(thin)
        enforced = False
    except ConfigurationError:
        enforced = True
    ok = identity and det_err < 1e-3 and area_err < 1e-4 and passes and enforced
    verdict(
        9,
        ok,
        f"round union identity {identity}; det error {det_err:.1e}; area error {area_err:.1e}; "
        f"annulus {lhs:.3f} > {rhs:.3f}, thin annulus refused {enforced}",
    )
    assert ok


def run_module(*argv):
    return subprocess.run([sys.executable, "-m", "cavlab", *argv], capture_output=True, check=True).stdout


def test_determinism(verdict, tmp_path):
    outputs = {}
    for command, extra in (("sandwich", FAST), ("render", ["--transition", "true"])):
        for k in range(2):
            path = tmp_path / f"{command}{k}"
            run_module(command, "--delta", "0.4", "--mu", "1.5", "--output", str(path), *extra)
            outputs.setdefault(command, []).append(path.read_bytes())
    same = {name: blobs[0] == blobs[1] and len(blobs[0]) > 0 for name, blobs in outputs.items()}
    ok = all(same.values())
    verdict(10, ok, ", ".join(f"{name} {'identical' if flag else 'differs'}" for name, flag in same.items()))
    assert ok
