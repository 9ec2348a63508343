"""Elastic energy of cavitation maps: circle integrals, annuli, punctured domains.

The planar energy density is ``|Du|**2 / 2``. Near a cavitation point it behaves like
``c / r**2``, so radial integrals are done with Gauss-Legendre panels in ``log r``;
angular integrals use Gauss-Legendre panels whose endpoints are the exact angles at
which the map stops being smooth (region interfaces and rays through shape corners).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .cavmap import OMEGA1, OMEGA2, OUTER, AnglePreservingPiece, PiecewiseCavityMap
from .errors import DomainError
from .geom2d import TWO_PI, unit_ball_volume

RADIAL_NODES = 8
ANGULAR_NODES = 16
PER_DECADE = 32
LABEL_SAMPLES = 4096


@lru_cache(maxsize=None)
def _gauss(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w  # nodes and weights on [0, 1]


def _panel_nodes(edges: np.ndarray, m: int):
    """Gauss nodes and weights on consecutive panels ``edges[k] .. edges[k + 1]``."""
    x, w = _gauss(m)
    a = edges[:-1, None]
    h = np.diff(edges)[:, None]
    return (a + h * x).ravel(), (h * w).ravel()


def _subdivide(intervals, total_panels: int):
    """Split each interval into a number of equal panels proportional to its width."""
    widths = np.array([b - a for a, b in intervals])
    span = widths.sum()
    edges = []
    for (a, b), wdt in zip(intervals, widths):
        k = max(1, int(math.ceil(total_panels * wdt / span)))
        edges.append(np.linspace(a, b, k + 1))
    return edges


# ---------------------------------------------------------------------------
# circles


def circle_breakpoints(umap, center, r: float, samples: int = LABEL_SAMPLES) -> np.ndarray:
    """Angles in [0, 2pi) where the circle ``|x - center| = r`` crosses a non-smooth set."""
    c = np.asarray(center, dtype=float)
    t = np.linspace(0.0, TWO_PI, samples, endpoint=False)

    def labels(angles):
        pts = c + r * np.column_stack([np.cos(angles), np.sin(angles)])
        return umap.smooth_labels(pts)

    lab = labels(t)
    jumps = np.nonzero(lab != np.roll(lab, -1))[0]
    if jumps.size == 0:
        return np.zeros(0)
    lo = t[jumps]
    hi = lo + TWO_PI / samples
    left = lab[jumps]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        same = labels(mid) == left
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return np.sort(np.mod(0.5 * (lo + hi), TWO_PI))


def _check_circle(umap, center, r):
    if r <= 0:
        raise DomainError("circle radius must be positive")
    scale = max(r, 1.0)
    for a in umap.singular_points:
        if abs(math.hypot(a[0] - center[0], a[1] - center[1]) - r) < 1e-12 * scale:
            raise DomainError("circle passes through a cavitation point")


@dataclass(frozen=True)
class CircleQuantities:
    """Integrals along one circle ``|x - center| = r`` and over its image curve."""

    r: float
    energy: float  # integral of |Du|^2 / 2 along the circle (arc-length measure)
    length: float  # length of the image curve
    area: float  # area enclosed by the image curve

    def chain(self, enclosed_volume: float) -> tuple:
        """Terms of the per-circle lower-bound chain, each dominating the next."""
        r = self.r
        return (
            self.energy,
            self.length**2 / (4.0 * math.pi * r),
            self.area / r,
            enclosed_volume / r + math.pi * r,
        )


def circle_quantities(umap, center, r: float, N: int = 512, rule: str = "gauss") -> CircleQuantities:
    """Energy, image length and image area for one circle.

    ``rule='gauss'`` uses Gauss-Legendre panels between breakpoints (spectrally accurate
    on each smooth arc); ``rule='trapezoid'`` uses uniformly spaced angles on each arc.
    ``N`` is the approximate total number of angular nodes.
    """
    if N < 16:
        raise DomainError("N too small")
    center = np.asarray(center, dtype=float)
    _check_circle(umap, center, r)
    cuts = circle_breakpoints(umap, center, r)
    if cuts.size == 0:
        intervals = [(0.0, TWO_PI)]
    else:
        intervals = [(cuts[k], cuts[k + 1] if k + 1 < cuts.size else cuts[0] + TWO_PI) for k in range(cuts.size)]
    if rule == "gauss":
        edges = _subdivide(intervals, max(1, N // ANGULAR_NODES))
        parts = [_panel_nodes(e, ANGULAR_NODES) for e in edges]
    elif rule == "trapezoid":
        parts = []
        for e in _subdivide(intervals, N):
            w = np.full(e.size, e[1] - e[0]) if e.size > 1 else np.zeros(1)
            w[0] *= 0.5
            w[-1] *= 0.5
            # endpoints lie on interfaces: nudge inward so each piece evaluates its own side
            nudged = e.copy()
            nudged[0] += 1e-13
            nudged[-1] -= 1e-13
            parts.append((nudged, w))
    else:
        raise DomainError(f"unknown rule {rule!r}")
    theta = np.concatenate([p[0] for p in parts])
    weight = np.concatenate([p[1] for p in parts])
    zeta = np.column_stack([np.cos(theta), np.sin(theta)])
    tau = np.column_stack([-np.sin(theta), np.cos(theta)])
    pts = center + r * zeta
    u = umap.eval(pts)
    grad = umap.grad_unchecked(pts)
    dens = 0.5 * np.sum(grad * grad, axis=(1, 2))
    u_t = r * np.einsum("nij,nj->ni", grad, tau)
    energy = r * float(np.sum(weight * dens))
    length = float(np.sum(weight * np.hypot(u_t[:, 0], u_t[:, 1])))
    area = 0.5 * float(np.sum(weight * (u[:, 0] * u_t[:, 1] - u[:, 1] * u_t[:, 0])))
    return CircleQuantities(r, energy, length, area)


def circle_integral(umap, center, r: float, N: int = 512, rule: str = "gauss"):
    """``(integral of |Du|^2/2 along the circle, length of the image curve)``."""
    cq = circle_quantities(umap, center, r, N, rule)
    return cq.energy, cq.length


# ---------------------------------------------------------------------------
# annuli


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float

    def __float__(self):
        return self.value


def _log_edges(r_in, r_out, per_decade, m=RADIAL_NODES):
    decades = math.log10(r_out / r_in)
    k = max(2, int(math.ceil(decades * per_decade / m)))
    return np.exp(np.linspace(math.log(r_in), math.log(r_out), k + 1))


def _annulus_value(umap, center, r_in, r_out, per_decade, n_theta):
    s, w = _panel_nodes(np.log(_log_edges(r_in, r_out, per_decade)), RADIAL_NODES)
    radii = np.exp(s)
    vals = np.array([circle_quantities(umap, center, r, n_theta).energy for r in radii])
    return float(np.sum(w * radii * vals))


def annulus_energy(umap, center, r_in: float, r_out: float, N_r: int = PER_DECADE, N_theta: int = 512) -> QuadratureResult:
    """Energy in ``r_in < |x - center| < r_out``.

    ``N_r`` is the number of radial nodes per decade of ``r_out / r_in``. The error
    estimate is the change against a run at half resolution in both directions.
    """
    if not 0 < r_in < r_out:
        raise DomainError("need 0 < r_in < r_out")
    c = np.asarray(center, dtype=float)
    for a in umap.singular_points:
        dist = math.hypot(a[0] - c[0], a[1] - c[1])
        if r_in - 1e-12 <= dist <= r_out + 1e-12:
            raise DomainError("a cavitation point lies in the closed annulus")
    fine = _annulus_value(umap, c, r_in, r_out, N_r, N_theta)
    coarse = _annulus_value(umap, c, r_in, r_out, max(N_r // 2, 1), max(N_theta // 2, 16))
    err = abs(fine - coarse) + 1e-14 * abs(fine)
    return QuadratureResult(fine, err)


def radial_annulus_exact(A: float, r_in: float, r_out: float) -> float:
    """Closed-form energy of the radial map ``f**2 = A**2 + r**2`` on an annulus.

    Radially the integrand is ``pi A**2 / r + pi r + pi r**3 / (A**2 + r**2)``.
    """
    a2 = A * A
    v = math.pi * a2
    r1, r2 = r_in * r_in, r_out * r_out
    return (
        v * math.log(r_out / r_in)
        + 0.5 * math.pi * (r2 - r1)
        + math.pi * (0.5 * (r2 - r1) - 0.5 * a2 * math.log((a2 + r2) / (a2 + r1)))
    )


# ---------------------------------------------------------------------------
# punctured domains


def _polar_region(piece: AnglePreservingPiece, inner, outer, n_theta, per_decade, integrand="density"):
    """Integral over ``{inner(theta) < r < outer(theta)}`` in polar coordinates about the piece origin.

    ``inner`` and ``outer`` are callables of theta; ``integrand`` is ``'density'`` or
    ``'one'`` (the latter returns the region's area).
    """
    intervals = piece.shape.intervals()
    edges = _subdivide(intervals, max(1, n_theta // ANGULAR_NODES))
    theta, wt = (np.concatenate(z) for z in zip(*[_panel_nodes(e, ANGULAR_NODES) for e in edges]))
    lo = inner(theta)
    hi = outer(theta)
    if np.any(hi < lo * (1.0 - 1e-12)):
        raise DomainError("region bounds cross: inner radius exceeds outer radius")
    ratio = np.maximum(hi / lo, 1.0)
    k = max(2, int(math.ceil(math.log10(float(ratio.max())) * per_decade / RADIAL_NODES)))
    x, w = _gauss(RADIAL_NODES)
    # geometric panels in r for every angle: log r = log lo + (log ratio) * u, u in [0, 1]
    u = ((np.arange(k)[:, None] + x[None, :]) / k).ravel()
    wu = np.tile(w / k, k)
    logspan = np.log(ratio)
    r = lo[:, None] * np.exp(logspan[:, None] * u[None, :])
    jac = r * logspan[:, None]  # dr = r * logspan du
    if integrand == "one":
        vals = r
    else:
        th = np.broadcast_to(theta[:, None], r.shape)
        vals = r * piece.density_polar(r.ravel(), th.ravel()).reshape(r.shape)
    inner_int = np.sum(vals * jac * wu[None, :], axis=1)
    return float(np.sum(wt * inner_int))


@dataclass
class EnergyReport:
    total: float
    per_region: dict
    renormalized: float
    leading_coefficient: Optional[float]
    quadrature_error_estimate: float
    domain_area: float = 0.0
    eps: tuple = ()
    R: float = 0.0
    fit: dict = field(default_factory=dict)


def _region_energies(umap: PiecewiseCavityMap, eps1, eps2, R, n_theta, per_decade, integrand="density"):
    g = umap.geometry
    out = {}
    p1 = umap.piece_om1
    out[OMEGA1] = _polar_region(p1, lambda t: np.full(t.shape, eps1), p1.shape.q, n_theta, per_decade, integrand)
    if umap.piece_om2 is not None:
        p2 = umap.piece_om2
        out[OMEGA2] = _polar_region(p2, lambda t: np.full(t.shape, eps2), p2.shape.q, n_theta, per_decade, integrand)
    po = umap.piece_outer
    # the tangent union has q = 0 on two rays; clamp so log-spaced radii stay defined
    def inner(t):
        return np.maximum(po.shape.q(t), 1e-14 * g.d)

    out[OUTER] = _polar_region(po, inner, lambda t: np.full(t.shape, R), n_theta, per_decade, integrand)
    return out


def domain_energy(
    umap: PiecewiseCavityMap,
    eps1: float,
    eps2: float,
    R: float,
    n_theta: int = 1024,
    per_decade: int = PER_DECADE,
    subtract_area: bool = False,
    fit_scales: Optional[Sequence[float]] = (1.0, 0.1, 0.01),
) -> EnergyReport:
    """Energy over ``B(a*, R)`` minus the two holes ``B(a_i, eps_i)``.

    The domain is split exactly into three polar regions: about ``a1`` inside the first
    sub-domain, about ``a2`` inside the second, and about ``a*`` outside both. With
    ``subtract_area`` the integrand is ``|Du|^2/2 - 1/2`` instead of ``|Du|^2/2``.
    ``fit_scales`` multiplies both hole radii to fit the coefficient of ``log(1/eps)``.
    """
    g = umap.geometry
    if eps1 <= 0 or eps1 >= g.d1:
        raise DomainError(f"eps1 must lie in (0, {g.d1})")
    has2 = umap.piece_om2 is not None
    if has2 and (eps2 <= 0 or eps2 >= g.d2):
        raise DomainError(f"eps2 must lie in (0, {g.d2})")
    theta = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
    reach = float(np.max(umap.piece_outer.shape.q(theta)))
    if R <= reach * (1.0 + 1e-9):
        raise DomainError(f"R = {R} does not enclose both sub-domains (need R > {reach})")

    parts = _region_energies(umap, eps1, eps2, R, n_theta, per_decade)
    coarse = _region_energies(umap, eps1, eps2, R, max(n_theta // 2, 32), max(per_decade // 2, 8))
    areas = _region_energies(umap, eps1, eps2, R, n_theta, per_decade, "one")
    domain_area = sum(areas.values())
    if subtract_area:
        parts = {k: v - 0.5 * areas[k] for k, v in parts.items()}
        coarse = {k: v - 0.5 * areas[k] for k, v in coarse.items()}
    total = math.fsum(parts.values())
    err = abs(total - math.fsum(coarse.values())) + 1e-13 * abs(total)
    v2 = g.v2 if has2 else 0.0
    renorm = total - g.v1 * math.log(1.0 / eps1) - (v2 * math.log(1.0 / eps2) if has2 else 0.0)

    slope = None
    fit = {}
    if fit_scales:
        scales = np.asarray(fit_scales, dtype=float)
        outer_part = parts[OUTER]
        values = []
        for sc in scales:
            if sc == 1.0:
                values.append(total)
                continue
            p = _region_energies_inner(umap, eps1 * sc, eps2 * sc, n_theta, per_decade)
            if subtract_area:
                p = {k: v - 0.5 * _inner_area(umap, k, eps1 * sc, eps2 * sc) for k, v in p.items()}
            values.append(outer_part + math.fsum(p.values()))
        x = np.log(1.0 / scales)
        slope = float(np.polyfit(x, np.asarray(values), 1)[0])
        fit = {"scales": tuple(float(s) for s in scales), "energies": tuple(float(v) for v in values)}
    return EnergyReport(total, parts, renorm, slope, err, domain_area, (eps1, eps2), R, fit)


def _region_energies_inner(umap, eps1, eps2, n_theta, per_decade):
    p1 = umap.piece_om1
    out = {OMEGA1: _polar_region(p1, lambda t: np.full(t.shape, eps1), p1.shape.q, n_theta, per_decade)}
    if umap.piece_om2 is not None:
        p2 = umap.piece_om2
        out[OMEGA2] = _polar_region(p2, lambda t: np.full(t.shape, eps2), p2.shape.q, n_theta, per_decade)
    return out


def _inner_area(umap, name, eps1, eps2):
    g = umap.geometry
    if name == OMEGA1:
        return g.area_om1 - math.pi * eps1**2
    return g.area_om2 - math.pi * eps2**2


def log_coefficient(piece: AnglePreservingPiece, nodes: int = 4096) -> float:
    """Exact coefficient of ``log(1/eps)`` in the energy near the piece origin.

    As ``r -> 0`` the radial integrand tends to ``s (q**2 + q'**2) / (2 r)``, so the
    coefficient is ``s/2`` times the angular integral of ``q**2 + q'**2``. It equals the
    cavity volume only when ``q`` is constant.
    """
    edges = _subdivide(piece.shape.intervals(), max(1, nodes // ANGULAR_NODES))
    theta, wt = (np.concatenate(z) for z in zip(*[_panel_nodes(e, ANGULAR_NODES) for e in edges]))
    q = piece.shape.q(theta)
    dq = piece.shape.dq(theta)
    return 0.5 * piece.strength * float(np.sum(wt * (q * q + dq * dq)))


# ---------------------------------------------------------------------------
# closed-form bounds


def _log_plus(x: float) -> float:
    return max(0.0, math.log(x)) if x > 0 else 0.0


def ub_formula(v1, v2, d, eps1, eps2, R, delta, C1, C2, n: int = 2) -> float:
    """Upper-bound expression for the optimal two-cavity energy with given constants."""
    wn = unit_ball_volume(n)
    ratio = v2 / v1 if v1 > 0 else 0.0
    value = C1 * (v1 + v2 + wn * R**n) + v1 * _log_plus(R / eps1) + v2 * _log_plus(R / eps2)
    interaction = (1.0 - delta) * _log_plus(R / d) + delta * (
        ratio ** (1.0 / n) * math.log(d / eps1) + ratio ** (1.0 / (2 * n)) * math.log(d / eps2)
    )
    return value + C2 * (v1 + v2) * interaction
