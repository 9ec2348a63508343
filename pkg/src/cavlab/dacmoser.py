"""Incompressible transition from the two-cavity union to radial symmetry.

The reference annulus ``R1 < |x - c| < R2`` and the target shell
``rho(theta) < |y - lam c| < R3`` are both parametrized over
``D = [1, sqrt 2] x [0, 2 pi]``::

    w(s, t) = c + ((2 - s^2) R1^2 + (s^2 - 1) R2^2)^(1/2) e(t)
    v(s, t) = lam c + ((2 - s^2) rho(t)^2 + (s^2 - 1) R3^2)^(1/2) e(t)

with parameter densities ``f = s (R2^2 - R1^2)`` and ``g = s (R3^2 - rho(t)^2)``.
The map ``u = v o phi2 o phi1 o w^-1`` with ``phi1(s, t) = (h(s, t), t)`` and
``phi2(s, t) = (s, t + eta(s) beta(t))`` is incompressible once ``beta`` balances the
angular mass of ``g`` against that of ``f`` and ``h`` balances the radial mass.

Implementation notes
--------------------
* The ``sigma`` integrals are exact on the plateau of ``eta`` and use Gauss-Legendre
  sub-panels on its ramps, cut where the sheared angle meets a corner of the union
  boundary. ``beta'`` comes from differentiating the same discrete balance, so the
  radial equation closes at ``s = sqrt 2``.
* ``beta`` and ``h`` are tabulated on a grid (bisection and Simpson inversion) and
  every off-grid query is polished by Newton steps started from cubic interpolants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline, PchipInterpolator, RectBivariateSpline

from .cavmap import PiecewiseCavityMap, union_shape
from .energy import _gauss
from .errors import ConfigurationError, DomainError, NumericalError
from .geom2d import TWO_PI, PolarShape, Vec2, polygon_area
from .twoball import TwoBallGeometry

S_MAX = math.sqrt(2.0)

#: fraction of [1, sqrt 2] taken by each ramp of the bump
RAMP_FRACTION = 0.05

#: Gauss nodes per sub-panel of a ramp of the bump
RAMP_NODES_SPLIT = 8

#: cells of the angular table of the cumulative integral of q^2
MOMENT_CELLS = 4096

BISECTION_STEPS = 100
NEWTON_STEPS = 12

N_S_DEFAULT = 129
N_T_DEFAULT = 512


# ---------------------------------------------------------------------------
# the bump eta


@dataclass(frozen=True)
class Bump:
    """Cubic smoothstep bump on [1, sqrt 2] with mean one.

    Zero with zero slope at both ends; constant on the middle 90% of the interval.
    """

    ramp_fraction: float = RAMP_FRACTION

    @property
    def length(self) -> float:
        return S_MAX - 1.0

    @property
    def ramp(self) -> float:
        return self.ramp_fraction * self.length

    @property
    def plateau(self) -> float:
        # each ramp contributes half its width to the integral
        return 1.0 / (1.0 - self.ramp_fraction)

    @property
    def edges(self) -> tuple:
        return (1.0, 1.0 + self.ramp, S_MAX - self.ramp, S_MAX)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        w = self.ramp
        x = np.clip(np.minimum(s - 1.0, S_MAX - s) / w, 0.0, 1.0)
        return self.plateau * x * x * (3.0 - 2.0 * x)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        w = self.ramp
        left = s - 1.0 < S_MAX - s
        x = np.clip(np.where(left, s - 1.0, S_MAX - s) / w, 0.0, 1.0)
        slope = self.plateau * 6.0 * x * (1.0 - x) / w
        return np.where(left, slope, -slope)

    def mean_abs_deviation(self) -> float:
        """Average of ``|1 - eta|`` over [1, sqrt 2]."""
        x, wts = _gauss(64)
        p = self.plateau

        def step(u):
            return p * u * u * (3.0 - 2.0 * u)

        # 1 - eta changes sign once on each ramp; split the integral there
        x0 = 0.5
        for _ in range(60):
            x0 -= (step(x0) - 1.0) / (p * 6.0 * x0 * (1.0 - x0))
        below = x0 * float(np.sum(wts * (1.0 - step(x0 * x))))
        above = (1.0 - x0) * float(np.sum(wts * (step(x0 + (1.0 - x0) * x) - 1.0)))
        ramps = 2.0 * self.ramp * (below + above)
        flat = (p - 1.0) * (self.length - 2.0 * self.ramp)
        return (ramps + flat) / self.length

    def epsilon(self) -> float:
        """Smallest ``eps`` with ``eta <= 1 + eps`` and mean ``|1 - eta| <= eps``."""
        return max(self.plateau - 1.0, self.mean_abs_deviation())


# ---------------------------------------------------------------------------
# specification


class _AngularMoment:
    """``Q(tau) = integral of q^2 from 0 to tau`` for any real ``tau``."""

    def __init__(self, shape: PolarShape, cells: int = MOMENT_CELLS):
        self.shape = shape
        grid = np.linspace(0.0, TWO_PI, cells + 1)
        nodes = np.unique(np.concatenate([grid, shape.breakpoints()]))
        self.nodes = nodes
        x, w = _gauss(8)
        a = nodes[:-1, None]
        width = np.diff(nodes)[:, None]
        cell = np.sum(width * w * self.q2(a + width * x), axis=1)
        self.cumulative = np.concatenate([[0.0], np.cumsum(cell)])
        self.total = float(self.cumulative[-1])

    def q2(self, theta):
        return self.shape.q(theta) ** 2

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        turns = np.floor(tau / TWO_PI)
        red = tau - TWO_PI * turns
        idx = np.clip(np.searchsorted(self.nodes, red, side="right") - 1, 0, len(self.nodes) - 2)
        start = self.nodes[idx]
        x, w = _gauss(3)
        span = (red - start)[..., None]
        part = np.sum(span * w * self.q2(start[..., None] + span * x), axis=-1)
        return turns * self.total + self.cumulative[idx] + part


@dataclass(frozen=True)
class TransitionSpec:
    """Radii and boundary data of the transition annulus.

    ``center`` is the origin of the outer piece of the cavity map (the point ``a*``,
    or the ball center when there is a single cavity) and ``target_center`` its image.
    """

    geometry: TwoBallGeometry
    R1: float
    R2: float
    R3: float
    shape: PolarShape
    center: Vec2
    target_center: Vec2
    moment: _AngularMoment = field(repr=False, compare=False)

    @property
    def lambda_a_star(self) -> Vec2:
        return self.target_center

    @property
    def volume(self) -> float:
        return self.geometry.v1 + self.geometry.v2

    @property
    def union_area(self) -> float:
        return 0.5 * self.moment.total

    @property
    def slope(self) -> float:
        """Coefficient of ``q^2`` in ``rho^2``."""
        return self.volume / self.union_area

    @property
    def q_max(self) -> float:
        g = self.geometry
        return g.d + abs(self.center.x)

    def rho_squared(self, theta):
        return self.R1**2 + self.slope * self.moment.q2(theta)

    def rho_of_theta(self, theta):
        return np.sqrt(self.rho_squared(theta))

    # primitives of the angular density R3^2 - rho^2
    def gamma(self, tau):
        return self.R3**2 - self.rho_squared(tau)

    def big_gamma(self, tau):
        tau = np.asarray(tau, dtype=float)
        return (self.R3**2 - self.R1**2) * tau - self.slope * self.moment(tau)

    @cached_property
    def kappa(self) -> float:
        """Angular mean of ``R3^2 - rho^2``; equals ``R2^2 - R1^2`` up to rounding."""
        return float(self.big_gamma(TWO_PI)) / TWO_PI


def default_radii(g: TwoBallGeometry, rule: str = "numerics") -> tuple:
    """Annulus radii ``(R1, R2)``.

    ``"numerics"``: ``R1 = q_max`` and ``pi (R2^2 - R1^2) = 2 (v1 + v2) (pi q_max^2 / |union| - 1)``.
    ``"theorem"``: with ``V = 64 (v1 + v2) (1 - delta)``, ``R1 = max(sqrt(V / pi), 2 d)``
    and ``pi (R2^2 - R1^2) = V``.
    """
    total = g.v1 + g.v2
    if rule == "numerics":
        q_max = g.d + abs(_center(g).x)
        R1 = q_max
        width = 2.0 * total * (math.pi * q_max**2 / g.area_union - 1.0)
    elif rule == "theorem":
        width = 64.0 * total * (1.0 - g.delta)
        R1 = max(math.sqrt(width / math.pi), 2.0 * g.d)
    else:
        raise ConfigurationError(f"unknown radius rule {rule!r}")
    if not width > 1e-12 * R1 * R1:
        raise ConfigurationError("the default annulus is empty for this configuration; pass R1 and R2")
    return R1, math.sqrt(R1 * R1 + width / math.pi)


def _center(g: TwoBallGeometry) -> Vec2:
    return g.a_star if g.rho2 > 0 else g.tilde_a1


def make_spec(
    g: TwoBallGeometry, R1: Optional[float] = None, R2: Optional[float] = None, rule: str = "numerics"
) -> TransitionSpec:
    if R1 is None or R2 is None:
        d1, d2 = default_radii(g, rule)
        R1 = d1 if R1 is None else R1
        R2 = d2 if R2 is None else R2
    center = _center(g)
    shape = union_shape(g, center) if g.rho2 > 0 else union_shape(g)
    q_max = g.d + abs(center.x)
    if R1 < q_max * (1.0 - 1e-12):
        raise ConfigurationError(f"R1 = {R1} does not contain the cavity domains (needs >= {q_max})")
    if not R2 > R1:
        raise ConfigurationError(f"need R2 > R1 (got R1={R1}, R2={R2})")
    R3 = math.sqrt(R2 * R2 + (g.v1 + g.v2) / math.pi)
    moment = _AngularMoment(shape)
    return TransitionSpec(g, float(R1), float(R2), R3, shape, center, center.scale(g.lam), moment)


# ---------------------------------------------------------------------------
# parametrizations and densities


def build_wv(spec: TransitionSpec):
    """Evaluators ``w(s, t)`` and ``v(s, t)`` returning points of shape ``(..., 2)``."""
    c, tc = spec.center, spec.target_center

    def _points(origin, radius, t):
        return np.stack([origin[0] + radius * np.cos(t), origin[1] + radius * np.sin(t)], axis=-1)

    def w(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        return _points(c, np.sqrt((2 - s * s) * spec.R1**2 + (s * s - 1) * spec.R2**2), t)

    def v(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
        return _points(tc, np.sqrt((2 - s * s) * spec.rho_squared(t) + (s * s - 1) * spec.R3**2), t)

    return w, v


def w_inverse(spec: TransitionSpec, points):
    """Parameters ``(s, t)`` of points of the closed reference annulus, ``t`` in [0, 2 pi)."""
    pts = np.asarray(points, dtype=float)
    dx = pts[..., 0] - spec.center.x
    dy = pts[..., 1] - spec.center.y
    r2 = dx * dx + dy * dy
    s = np.sqrt(1.0 + (r2 - spec.R1**2) / (spec.R2**2 - spec.R1**2))
    return s, np.mod(np.arctan2(dy, dx), TWO_PI)


def f_density(spec: TransitionSpec, s):
    return np.asarray(s, dtype=float) * (spec.R2**2 - spec.R1**2)


def g_density(spec: TransitionSpec, s, t):
    return np.asarray(s, dtype=float) * spec.gamma(t)


def jacobian_ratio(spec: TransitionSpec, s, t):
    """``det Dv / det Dw`` at ``(s, t)``; it does not depend on ``s``."""
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    return g_density(spec, s, t) / f_density(spec, s)


def necessary_condition(R1: float, R2: float, v1: float, v2: float, delta: float):
    """Planar necessary condition on the annulus for an incompressible transition.

    Returns ``(satisfied, lhs, rhs)`` with ``lhs = pi (R2^2 - R1^2)`` and
    ``rhs = (pi/3 - 1/2) / (3 pi) * (v1 + v2) * (1 - delta)``.
    """
    if not (R1 > 0 and R2 >= R1):
        raise DomainError(f"need R2 >= R1 > 0 (got R1={R1}, R2={R2})")
    lhs = math.pi * (R2 * R2 - R1 * R1)
    rhs = (math.pi / 3.0 - 0.5) / (3.0 * math.pi) * (v1 + v2) * (1.0 - delta)
    return lhs > rhs, lhs, rhs


# ---------------------------------------------------------------------------
# solver


def _inverse_smoothstep(y):
    """Root in [0, 1] of ``3 x^2 - 2 x^3 = y`` for ``y`` in [0, 1]."""
    return 0.5 - np.sin(np.arcsin(np.clip(1.0 - 2.0 * y, -1.0, 1.0)) / 3.0)


class _SigmaRule:
    """Quadrature in the radial parameter adapted to the bump.

    The plateau is integrated exactly. Each ramp is cut where ``t + eta(sigma) beta``
    crosses a corner angle of the union boundary, and every sub-panel gets a
    Gauss-Legendre rule, so the integrands are smooth on each sub-panel.
    """

    def __init__(self, eta: Bump, corners):
        self.eta = eta
        self.corners = np.asarray(corners, dtype=float)
        self.plateau = eta.plateau

    def _cuts(self, t, beta):
        """Relative positions in [0, 1] of the corner crossings on a ramp, shape (..., K)."""
        span = self.plateau * beta[..., None]
        tt = t[..., None]
        up = span > 0
        turns = np.where(up, np.ceil((tt - self.corners) / TWO_PI), np.floor((tt - self.corners) / TWO_PI))
        target = self.corners + TWO_PI * turns - tt
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            y = target / span
        ok = (y > 0.0) & (y < 1.0)
        return np.where(ok, _inverse_smoothstep(np.where(ok, y, 0.0)), 0.0)

    def nodes(self, t, beta, upper, m: int = RAMP_NODES_SPLIT):
        """Ramp nodes and weights for integrals from 1 to ``upper``, shape (..., n)."""
        e0, e1, e2, e3 = self.eta.edges
        ramp = self.eta.ramp
        x, w = _gauss(m)
        cuts = np.sort(self._cuts(t, beta), axis=-1)
        upper = np.asarray(upper, dtype=float)[..., None]
        sig, wts = [], []
        for left in (True, False):
            pos = e0 + ramp * cuts if left else e3 - ramp * cuts[..., ::-1]
            a, b = (e0, e1) if left else (e2, e3)
            edges = np.concatenate([np.full(pos.shape[:-1] + (1,), a), pos, np.full(pos.shape[:-1] + (1,), b)], axis=-1)
            edges = np.clip(edges, a, b)
            edges = np.minimum(edges, np.maximum(upper, a))
            lo = edges[..., :-1, None]
            width = np.diff(edges, axis=-1)[..., None]
            sig.append((lo + width * x).reshape(edges.shape[:-1] + (-1,)))
            wts.append((width * w).reshape(edges.shape[:-1] + (-1,)))
        return np.concatenate(sig, axis=-1), np.concatenate(wts, axis=-1)

    def flat_mass(self, upper):
        """``integral of sigma`` over the part of the plateau below ``upper``."""
        _, e1, e2, _ = self.eta.edges
        top = np.clip(upper, e1, e2)
        return 0.5 * (top * top - e1 * e1)

    @property
    def first_moment(self) -> float:
        """``integral of sigma * eta`` over [1, sqrt 2]."""
        x, w = _gauss(32)
        e0, e1, e2, e3 = self.eta.edges
        total = self.flat_mass(S_MAX) * self.plateau
        for a, b in ((e0, e1), (e2, e3)):
            sg = a + (b - a) * x
            total += float(np.sum((b - a) * w * sg * self.eta(sg)))
        return total


@dataclass
class TransitionMap:
    spec: TransitionSpec
    eta: Bump
    s_grid: np.ndarray
    t_grid: np.ndarray
    beta_table: np.ndarray
    dbeta_table: np.ndarray
    h_table: np.ndarray
    identity: bool
    mass_residual: float

    def __post_init__(self):
        self._rule = _SigmaRule(self.eta, self.spec.shape.breakpoints())
        t_ext = np.append(self.t_grid, TWO_PI)
        self._beta_spline = CubicSpline(t_ext, np.append(self.beta_table, self.beta_table[0]), bc_type="periodic")
        pad = 3
        t_pad = np.concatenate([self.t_grid[-pad:] - TWO_PI, self.t_grid, self.t_grid[:pad] + TWO_PI])
        h_pad = np.concatenate([self.h_table[:, -pad:], self.h_table, self.h_table[:, :pad]], axis=1)
        self._h_spline = RectBivariateSpline(self.s_grid, t_pad, h_pad, kx=3, ky=3)

    @property
    def grid_shape(self) -> tuple:
        return self.h_table.shape

    # -- beta -----------------------------------------------------------
    def _balance(self, beta, t):
        """Angular mass residual, its derivative in ``beta`` and the sheared mass of ``g``."""
        spec, rule = self.spec, self._rule
        sig, wts = rule.nodes(t, beta, np.full(np.shape(t), S_MAX))
        e = self.eta(sig)
        tb = t[..., None] + e * beta[..., None]
        flat_t = t + rule.plateau * beta
        flat_w = rule.flat_mass(S_MAX)
        ws = wts * sig
        gam = spec.gamma(tb)
        gam_flat = spec.gamma(flat_t)
        value = np.sum(ws * spec.big_gamma(tb), axis=-1) + flat_w * spec.big_gamma(flat_t)
        slope = np.sum(ws * e * gam, axis=-1) + flat_w * rule.plateau * gam_flat
        mass = np.sum(ws * gam, axis=-1) + flat_w * gam_flat
        return value - 0.5 * spec.kappa * t, slope, mass

    def beta(self, t):
        """Angular shear at arbitrary ``t`` (Newton-polished from the tabulated spline)."""
        t = np.mod(np.asarray(t, dtype=float), TWO_PI)
        if self.identity:
            return np.zeros_like(t)
        return self._polish_beta(self._beta_spline(t), t)

    def _polish_beta(self, b, t):
        for _ in range(NEWTON_STEPS):
            res, slope, _ = self._balance(b, t)
            step = res / slope
            b = b - step
            if np.all(np.abs(step) <= 1e-13 * (1.0 + np.abs(b))):
                break
        return b

    def dbeta(self, t, beta=None):
        """Derivative of ``beta`` obtained by differentiating the angular balance."""
        t = np.mod(np.asarray(t, dtype=float), TWO_PI)
        if self.identity:
            return np.zeros_like(t)
        if beta is None:
            beta = self.beta(t)
        _, slope, mass = self._balance(beta, t)
        return (0.5 * self.spec.kappa - mass) / slope

    # -- h --------------------------------------------------------------
    def _g1(self, s, t, beta, dbeta):
        e = self.eta(s)
        return s * self.spec.gamma(t + e * beta) * (1.0 + e * dbeta)

    def _radial_mass(self, h, t, beta, dbeta):
        """Integral of the pulled-back density from 1 to ``h``."""
        rule = self._rule
        sig, wts = rule.nodes(t, beta, h)
        dens = self._g1(sig, t[..., None], beta[..., None], dbeta[..., None])
        plat = rule.plateau
        flat = rule.flat_mass(h) * self.spec.gamma(t + plat * beta) * (1.0 + plat * dbeta)
        return np.sum(wts * dens, axis=-1) + flat

    def h(self, s, t):
        """Radial reparametrization at arbitrary ``(s, t)``."""
        s, t = np.broadcast_arrays(np.asarray(s, float), np.mod(np.asarray(t, float), TWO_PI))
        if self.identity:
            return s.copy()
        beta = self.beta(t)
        return self._solve_h(s, t, beta, self.dbeta(t, beta), self._h_spline.ev(s, t))

    def _solve_h(self, s, t, beta, dbeta, guess):
        target = 0.5 * self.spec.kappa * (s * s - 1.0)
        h = np.clip(guess, 1.0, S_MAX)
        for _ in range(NEWTON_STEPS):
            res = self._radial_mass(h, t, beta, dbeta) - target
            step = res / self._g1(h, t, beta, dbeta)
            h = np.clip(h - step, 1.0, S_MAX)
            if np.all(np.abs(step) <= 1e-14):
                break
        res = np.abs(self._radial_mass(h, t, beta, dbeta) - target)
        if np.any(res > 1e-9 * self.spec.kappa):
            raise NumericalError(f"radial reparametrization did not converge (residual {res.max():.3e})")
        return np.where(s <= 1.0, 1.0, np.where(s >= S_MAX, S_MAX, h))

    # -- composite ------------------------------------------------------
    def phi(self, s, t):
        """``phi2 o phi1`` on the parameter rectangle."""
        s, t = np.broadcast_arrays(np.asarray(s, float), np.mod(np.asarray(t, float), TWO_PI))
        if self.identity:
            return s.copy(), t.copy()
        beta = self.beta(t)
        h = self._solve_h(s, t, beta, self.dbeta(t, beta), self._h_spline.ev(s, t))
        return h, t + self.eta(h) * beta

    def eval(self, x):
        """The transition map on the closed annulus, extended radially beyond ``R2``."""
        pts = np.asarray(x, dtype=float)
        spec = self.spec
        dx = pts[..., 0] - spec.center.x
        dy = pts[..., 1] - spec.center.y
        r = np.hypot(dx, dy)
        if np.any(r < spec.R1 * (1.0 - 1e-12)):
            raise DomainError("point inside the inner radius of the transition annulus")
        theta = np.arctan2(dy, dx)
        out_r = np.sqrt(r * r + spec.volume / math.pi)
        angle = theta.copy()
        ring = r <= spec.R2
        if np.any(ring):
            s, t = w_inverse(spec, pts[ring])
            s = np.clip(s, 1.0, S_MAX)
            hs, tt = self.phi(s, t)
            out_r[ring] = np.sqrt((2 - hs * hs) * spec.rho_squared(tt) + (hs * hs - 1) * spec.R3**2)
            angle[ring] = tt
        tc = spec.target_center
        return np.stack([tc.x + out_r * np.cos(angle), tc.y + out_r * np.sin(angle)], axis=-1)

    def max_deviation(self) -> float:
        """Empirical sup-norm of ``phi - id`` on the grid (both components)."""
        radial = np.max(np.abs(self.h_table - self.s_grid[:, None]))
        angular = np.max(np.abs(self.eta(self.h_table) * self.beta_table[None, :]))
        return float(max(radial, angular))

    # -- checks ---------------------------------------------------------
    def sample_points(self, count: int, seed: int = 0, margin: float = 0.01):
        """Uniform random points of the annulus away from its two circles."""
        spec = self.spec
        rng = np.random.default_rng(seed)
        lo = spec.R1**2 + margin * (spec.R2**2 - spec.R1**2)
        hi = spec.R2**2 - margin * (spec.R2**2 - spec.R1**2)
        r = np.sqrt(rng.uniform(lo, hi, count))
        th = rng.uniform(0.0, TWO_PI, count)
        return np.stack([spec.center.x + r * np.cos(th), spec.center.y + r * np.sin(th)], axis=-1)

    def jacobian_fd(self, points, step: Optional[float] = None) -> np.ndarray:
        """Central-difference gradients, shape ``(m, 2, 2)``."""
        pts = np.asarray(points, dtype=float)
        step = 1e-7 * self.spec.R2 if step is None else step
        m = len(pts)
        offsets = np.array([[step, 0.0], [-step, 0.0], [0.0, step], [0.0, -step]])
        vals = self.eval((pts[:, None, :] + offsets[None]).reshape(-1, 2)).reshape(m, 4, 2)
        jac = np.empty((m, 2, 2))
        jac[:, :, 0] = (vals[:, 0] - vals[:, 1]) / (2 * step)
        jac[:, :, 1] = (vals[:, 2] - vals[:, 3]) / (2 * step)
        return jac

    def det_fd(self, points, step: Optional[float] = None) -> np.ndarray:
        return np.linalg.det(self.jacobian_fd(points, step))

    def energy(self, n_s: int = 16, n_t: int = 512, step: Optional[float] = None) -> float:
        """Dirichlet energy ``integral of |Du|^2`` over the annulus (finite differences)."""
        spec = self.spec
        x, w = _gauss(n_s)
        s = 1.0 + (S_MAX - 1.0) * x
        t = (np.arange(n_t) + 0.5) * TWO_PI / n_t
        S, T = np.meshgrid(s, t, indexing="ij")
        wt = ((S_MAX - 1.0) * w)[:, None] * (TWO_PI / n_t) * f_density(spec, S)
        w_map, _ = build_wv(spec)
        jac = self.jacobian_fd(w_map(S, T).reshape(-1, 2), step)
        return float(np.sum(wt.ravel() * np.sum(jac * jac, axis=(1, 2))))


def enclosed_area(spec: TransitionSpec, R: float, N: int = 4096) -> float:
    """Shoelace area enclosed by the image of the circle of radius ``R`` under ``v o w^-1``."""
    s = math.sqrt(1.0 + (R * R - spec.R1**2) / (spec.R2**2 - spec.R1**2))
    t = np.arange(N) * TWO_PI / N
    _, v = build_wv(spec)
    return polygon_area(v(np.full(N, s), t))


def _bisect_beta(tmap: TransitionMap, t: np.ndarray) -> np.ndarray:
    spec = tmap.spec
    zero = np.zeros_like(t)
    res0, _, _ = tmap._balance(zero, t)
    grid = np.linspace(0.0, TWO_PI, 4097)
    gamma_min = float(np.min(spec.gamma(grid)))
    bound = np.abs(res0) / (gamma_min * tmap._rule.first_moment) * (1.0 + 1e-9) + 1e-300
    lo, hi = -bound, bound
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        res, _, _ = tmap._balance(mid, t)
        up = res > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 1e-12 * (1.0 + np.abs(mid))):
            break
    return tmap._polish_beta(0.5 * (lo + hi), t)


def solve_transition(
    spec: TransitionSpec, N_s: int = N_S_DEFAULT, N_t: int = N_T_DEFAULT, enforce: bool = True
) -> TransitionMap:
    """Solve for the angular shear ``beta`` and the radial reparametrization ``h``.

    Raises ``ConfigurationError`` when the bump violates its admissibility budget or
    (with ``enforce``) when the annulus fails the necessary condition, and
    ``DomainError`` when the target density is not positive.
    """
    if N_s < 5 or N_s % 2 == 0:
        raise ConfigurationError("N_s must be odd and at least 5")
    if N_t < 8:
        raise ConfigurationError("N_t must be at least 8")
    g = spec.geometry
    if enforce:
        ok, lhs, rhs = necessary_condition(spec.R1, spec.R2, g.v1, g.v2, g.delta)
        if not ok:
            raise ConfigurationError(f"annulus too thin: pi (R2^2 - R1^2) = {lhs:.6g} <= {rhs:.6g}")

    probe = np.linspace(0.0, TWO_PI, 8193)
    gam = spec.gamma(probe)
    if np.min(gam) <= 0.0:
        raise DomainError("target density is not positive: rho reaches R3")
    eta = Bump()
    f_min = spec.R2**2 - spec.R1**2
    g_max = S_MAX * float(np.max(gam))
    g_min = float(np.min(gam))
    budget = min(f_min / (2.0 * g_max), g_min / g_max)
    if eta.epsilon() > budget:
        raise ConfigurationError(f"bump deviation {eta.epsilon():.4f} exceeds the admissible {budget:.4f}")

    s_grid = np.linspace(1.0, S_MAX, N_s)
    t_grid = np.arange(N_t) * TWO_PI / N_t
    rho2 = spec.rho_squared(probe)
    uniform = float(np.ptp(rho2)) <= 1e-14 * spec.R3**2
    if uniform:
        zeros = np.zeros(N_t)
        h_table = np.repeat(s_grid[:, None], N_t, axis=1)
        return TransitionMap(spec, eta, s_grid, t_grid, zeros, zeros.copy(), h_table, True, 0.0)

    tmap = TransitionMap(
        spec, eta, s_grid, t_grid, np.zeros(N_t), np.zeros(N_t), np.repeat(s_grid[:, None], N_t, axis=1), False, 0.0
    )
    beta = _bisect_beta(tmap, t_grid)
    dbeta = tmap.dbeta(t_grid, beta)
    if np.min(1.0 + eta.plateau * np.minimum(dbeta, 0.0)) <= 0.0:
        raise DomainError("angular shear folds the parameter rectangle")

    # Simpson tables of the pulled-back density, inverted monotonically
    S, T = np.meshgrid(s_grid, t_grid, indexing="ij")
    dens = tmap._g1(S, T, beta[None, :], dbeta[None, :])
    if np.min(dens) <= 0.0:
        raise DomainError("pulled-back density is not positive")
    cum = cumulative_simpson(dens, x=s_grid, axis=0, initial=0.0)
    guess = np.empty_like(cum)
    for k in range(N_t):
        col = cum[:, k]
        if np.any(np.diff(col) <= 0.0):
            raise DomainError("cumulative density is not increasing")
        target = col[-1] * (s_grid**2 - 1.0)
        guess[:, k] = PchipInterpolator(col, s_grid)(np.clip(target, 0.0, col[-1]))
    h_table = tmap._solve_h(S, T, np.broadcast_to(beta, S.shape), np.broadcast_to(dbeta, S.shape), guess)
    h_table[0], h_table[-1] = 1.0, S_MAX

    res, _, _ = tmap._balance(beta, t_grid)
    residual = float(np.max(np.abs(res))) / spec.kappa
    return TransitionMap(spec, eta, s_grid, t_grid, beta, dbeta, h_table, False, residual)


# ---------------------------------------------------------------------------
# cavity map continued by the transition


@dataclass(frozen=True)
class CompositeMap:
    """Cavity map inside ``B(c, R1)``, transition map outside."""

    cavity: PiecewiseCavityMap
    transition: TransitionMap

    def eval(self, x):
        pts = np.asarray(x, dtype=float)
        flat = pts.reshape(-1, 2)
        spec = self.transition.spec
        r = np.hypot(flat[:, 0] - spec.center.x, flat[:, 1] - spec.center.y)
        out = np.empty_like(flat)
        inner = r < spec.R1
        if np.any(inner):
            out[inner] = self.cavity.eval(flat[inner])
        if np.any(~inner):
            out[~inner] = self.transition.eval(flat[~inner])
        return out.reshape(pts.shape)
