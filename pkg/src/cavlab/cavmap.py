"""Explicit incompressible cavitation maps with exact gradients (planar case).

Every map here is assembled from angle-preserving pieces

    u(x) = lam * a + f(r, theta) * zeta,   f**2 = r**2 + s * q(theta)**2,

where ``(r, theta)`` are polar coordinates about the piece origin ``a``, ``zeta`` is the
unit direction, ``q`` is the polar radius of the piece's star-shaped domain and
``s = lam**2 - 1``. Such a map has unit Jacobian away from ``a`` and equals ``lam * x``
on the boundary of the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, SingularityError
from .geom2d import Chord, OffCenterArc, PolarShape, Vec2
from .twoball import TwoBallGeometry

#: grad refuses to evaluate closer than this to an interface or a cavitation point
INTERFACE_TOL = 1e-9

OMEGA1, OMEGA2, OUTER = "omega1", "omega2", "outer"


def _as_points(x):
    p = np.asarray(x, dtype=float)
    single = p.ndim == 1
    return np.atleast_2d(p), single


def _polar(points, origin):
    dx = points[:, 0] - origin[0]
    dy = points[:, 1] - origin[1]
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def _frame(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c, s], axis=-1), np.stack([-s, c], axis=-1)


def _assemble_grad(theta, f_r, f_t_over_r, f_over_r):
    zeta, tau = _frame(theta)
    return (
        f_r[:, None, None] * zeta[:, :, None] * zeta[:, None, :]
        + f_t_over_r[:, None, None] * zeta[:, :, None] * tau[:, None, :]
        + f_over_r[:, None, None] * tau[:, :, None] * tau[:, None, :]
    )


@dataclass(frozen=True)
class AnglePreservingPiece:
    origin: Vec2
    target_origin: Vec2
    shape: PolarShape
    strength: float

    def __post_init__(self):
        if self.strength < 0:
            raise DomainError("strength must be nonnegative")

    def radial(self, r, theta):
        """``f`` and its partial derivatives ``(f, f_r, f_theta)`` in polar coordinates."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        q = self.shape.q(theta)
        f = np.sqrt(r * r + self.strength * q * q)
        with np.errstate(divide="ignore", invalid="ignore"):
            f_r = r / f
            f_t = self.strength * q * self.shape.dq(theta) / f
        return f, f_r, f_t

    def eval_polar(self, r, theta):
        f, _, _ = self.radial(r, theta)
        zeta, _ = _frame(np.asarray(theta, dtype=float))
        return np.asarray(self.target_origin) + f[..., None] * zeta

    def density_polar(self, r, theta):
        """Energy density ``|Du|^2 / 2`` at polar coordinates about the piece origin."""
        f, f_r, f_t = self.radial(r, theta)
        return 0.5 * ((f / r) ** 2 + f_r**2 + (f_t / r) ** 2)

    def eval(self, x):
        pts, single = _as_points(x)
        r, th = _polar(pts, self.origin)
        if np.any(r == 0.0):
            raise SingularityError("evaluation at the piece origin", distance=0.0)
        out = self.eval_polar(r, th)
        return out[0] if single else out

    def grad(self, x):
        pts, single = _as_points(x)
        r, th = _polar(pts, self.origin)
        if np.any(r < INTERFACE_TOL):
            raise SingularityError("gradient at the piece origin", distance=float(r.min()))
        f, f_r, f_t = self.radial(r, th)
        out = _assemble_grad(th, f_r, f_t / r, f / r)
        return out[0] if single else out


@dataclass(frozen=True)
class RadialCavityMap:
    """``u(x) = c + sqrt(A**2 + |x - c|**2) (x - c) / |x - c|``: a round cavity of area pi A**2."""

    center: Vec2 = Vec2(0.0, 0.0)
    A: float = 1.0
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise DomainError("only the planar map is implemented")
        if self.A < 0:
            raise DomainError("cavity radius must be nonnegative")

    @property
    def cavity_volume(self) -> float:
        return math.pi * self.A**2

    @property
    def singular_points(self):
        return (self.center,)

    def _piece(self) -> AnglePreservingPiece:
        # unit disk with strength A**2 reproduces f**2 = r**2 + A**2
        return AnglePreservingPiece(self.center, self.center, PolarShape.circle(self.center, 1.0), self.A**2)

    def eval(self, x):
        return self._piece().eval(x)

    def grad(self, x):
        return self._piece().grad(x)

    def density(self, x):
        pts, single = _as_points(x)
        r, th = _polar(pts, self.center)
        out = self._piece().density_polar(r, th)
        return out[0] if single else out

    def cavity_boundary(self, i: int = 1, eps: float = 1e-3, N: int = 4096) -> np.ndarray:
        if eps <= 0:
            raise DomainError("eps must be positive")
        if N < 64:
            raise DomainError("need at least 64 vertices")
        t = np.linspace(0.0, 2.0 * math.pi, N, endpoint=False)
        pts = np.asarray(self.center) + eps * np.column_stack([np.cos(t), np.sin(t)])
        return self.eval(pts)

    def distance_to_singular_set(self, x) -> np.ndarray:
        pts, _ = _as_points(x)
        return _polar(pts, self.center)[0]

    def smooth_labels(self, x) -> np.ndarray:
        pts, _ = _as_points(x)
        return np.zeros(pts.shape[0], dtype=int)

    def grad_unchecked(self, x):
        return self.grad(x)


# ---------------------------------------------------------------------------
# polar shapes of the two sub-domains and their union


def omega1_shape(g: TwoBallGeometry) -> PolarShape:
    hc = g.chord_half_height
    theta_c = math.atan2(hc, g.d1)
    arc = OffCenterArc(g.rho1, g.rho1 - g.d1, math.pi)
    return PolarShape.from_intervals(
        g.a1, [(-theta_c, theta_c, Chord(g.d1, 0.0)), (theta_c, 2.0 * math.pi - theta_c, arc)]
    )


def omega2_shape(g: TwoBallGeometry) -> PolarShape:
    hc = g.chord_half_height
    theta_c = math.atan2(hc, g.d2)
    arc = OffCenterArc(g.rho2, g.rho2 - g.d2, 0.0)
    return PolarShape.from_intervals(
        g.a2,
        [
            (math.pi - theta_c, math.pi + theta_c, Chord(g.d2, math.pi)),
            (math.pi + theta_c, 3.0 * math.pi - theta_c, arc),
        ],
    )


def union_shape(g: TwoBallGeometry, origin: Optional[Vec2] = None) -> PolarShape:
    if g.rho2 == 0.0:
        return PolarShape.circle(g.tilde_a1, g.rho1)
    a = g.a_star if origin is None else origin
    if g.tangent:
        split = 0.5 * math.pi  # a* is the tangency point
    else:
        split = math.atan2(g.chord_half_height, g.a_hat - a.x)
    right = OffCenterArc(g.rho2, abs(a.x - g.tilde_a2.x), math.pi)
    left = OffCenterArc(g.rho1, abs(a.x - g.tilde_a1.x), 0.0)
    return PolarShape.from_intervals(a, [(-split, split, right), (split, 2.0 * math.pi - split, left)])


@dataclass(frozen=True)
class PiecewiseCavityMap:
    """Three-piece map opening cavities of areas ``v1`` and ``v2`` at ``a1`` and ``a2``."""

    geometry: TwoBallGeometry
    piece_om1: AnglePreservingPiece
    piece_om2: Optional[AnglePreservingPiece]
    piece_outer: AnglePreservingPiece

    @classmethod
    def from_geometry(cls, g: TwoBallGeometry) -> "PiecewiseCavityMap":
        s = g.strength
        lam = g.lam
        p1 = AnglePreservingPiece(g.a1, g.a1.scale(lam), omega1_shape(g), s)
        p2 = None
        if g.rho2 > 0:
            p2 = AnglePreservingPiece(g.a2, g.a2.scale(lam), omega2_shape(g), s)
        outer_origin = g.a_star if g.rho2 > 0 else g.tilde_a1
        po = AnglePreservingPiece(outer_origin, outer_origin.scale(lam), union_shape(g), s)
        return cls(g, p1, p2, po)

    @property
    def pieces(self) -> dict:
        out = {OMEGA1: self.piece_om1, OUTER: self.piece_outer}
        if self.piece_om2 is not None:
            out[OMEGA2] = self.piece_om2
        return out

    @property
    def singular_points(self):
        g = self.geometry
        return (g.a1, g.a2) if self.piece_om2 is not None else (g.a1,)

    def classify(self, x) -> np.ndarray:
        """Region label per point; points on the common chord belong to the first sub-domain."""
        pts, single = _as_points(x)
        g = self.geometry
        in1 = np.hypot(pts[:, 0] - g.tilde_a1.x, pts[:, 1]) <= g.rho1
        labels = np.full(pts.shape[0], OUTER, dtype=object)
        if self.piece_om2 is not None:
            in2 = np.hypot(pts[:, 0] - g.tilde_a2.x, pts[:, 1]) <= g.rho2
            left = pts[:, 0] <= g.a_hat
            labels[in2 & ~left] = OMEGA2
            labels[in1 & left] = OMEGA1
        else:
            labels[in1] = OMEGA1
        return labels[0] if single else labels

    def distance_to_interfaces(self, x) -> np.ndarray:
        """Lower bound for the distance to the region interfaces and cavitation points."""
        pts, _ = _as_points(x)
        g = self.geometry
        dist = np.abs(np.hypot(pts[:, 0] - g.tilde_a1.x, pts[:, 1]) - g.rho1)
        for a in self.singular_points:
            dist = np.minimum(dist, np.hypot(pts[:, 0] - a.x, pts[:, 1] - a.y))
        if self.piece_om2 is not None:
            dist = np.minimum(dist, np.abs(np.hypot(pts[:, 0] - g.tilde_a2.x, pts[:, 1]) - g.rho2))
            hc = g.chord_half_height
            off = np.maximum(np.abs(pts[:, 1]) - hc, 0.0)
            dist = np.minimum(dist, np.hypot(pts[:, 0] - g.a_hat, off))
        return dist

    def _by_region(self, pts, method):
        labels = self.classify(pts)
        out = None
        for name, piece in self.pieces.items():
            mask = labels == name
            if not np.any(mask):
                continue
            val = getattr(piece, method)(pts[mask])
            if out is None:
                out = np.zeros((pts.shape[0],) + val.shape[1:])
            out[mask] = val
        return out

    def eval(self, x):
        pts, single = _as_points(x)
        for a in self.singular_points:
            if np.any((pts[:, 0] == a.x) & (pts[:, 1] == a.y)):
                raise SingularityError("evaluation at a cavitation point", distance=0.0)
        out = self._by_region(pts, "eval")
        return out[0] if single else out

    def eval_piece(self, name: str, x):
        """Evaluate one piece's formula regardless of the region ``x`` lies in."""
        return self.pieces[name].eval(x)

    def grad(self, x):
        pts, single = _as_points(x)
        dist = self.distance_to_interfaces(pts)
        if np.any(dist < INTERFACE_TOL):
            raise SingularityError("gradient requested at an interface or cavitation point", float(dist.min()))
        out = self._by_region(pts, "grad")
        return out[0] if single else out

    def grad_unchecked(self, x):
        """Gradient of the piece owning each point, without the interface guard."""
        pts, single = _as_points(x)
        out = self._by_region(pts, "grad")
        return out[0] if single else out

    def density(self, x):
        g = self.grad(x)
        return 0.5 * np.sum(g * g, axis=(-2, -1))

    def smooth_labels(self, x) -> np.ndarray:
        """Integer label that is constant exactly on the sets where the map is smooth.

        Combines the region with the polar piece of that region's shape, so that label
        changes mark both interfaces and the rays through the shape corners.
        """
        pts, _ = _as_points(x)
        regions = self.classify(pts)
        out = np.zeros(pts.shape[0], dtype=int)
        for k, (name, piece) in enumerate(self.pieces.items()):
            mask = regions == name
            if np.any(mask):
                _, th = _polar(pts[mask], piece.origin)
                out[mask] = 16 * k + piece.shape.piece_index(th)
        return out

    def cavity_boundary(self, i: int, eps: float, N: int) -> np.ndarray:
        """Image of the circle of radius ``eps`` about the ``i``-th cavitation point."""
        g = self.geometry
        if i not in (1, 2) or (i == 2 and self.piece_om2 is None):
            raise DomainError(f"no cavity with index {i}")
        if N < 64:
            raise DomainError("need at least 64 vertices")
        # the cavitation point is at distance d_i from both the chord and the arc
        reach = g.d1 if i == 1 else g.d2
        if not 0 < eps < reach:
            raise DomainError(f"eps = {eps} must lie in (0, {reach})")
        piece = self.piece_om1 if i == 1 else self.piece_om2
        t = _snapped_angles(N, piece.shape.breakpoints())
        return piece.eval_polar(np.full(N, eps), t)


def _snapped_angles(N: int, corners) -> np.ndarray:
    """Uniform angles with the nearest vertex moved onto each shape corner.

    A polygon that cuts a corner loses an O(h**2) area whose constant depends on where
    the corner falls inside its cell; with the corners as vertices the error is a smooth
    O(h**2) term and extrapolates cleanly.
    """
    step = 2.0 * math.pi / N
    t = np.arange(N) * step
    for c in np.mod(np.asarray(corners, dtype=float), 2.0 * math.pi):
        t[int(round(c / step)) % N] = c
    return np.sort(t)


def kink_angles(piece: AnglePreservingPiece) -> np.ndarray:
    """Angles (about the piece origin) of the rays along which the gradient jumps."""
    return piece.shape.breakpoints()
