"""Exact planar primitives: circles, circular segments, star-shaped polar boundaries.

Star-shaped boundaries are stored as closed-form pieces (off-center circular arcs and
straight chords) so that the radial function ``q`` and its angular derivative ``q'``
are exact everywhere; sampling only happens at quadrature time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi

#: absolute tolerance for geometric degeneracy tests (tangency, origin on a circle)
GEOM_TOL = 1e-12


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # tuple concatenation is never wanted here
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def scale(self, c: float) -> "Vec2":
        return Vec2(c * self.x, c * self.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class Circle:
    center: Vec2
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"circle radius must be positive, got {self.radius}")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def contains(self, points, closed: bool = True) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        d2 = (p[..., 0] - self.center[0]) ** 2 + (p[..., 1] - self.center[1]) ** 2
        r2 = self.radius**2
        return d2 <= r2 if closed else d2 < r2

    def boundary(self, n: int) -> np.ndarray:
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return np.column_stack(
            [self.center[0] + self.radius * np.cos(t), self.center[1] + self.radius * np.sin(t)]
        )


# ---------------------------------------------------------------------------
# circular segments and lenses


def _alpha_minus_sincos(alpha: float) -> float:
    """``alpha - sin(alpha) cos(alpha)`` without cancellation for small ``alpha``."""
    if alpha < 0.05:
        a2 = alpha * alpha
        # (2a - sin 2a) / 2 expanded in powers of a
        return alpha * a2 * (2.0 / 3.0 - a2 * (2.0 / 15.0 - a2 * (4.0 / 315.0 - a2 * (2.0 / 2835.0))))
    return alpha - 0.5 * math.sin(2.0 * alpha)


def segment_area(rho: float, t: float) -> float:
    """Area of ``{x in B(0, rho) : x.e > t}`` for a unit vector ``e``."""
    if rho <= 0:
        raise DomainError("segment_area needs rho > 0")
    if abs(t) > rho + GEOM_TOL:
        raise DomainError(f"|t| = {abs(t)} exceeds rho = {rho}")
    # alpha = arccos(t / rho), written through the half-angle to stay accurate near t = rho
    gap = min(max((rho - t) / (2.0 * rho), 0.0), 1.0)
    alpha = 2.0 * math.asin(math.sqrt(gap))
    return rho * rho * _alpha_minus_sincos(alpha)


def lens_area(r1: float, r2: float, dist: float) -> float:
    """Area of the intersection of two disks with radii ``r1``, ``r2`` and center distance ``dist``."""
    if dist >= r1 + r2:
        return 0.0
    if dist <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    # radical line position measured from the first center
    x = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist)
    return segment_area(r1, x) + segment_area(r2, dist - x)


def circle_intersection(c1: Circle, c2: Circle):
    """Intersection points of two circles (empty tuple, or two points possibly equal)."""
    p1 = np.asarray(c1.center, float)
    p2 = np.asarray(c2.center, float)
    dvec = p2 - p1
    dist = float(np.hypot(*dvec))
    if dist == 0.0 or dist > c1.radius + c2.radius + GEOM_TOL or dist < abs(c1.radius - c2.radius) - GEOM_TOL:
        return ()
    a = (dist * dist + c1.radius**2 - c2.radius**2) / (2.0 * dist)
    h = math.sqrt(max(c1.radius**2 - a * a, 0.0))
    e = dvec / dist
    base = p1 + a * e
    perp = np.array([-e[1], e[0]])
    return (Vec2(*(base + h * perp)), Vec2(*(base - h * perp)))


def polygon_area(vertices) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[0] < 3:
        raise DomainError("polygon_area needs at least 3 vertices")
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_length(vertices, closed: bool = True) -> float:
    v = np.asarray(vertices, dtype=float)
    seg = np.diff(np.vstack([v, v[:1]]) if closed else v, axis=0)
    return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))


# ---------------------------------------------------------------------------
# radial functions of off-center circles


def _q_arc(rho, d, phi):
    s = np.sin(phi)
    return -d * np.cos(phi) + np.sqrt(np.maximum(rho * rho - d * d * s * s, 0.0))


def _dq_arc(rho, d, phi):
    s = np.sin(phi)
    c = np.cos(phi)
    if d >= rho - GEOM_TOL:
        # origin on the circle: q = -2 rho cos(phi) on the visible half, 0 elsewhere
        return np.where(c < 0, 2.0 * rho * s, 0.0)
    root = np.sqrt(rho * rho - d * d * s * s)
    return d * (-d * c + root) * s / root


def polar_q_offcenter(rho: float, d: float, theta):
    """Distance from ``a = center + d e`` to the circle ``|x - center| = rho`` along
    the direction at angle ``theta`` from ``e``."""
    if d < 0 or d > rho + GEOM_TOL:
        raise DomainError(f"origin outside the ball: d = {d}, rho = {rho}")
    out = _q_arc(rho, min(d, rho), np.asarray(theta, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def polar_dq_offcenter(rho: float, d: float, theta):
    """Angular derivative of :func:`polar_q_offcenter`, ``2 d q^2 sin / (q^2 + rho^2 - d^2)``."""
    if d < 0 or d >= rho:
        raise DomainError(f"derivative needs 0 <= d < rho (d = {d}, rho = {rho})")
    theta = np.asarray(theta, dtype=float)
    q = _q_arc(rho, d, theta)
    out = 2.0 * d * q * q * np.sin(theta) / (q * q + (rho * rho - d * d))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# star-shaped boundaries in polar form


@dataclass(frozen=True)
class OffCenterArc:
    """Arc of a circle of radius ``rho`` seen from an origin offset by ``offset`` from its
    center, in the direction ``axis`` (origin = center + offset * (cos axis, sin axis))."""

    rho: float
    offset: float
    axis: float = 0.0

    def q(self, theta):
        return _q_arc(self.rho, self.offset, theta - self.axis)

    def dq(self, theta):
        return _dq_arc(self.rho, self.offset, theta - self.axis)


@dataclass(frozen=True)
class Chord:
    """Straight line at distance ``distance`` from the origin with unit normal at angle ``normal``."""

    distance: float
    normal: float = 0.0

    def q(self, theta):
        return self.distance / np.cos(theta - self.normal)

    def dq(self, theta):
        c = np.cos(theta - self.normal)
        return self.distance * np.sin(theta - self.normal) / (c * c)


Descriptor = Union[OffCenterArc, Chord]


@dataclass(frozen=True)
class ShapePiece:
    start: float  # in [0, 2pi)
    width: float  # > 0
    descriptor: Descriptor

    def covers(self, theta):
        return np.mod(theta - self.start, TWO_PI) < self.width


@dataclass(frozen=True)
class PolarShape:
    """Star-shaped closed curve ``theta -> origin + q(theta) (cos theta, sin theta)``."""

    origin: Vec2
    pieces: tuple
    n: int = 2

    @classmethod
    def from_intervals(cls, origin, intervals: Sequence, n: int = 2) -> "PolarShape":
        """Build from ``(start, end, descriptor)`` triples; zero-width pieces are dropped."""
        pieces = []
        for start, end, desc in intervals:
            width = end - start
            if width <= GEOM_TOL:
                continue
            pieces.append(ShapePiece(float(np.mod(start, TWO_PI)), float(width), desc))
        total = sum(p.width for p in pieces)
        if abs(total - TWO_PI) > 1e-9:
            raise DomainError(f"pieces cover {total} rad instead of 2pi")
        return cls(Vec2(float(origin[0]), float(origin[1])), tuple(pieces), n)

    @classmethod
    def circle(cls, origin, radius: float, n: int = 2) -> "PolarShape":
        return cls.from_intervals(origin, [(0.0, TWO_PI, OffCenterArc(radius, 0.0))], n)

    def piece_index(self, theta) -> np.ndarray:
        """Index of the piece covering each angle (pieces are contiguous)."""
        theta = np.asarray(theta, dtype=float)
        if len(self.pieces) == 1:
            return np.zeros(theta.shape, dtype=int)
        starts = np.array([p.start for p in self.pieces])
        order = np.argsort(starts)
        # angles before the smallest start belong to the piece that wraps through 2pi
        pos = np.searchsorted(starts[order], np.mod(theta, TWO_PI), side="right") - 1
        return order[pos]

    def _dispatch(self, theta, attr):
        theta = np.asarray(theta, dtype=float)
        idx = self.piece_index(theta)
        out = np.zeros(theta.shape)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = getattr(piece.descriptor, attr)(theta[mask])
        return out

    def q(self, theta):
        return self._dispatch(theta, "q")

    def dq(self, theta):
        return self._dispatch(theta, "dq")

    def breakpoints(self) -> np.ndarray:
        """Sorted angles in [0, 2pi) where consecutive pieces meet."""
        return np.sort(np.array([p.start for p in self.pieces]))

    def intervals(self):
        """Angular intervals ``(start, end)`` of the smooth pieces, start in [0, 2pi)."""
        return [(p.start, p.start + p.width) for p in self.pieces]

    def boundary(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        q = self.q(theta)
        return np.stack(
            [self.origin[0] + q * np.cos(theta), self.origin[1] + q * np.sin(theta)], axis=-1
        )

    def area(self, nodes: int = 64) -> float:
        """Enclosed area (n = 2) by Gauss-Legendre quadrature on each smooth piece."""
        x, w = np.polynomial.legendre.leggauss(nodes)
        total = 0.0
        for a, b in self.intervals():
            th = 0.5 * (b - a) * x + 0.5 * (a + b)
            total += 0.5 * (b - a) * float(np.sum(w * 0.5 * self.q(th) ** 2))
        return total
